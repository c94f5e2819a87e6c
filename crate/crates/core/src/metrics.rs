//! Downlink SINR, spectral efficiency and distribution statistics.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, BeamSelector, ChannelMatrix};
use crate::error::{Error, Result};
use crate::precoding::PrecoderMatrix;

/// Quantile rule used by [`distribution_stats`].
pub const QUARTILE_METHOD: &str = "linear interpolation between order statistics at p*(n-1)";

/// Everything needed to evaluate the downlink SINR of every user.
///
/// SINRs are always evaluated on the true channels; the precoder is usually
/// derived from noisy estimates.
#[derive(Debug, Clone, Copy)]
pub struct SinrInputs<'a> {
    pub channels: &'a [ChannelMatrix],
    pub selectors: &'a [BeamSelector],
    pub precoder: &'a PrecoderMatrix,
    /// Per-stream transmit power, linear (mW).
    pub tx_power: f64,
    /// Downlink noise power, linear (mW).
    pub noise_power: f64,
    /// Downlink fraction of each coherence block, in (0, 1].
    pub tau_ratio: f64,
}

impl SinrInputs<'_> {
    fn validate(&self) -> Result<()> {
        let k = self.channels.len();
        if k == 0 || self.selectors.len() != k || self.precoder.users() != k {
            return Err(Error::Domain(format!(
                "inconsistent users: {} channels, {} selectors, {} precoder columns",
                k,
                self.selectors.len(),
                self.precoder.users()
            )));
        }
        if self.channels.iter().any(|h| h.tx_ports() != self.precoder.matrix().nrows()) {
            return Err(Error::Domain("channel and precoder port counts differ".into()));
        }
        check_tau(self.tau_ratio)
    }

    fn effective(&self) -> Vec<DVector<Complex64>> {
        self.channels.iter().zip(self.selectors).map(|(h, w)| effective_channel(h, w).vector).collect()
    }
}

fn check_tau(tau_ratio: f64) -> Result<()> {
    if tau_ratio > 0.0 && tau_ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau ratio must be in (0, 1], got {tau_ratio}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    pub per_user_sinr: Vec<f64>,
    /// bps/Hz
    pub per_user_se: Vec<f64>,
    /// bps/Hz/cell
    pub sum_se: f64,
}

/// SINR of user `k`:
/// `p |w_k^T H_k f_k|^2 / (sum_{i != k} p |w_k^T H_k f_i|^2 + noise)`.
pub fn sinr_dl(inputs: &SinrInputs<'_>, k: usize) -> Result<f64> {
    inputs.validate()?;
    if k >= inputs.channels.len() {
        return Err(Error::Domain(format!("user {k} out of range")));
    }
    let h = effective_channel(&inputs.channels[k], &inputs.selectors[k]).vector;
    Ok(user_sinr(&h, k, inputs.precoder, inputs.tx_power, inputs.noise_power))
}

/// SINRs and spectral efficiencies of all users.
pub fn evaluate(inputs: &SinrInputs<'_>) -> Result<SeResult> {
    inputs.validate()?;
    let sinrs = downlink_sinrs(&inputs.effective(), inputs.precoder, inputs.tx_power, inputs.noise_power);
    se_result(sinrs, inputs.tau_ratio)
}

/// SINRs from the effective (beam-selected) true channels `h_k`, where user
/// `k` receives `h_k^T f` from a stream precoded with `f`.
pub fn downlink_sinrs(
    channels: &[DVector<Complex64>],
    precoder: &PrecoderMatrix,
    tx_power: f64,
    noise_power: f64,
) -> Vec<f64> {
    channels.iter().enumerate().map(|(k, h)| user_sinr(h, k, precoder, tx_power, noise_power)).collect()
}

fn user_sinr(h: &DVector<Complex64>, k: usize, precoder: &PrecoderMatrix, tx_power: f64, noise_power: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, f) in precoder.matrix().column_iter().enumerate() {
        let gain = tx_power * h.dot(&f).norm_sqr();
        if i == k {
            signal = gain;
        } else {
            interference += gain;
        }
    }
    signal / (interference + noise_power)
}

pub(crate) fn se_result(per_user_sinr: Vec<f64>, tau_ratio: f64) -> Result<SeResult> {
    check_tau(tau_ratio)?;
    let per_user_se: Vec<f64> = per_user_sinr.iter().map(|&s| se_user(s, tau_ratio)).collect();
    let sum_se = se_sum(&per_user_se)?;
    Ok(SeResult { per_user_sinr, per_user_se, sum_se })
}

/// `tau_ratio * log2(1 + sinr)`, bps/Hz.
pub fn se_user(sinr: f64, tau_ratio: f64) -> f64 {
    tau_ratio * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Sum of individual spectral efficiencies, left to right.
pub fn se_sum(per_user: &[f64]) -> Result<f64> {
    if per_user.is_empty() {
        return Err(Error::Domain("cannot sum an empty user list".into()));
    }
    Ok(per_user.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub mean: f64,
}

pub fn distribution_stats(samples: &[f64]) -> Result<DistributionStats> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionStats {
        median: quantile_sorted(&sorted, 0.5),
        lower_quartile: quantile_sorted(&sorted, 0.25),
        upper_quartile: quantile_sorted(&sorted, 0.75),
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
    })
}

/// Quantile of an ascending, non-empty slice at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
