//! Monte Carlo orchestration: scenario sampling, estimation averaging,
//! precoder evaluation and aggregation into report rows.
//!
//! One realization draws `K` user angles, builds each user's true effective
//! channel once (or takes it from a recorded trace), then runs `n_est`
//! estimation rounds. Every round draws fresh estimates for all users,
//! computes every configured precoder from them and scores all users against
//! the true channels. Per-user SE is the mean over rounds.

mod output;
mod trace;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{
    ElementPattern, FrontEnd, FrontEndKind, UlaConfig, NUM_PORTS, PATCH_EXPONENT, PATCH_PEAK_DBI, QUASI_YAGI_EXPONENT,
    QUASI_YAGI_PEAK_DBI,
};
use crate::channel::{
    effective_channel, estimate_channel_with_variance, estimation_noise_variance, noise_power, select_beam,
    synth_channel_with_rx_gain, EffectiveChannel, LinkBudget, UserPlacement,
};
use crate::error::{Error, Result};
use crate::metrics::{distribution_stats, downlink_sinrs, se_sum, se_user, DistributionStats};
use crate::precoding::{precode, ChannelEstimateSet, PrecoderKind};
use crate::rng::{StreamKey, StreamScope};
use crate::units::dbm_to_mw;

pub use output::{write_aggregates, ResultsWriter, AGGREGATE_HEADER, RESULTS_HEADER};
pub use trace::{load_trace, parse_trace, synthesize_trace, ChannelTrace, TRACE_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Synthesize,
    Replay,
}

/// Element models of the BS and user arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySettings {
    pub spacing_wl: f64,
    pub quasi_yagi_peak_dbi: f64,
    pub quasi_yagi_exponent: f64,
    pub patch_peak_dbi: f64,
    pub patch_exponent: f64,
}

impl Default for ArraySettings {
    fn default() -> Self {
        ArraySettings {
            spacing_wl: 0.5,
            quasi_yagi_peak_dbi: QUASI_YAGI_PEAK_DBI,
            quasi_yagi_exponent: QUASI_YAGI_EXPONENT,
            patch_peak_dbi: PATCH_PEAK_DBI,
            patch_exponent: PATCH_EXPONENT,
        }
    }
}

impl ArraySettings {
    /// BS front end of the given kind.
    pub fn transmitter(&self, kind: FrontEndKind) -> Result<FrontEnd> {
        match kind {
            FrontEndKind::MultiBeamButler => FrontEnd::butler(self.quasi_yagi()?),
            FrontEndKind::PatchDirect => {
                let ula = UlaConfig::new(
                    NUM_PORTS,
                    self.spacing_wl,
                    ElementPattern::Patch { exponent: self.patch_exponent },
                    self.patch_peak_dbi,
                )?;
                Ok(FrontEnd::patch_direct(ula))
            }
        }
    }

    /// The user side always uses the multi-beam array.
    pub fn receiver(&self) -> Result<FrontEnd> {
        FrontEnd::butler(self.quasi_yagi()?)
    }

    fn quasi_yagi(&self) -> Result<UlaConfig> {
        UlaConfig::new(
            NUM_PORTS,
            self.spacing_wl,
            ElementPattern::QuasiYagi { exponent: self.quasi_yagi_exponent },
            self.quasi_yagi_peak_dbi,
        )
    }
}

/// One (K, frontend) cell of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub users: usize,
    /// Users are placed in `[-range, range]` deg.
    pub theta_bs_range_deg: f64,
    pub theta_user_deg: f64,
    pub realizations: usize,
    /// Channel estimations averaged per user and realization.
    pub estimations: usize,
    pub seed: u64,
    pub frontend: FrontEndKind,
    pub precoders: Vec<PrecoderKind>,
    pub budget: LinkBudget,
    pub mode: Mode,
    pub tau_ratio: f64,
    /// Multiplier on the per-entry estimation error variance `N / p_tx`.
    pub estimation_noise_scale: f64,
    /// Overrides the downlink noise power; defaults to `N0 B F`.
    pub downlink_noise_dbm: Option<f64>,
    /// Pins the selected user-beam gain instead of evaluating the pattern.
    pub fixed_rx_gain_dbi: Option<f64>,
    /// Splits `p_tx` evenly over the K streams (not part of the reference setup).
    pub total_power_constraint: bool,
    pub arrays: ArraySettings,
}

impl ScenarioConfig {
    /// Reference scenario for `users` users on the given front end.
    pub fn reference(users: usize, frontend: FrontEndKind) -> Self {
        ScenarioConfig {
            users,
            theta_bs_range_deg: 60.0,
            theta_user_deg: 4.0,
            realizations: 1000,
            estimations: 100,
            seed: 0,
            frontend,
            precoders: PrecoderKind::ALL.to_vec(),
            budget: LinkBudget::reference(),
            mode: Mode::Synthesize,
            tau_ratio: 1.0,
            estimation_noise_scale: 1.0,
            downlink_noise_dbm: None,
            fixed_rx_gain_dbi: None,
            total_power_constraint: false,
            arrays: ArraySettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=NUM_PORTS).contains(&self.users) {
            return Err(Error::Domain(format!("users must be in 1..={NUM_PORTS}, got {}", self.users)));
        }
        if self.realizations == 0 || self.estimations == 0 {
            return Err(Error::Domain("realizations and estimations must be >= 1".into()));
        }
        if self.precoders.is_empty() {
            return Err(Error::Domain("no precoders configured".into()));
        }
        if !(0.0..=90.0).contains(&self.theta_bs_range_deg) {
            return Err(Error::Domain(format!("theta_bs range {} outside [0, 90]", self.theta_bs_range_deg)));
        }
        if !(self.estimation_noise_scale >= 0.0 && self.estimation_noise_scale.is_finite()) {
            return Err(Error::Domain("estimation noise scale must be >= 0".into()));
        }
        self.budget.validate()
    }

    /// Per-stream transmit power in mW.
    pub fn stream_power(&self) -> f64 {
        let p = self.budget.tx_power_mw();
        if self.total_power_constraint {
            p / self.users as f64
        } else {
            p
        }
    }

    /// Downlink noise power in mW.
    pub fn downlink_noise(&self) -> f64 {
        self.downlink_noise_dbm.map_or_else(|| noise_power(&self.budget), dbm_to_mw)
    }

    pub fn estimation_variance(&self) -> f64 {
        estimation_noise_variance(&self.budget, self.estimation_noise_scale)
    }
}

/// Where the true user channels come from.
#[derive(Debug, Clone, Copy)]
pub enum ChannelSource<'a> {
    /// Angles drawn uniformly and continuously from the configured range.
    Synthesize,
    /// Synthesized channels at `K` distinct angles drawn from a fixed pool.
    AnglePool(&'a [f64]),
    /// Recorded channel vectors at `K` distinct trace angles.
    Replay(&'a ChannelTrace),
}

/// Result of one precoder in one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub users: usize,
    pub frontend: FrontEndKind,
    pub precoder: PrecoderKind,
    pub realization: usize,
    pub theta_bs_deg: Vec<f64>,
    /// Mean SE per user over the estimation rounds, bps/Hz.
    pub per_user_se: Vec<f64>,
    pub sum_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRealization {
    pub users: usize,
    pub frontend: FrontEndKind,
    pub precoder: PrecoderKind,
    pub realization: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub results: Vec<RealizationResult>,
    pub skipped: Vec<SkippedRealization>,
}

enum TrueChannel<'a> {
    Fixed(DVector<Complex64>),
    Recorded(&'a [DVector<Complex64>]),
}

impl TrueChannel<'_> {
    fn at_round(&self, round: usize) -> &DVector<Complex64> {
        match self {
            TrueChannel::Fixed(h) => h,
            TrueChannel::Recorded(list) => &list[round % list.len()],
        }
    }
}

/// A validated scenario bound to a channel source.
pub struct Experiment<'a> {
    cfg: ScenarioConfig,
    source: ChannelSource<'a>,
    tx: FrontEnd,
    rx: FrontEnd,
    stream_power: f64,
    downlink_noise: f64,
    estimation_variance: f64,
}

impl<'a> Experiment<'a> {
    pub fn new(cfg: ScenarioConfig, source: ChannelSource<'a>) -> Result<Self> {
        cfg.validate()?;
        match (cfg.mode, &source) {
            (Mode::Replay, ChannelSource::Replay(_)) => {}
            (Mode::Synthesize, ChannelSource::Synthesize | ChannelSource::AnglePool(_)) => {}
            (mode, _) => {
                return Err(Error::Domain(format!("channel source does not match mode {mode:?}")));
            }
        }
        let tx = cfg.arrays.transmitter(cfg.frontend)?;
        let rx = cfg.arrays.receiver()?;
        Ok(Experiment {
            stream_power: cfg.stream_power(),
            downlink_noise: cfg.downlink_noise(),
            estimation_variance: cfg.estimation_variance(),
            cfg,
            source,
            tx,
            rx,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Runs realization `index`; depends only on `(seed, K, index)`.
    pub fn run_realization(&self, index: usize) -> Result<RealizationOutcome> {
        let cfg = &self.cfg;
        let k_users = cfg.users;
        let (angles, truths) = self.draw_users(index)?;

        let precoders = &cfg.precoders;
        let mut se_acc = vec![vec![0.0; k_users]; precoders.len()];
        let mut failures: Vec<Option<Error>> = precoders.iter().map(|_| None).collect();
        let est_key = StreamKey::new(cfg.seed, StreamScope::Estimation).users(k_users).realization(index);

        for round in 0..cfg.estimations {
            let true_vectors: Vec<DVector<Complex64>> = truths.iter().map(|t| t.at_round(round).clone()).collect();
            let estimates: Vec<EffectiveChannel> = true_vectors
                .iter()
                .enumerate()
                .map(|(user, h)| {
                    let truth = EffectiveChannel { vector: h.clone(), rx_port: 0 };
                    let mut rng = est_key.user(user).round(round).rng();
                    estimate_channel_with_variance(&truth, self.estimation_variance, &mut rng)
                })
                .collect();
            let est_set = ChannelEstimateSet::from_effective(&estimates)?;

            for (slot, &kind) in precoders.iter().enumerate() {
                if failures[slot].is_some() {
                    continue;
                }
                match precode(kind, &est_set, self.downlink_noise, self.stream_power) {
                    Ok(f) => {
                        let sinrs = downlink_sinrs(&true_vectors, &f, self.stream_power, self.downlink_noise);
                        for (acc, sinr) in se_acc[slot].iter_mut().zip(sinrs) {
                            *acc += se_user(sinr, cfg.tau_ratio);
                        }
                    }
                    Err(e) if e.is_singular() => failures[slot] = Some(e),
                    Err(e) => return Err(e),
                }
            }
        }

        let mut outcome = RealizationOutcome { results: Vec::new(), skipped: Vec::new() };
        let rounds = cfg.estimations as f64;
        for ((&kind, acc), failure) in precoders.iter().zip(se_acc).zip(failures) {
            if let Some(err) = failure {
                outcome.skipped.push(SkippedRealization {
                    users: k_users,
                    frontend: cfg.frontend,
                    precoder: kind,
                    realization: index,
                    reason: err.to_string(),
                });
                continue;
            }
            let per_user_se: Vec<f64> = acc.into_iter().map(|s| s / rounds).collect();
            outcome.results.push(RealizationResult {
                users: k_users,
                frontend: cfg.frontend,
                precoder: kind,
                realization: index,
                theta_bs_deg: angles.clone(),
                sum_se: se_sum(&per_user_se)?,
                per_user_se,
            });
        }
        Ok(outcome)
    }

    /// All realizations, computed in parallel and returned in index order.
    pub fn run(&self) -> Result<Vec<RealizationOutcome>> {
        (0..self.cfg.realizations)
            .into_par_iter()
            .map(|i| self.run_realization(i).map_err(|e| self.locate(i, e)))
            .collect()
    }

    fn locate(&self, realization: usize, err: Error) -> Error {
        Error::Campaign {
            users: self.cfg.users,
            frontend: self.cfg.frontend.to_string(),
            realization,
            source: Box::new(err),
        }
    }

    fn draw_users(&self, index: usize) -> Result<(Vec<f64>, Vec<TrueChannel<'a>>)> {
        let cfg = &self.cfg;
        let k_users = cfg.users;
        let mut rng = StreamKey::new(cfg.seed, StreamScope::Angles).users(k_users).realization(index).rng();
        match self.source {
            ChannelSource::Synthesize => {
                let range = cfg.theta_bs_range_deg;
                let angles: Vec<f64> = (0..k_users).map(|_| rng.random_range(-range..=range)).collect();
                let truths = angles.iter().map(|&t| self.synthesize(t)).collect::<Result<_>>()?;
                Ok((angles, truths))
            }
            ChannelSource::AnglePool(pool) => {
                let picks = pick_distinct(&mut rng, pool.len(), k_users)?;
                let angles: Vec<f64> = picks.iter().map(|&i| pool[i]).collect();
                let truths = angles.iter().map(|&t| self.synthesize(t)).collect::<Result<_>>()?;
                Ok((angles, truths))
            }
            ChannelSource::Replay(trace) => {
                let picks = pick_distinct(&mut rng, trace.num_angles(), k_users)?;
                let angles = picks.iter().map(|&i| trace.angles()[i]).collect();
                let truths = picks.iter().map(|&i| TrueChannel::Recorded(trace.estimations(i))).collect();
                Ok((angles, truths))
            }
        }
    }

    fn synthesize(&self, theta_bs_deg: f64) -> Result<TrueChannel<'a>> {
        let place = UserPlacement { theta_bs_deg, theta_user_deg: self.cfg.theta_user_deg, budget: self.cfg.budget };
        let h = synth_channel_with_rx_gain(&self.tx, &self.rx, &place, self.cfg.fixed_rx_gain_dbi)?;
        let w = select_beam(&h)?;
        Ok(TrueChannel::Fixed(effective_channel(&h, &w).vector))
    }
}

fn pick_distinct<R: Rng + ?Sized>(rng: &mut R, available: usize, requested: usize) -> Result<Vec<usize>> {
    if requested > available {
        return Err(Error::InsufficientTrace { requested, available });
    }
    Ok(index::sample(rng, available, requested).into_vec())
}

/// Statistics of one (K, frontend, precoder) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub users: usize,
    pub frontend: FrontEndKind,
    pub precoder: PrecoderKind,
    /// Distribution of individual SE over all users and realizations.
    pub individual_se: DistributionStats,
    pub sum_se_mean: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub aggregates: Vec<AggregateRow>,
    /// Realization x precoder units attempted.
    pub total_units: usize,
    pub skipped: Vec<SkippedRealization>,
}

impl CampaignReport {
    pub fn skip_rate(&self) -> f64 {
        if self.total_units == 0 {
            0.0
        } else {
            self.skipped.len() as f64 / self.total_units as f64
        }
    }

    pub fn row(&self, users: usize, frontend: FrontEndKind, precoder: PrecoderKind) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| r.users == users && r.frontend == frontend && r.precoder == precoder)
    }
}

/// Runs every scenario of the sweep in order. Each result is handed to
/// `sink` in (scenario, realization, precoder) order; the returned report
/// holds the per-cell aggregates.
pub fn run_campaign<F>(sweep: &[ScenarioConfig], source: ChannelSource<'_>, mut sink: F) -> Result<CampaignReport>
where
    F: FnMut(&RealizationResult) -> Result<()>,
{
    if sweep.is_empty() {
        return Err(Error::Domain("empty scenario sweep".into()));
    }
    let mut report = CampaignReport::default();
    for cfg in sweep {
        let experiment = Experiment::new(cfg.clone(), source)?;
        log::info!("running K={} frontend={} ({} realizations)", cfg.users, cfg.frontend, cfg.realizations);
        let outcomes = experiment.run()?;

        let mut individual: Vec<Vec<f64>> = vec![Vec::new(); cfg.precoders.len()];
        let mut sums: Vec<Vec<f64>> = vec![Vec::new(); cfg.precoders.len()];
        for outcome in outcomes {
            for result in &outcome.results {
                sink(result)?;
                let slot = cfg.precoders.iter().position(|&p| p == result.precoder).expect("configured precoder");
                individual[slot].extend_from_slice(&result.per_user_se);
                sums[slot].push(result.sum_se);
            }
            report.skipped.extend(outcome.skipped);
        }
        report.total_units += cfg.realizations * cfg.precoders.len();

        for (slot, &precoder) in cfg.precoders.iter().enumerate() {
            let nan = DistributionStats {
                median: f64::NAN,
                lower_quartile: f64::NAN,
                upper_quartile: f64::NAN,
                mean: f64::NAN,
            };
            let individual_se = distribution_stats(&individual[slot]).unwrap_or(nan);
            let sum_se_mean =
                if sums[slot].is_empty() { f64::NAN } else { sums[slot].iter().sum::<f64>() / sums[slot].len() as f64 };
            report.aggregates.push(AggregateRow {
                users: cfg.users,
                frontend: cfg.frontend,
                precoder,
                individual_se,
                sum_se_mean,
                realizations: sums[slot].len(),
            });
        }
    }
    Ok(report)
}
