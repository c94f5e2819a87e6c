//! Digital baseband precoders: maximum ratio, zero forcing, regularized zero
//! forcing and the analog beam-selection baseline.
//!
//! All precoders work on a [`ChannelEstimateSet`] whose column `k` is the
//! vector `c_k` for which user `k` receives `c_k^H f` from a transmitted
//! stream with precoding vector `f`. Every output column is normalized to
//! unit norm after the combining matrix is formed; there is no power
//! rebalancing across users.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};

/// Largest condition number of the estimate matrix accepted by ZF.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimateSet {
    matrix: DMatrix<Complex64>,
}

impl ChannelEstimateSet {
    /// Wraps a ports x users matrix. Needs `1 <= K <= ports` and no all-zero column.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let (ports, users) = matrix.shape();
        if users == 0 || users > ports {
            return Err(Error::Domain(format!("need 1 <= K <= {ports} users, got {users}")));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("channel estimate contains non-finite entries".into()));
        }
        if let Some(k) = matrix.column_iter().position(|c| c.norm_squared() == 0.0) {
            return Err(Error::DegenerateChannel(format!("estimate of user {k} is all zero")));
        }
        Ok(ChannelEstimateSet { matrix })
    }

    /// Builds the set from per-user effective channel estimates.
    ///
    /// User `k` receives `h_k^T f`, so the stored column is `conj(h_k)`.
    pub fn from_effective(estimates: &[EffectiveChannel]) -> Result<Self> {
        let Some(first) = estimates.first() else {
            return Err(Error::Domain("no channel estimates".into()));
        };
        let ports = first.vector.len();
        if estimates.iter().any(|e| e.vector.len() != ports) {
            return Err(Error::Domain("channel estimates differ in length".into()));
        }
        let matrix = DMatrix::from_fn(ports, estimates.len(), |m, k| estimates[k].vector[m].conj());
        ChannelEstimateSet::new(matrix)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn users(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn ports(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Analog,
    Mr,
    Zf,
    Rzf,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 4] = [PrecoderKind::Analog, PrecoderKind::Mr, PrecoderKind::Zf, PrecoderKind::Rzf];

    pub fn label(&self) -> &'static str {
        match self {
            PrecoderKind::Analog => "analog",
            PrecoderKind::Mr => "mr",
            PrecoderKind::Zf => "zf",
            PrecoderKind::Rzf => "rzf",
        }
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecoderKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown precoder `{s}`")))
    }
}

/// Ports x users precoder with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderMatrix {
    matrix: DMatrix<Complex64>,
    kind: PrecoderKind,
}

impl PrecoderMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    pub fn users(&self) -> usize {
        self.matrix.ncols()
    }

    fn normalized(mut matrix: DMatrix<Complex64>, kind: PrecoderKind) -> Result<Self> {
        for (k, mut col) in matrix.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::DegenerateChannel(format!("{kind} column {k} has norm {norm}")));
            }
            col.unscale_mut(norm);
        }
        Ok(PrecoderMatrix { matrix, kind })
    }
}

/// Maximum ratio: `W = H`.
pub fn precode_mr(est: &ChannelEstimateSet) -> Result<PrecoderMatrix> {
    PrecoderMatrix::normalized(est.matrix.clone(), PrecoderKind::Mr)
}

/// Zero forcing: `W = H (H^H H)^-1`.
pub fn precode_zf(est: &ChannelEstimateSet) -> Result<PrecoderMatrix> {
    let w = regularized_combiner(est, 0.0)?;
    PrecoderMatrix::normalized(w, PrecoderKind::Zf)
}

/// Regularized zero forcing: `W = H (H^H H + (noise/p) I)^-1`.
pub fn precode_rzf(est: &ChannelEstimateSet, noise_power: f64, tx_power: f64) -> Result<PrecoderMatrix> {
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power must be >= 0, got {noise_power}")));
    }
    if !(tx_power.is_finite() && tx_power > 0.0) {
        return Err(Error::Domain(format!("transmit power must be > 0, got {tx_power}")));
    }
    let w = regularized_combiner(est, noise_power / tx_power)?;
    PrecoderMatrix::normalized(w, PrecoderKind::Rzf)
}

/// Analog beam selection: each column is one-hot at the strongest port of
/// that user's estimate (ties to the lowest port).
pub fn precode_analog(est: &ChannelEstimateSet) -> Result<PrecoderMatrix> {
    let mut matrix = DMatrix::zeros(est.ports(), est.users());
    for (k, col) in est.matrix.column_iter().enumerate() {
        let port = strongest_port(col.iter().map(|z| z.norm_sqr()))
            .ok_or_else(|| Error::DegenerateChannel(format!("estimate of user {k} is all zero")))?;
        matrix[(port, k)] = Complex64::new(1.0, 0.0);
    }
    Ok(PrecoderMatrix { matrix, kind: PrecoderKind::Analog })
}

pub fn precode(
    kind: PrecoderKind,
    est: &ChannelEstimateSet,
    noise_power: f64,
    tx_power: f64,
) -> Result<PrecoderMatrix> {
    let out = match kind {
        PrecoderKind::Analog => precode_analog(est),
        PrecoderKind::Mr => precode_mr(est),
        PrecoderKind::Zf => precode_zf(est),
        PrecoderKind::Rzf => precode_rzf(est, noise_power, tx_power),
    };
    out.map_err(|e| Error::Precoder { kind, source: Box::new(e) })
}

fn strongest_port(powers: impl Iterator<Item = f64>) -> Option<usize> {
    let (port, best) = powers.enumerate().fold((0, 0.0), |best, (i, p)| if p > best.1 { (i, p) } else { best });
    (best > 0.0).then_some(port)
}

/// `H (H^H H + alpha I)^-1` evaluated through the SVD `H = U S V^H` as
/// `U S (S^2 + alpha)^-1 V^H`, which never forms the Gram matrix.
fn regularized_combiner(est: &ChannelEstimateSet, alpha: f64) -> Result<DMatrix<Complex64>> {
    let svd = SVD::new(est.matrix.clone(), true, true);
    let s = &svd.singular_values;
    let (u, v_t) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));

    if alpha == 0.0 {
        let smax = s.max();
        let smin = s.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition.is_nan() || condition > MAX_CONDITION {
            return Err(Error::SingularChannel { condition, limit: MAX_CONDITION });
        }
    }
    let weights = DVector::from_iterator(
        s.len(),
        s.iter().map(|&si| {
            let denom = si * si + alpha;
            Complex64::new(if denom > 0.0 { si / denom } else { 0.0 }, 0.0)
        }),
    );
    Ok(u * DMatrix::from_diagonal(&weights) * v_t)
}
