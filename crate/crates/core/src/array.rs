//! Transmit/receive front ends: ULA geometry, element patterns, the Butler
//! phase network and the complex response seen at each beam port.
//!
//! Conventions: the phase reference is element 0, and positive azimuth is
//! measured from broadside toward increasing element index. A beam port's
//! response is the coherent sum over elements of the network column, the
//! plane-wave steering phase and the element amplitude pattern, so
//! `|response|^2` is the beam gain (linear, relative to isotropic) and
//! `arg(response)` is the phase that enters the channel model.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_sig;
use crate::units::{db_to_linear, linear_to_db};

/// Number of beam ports (and antenna elements) of the arrays in this system.
pub const NUM_PORTS: usize = 16;

/// Peak gain of the quasi-Yagi element, dBi.
pub const QUASI_YAGI_PEAK_DBI: f64 = 4.0;
/// Cosine-power exponent of the quasi-Yagi element (about 168 deg element HPBW).
pub const QUASI_YAGI_EXPONENT: f64 = 0.3;
/// Peak gain of the rectangular patch element, dBi.
pub const PATCH_PEAK_DBI: f64 = 6.0;
/// Cosine-power exponent of the patch element (about 59 deg element HPBW).
pub const PATCH_EXPONENT: f64 = 5.0;

/// Normalized element power pattern.
///
/// Directive elements follow `cos^q(theta)`, zero behind the array plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ElementPattern {
    Isotropic,
    QuasiYagi { exponent: f64 },
    Patch { exponent: f64 },
}

impl ElementPattern {
    pub fn exponent(&self) -> f64 {
        match *self {
            ElementPattern::Isotropic => 0.0,
            ElementPattern::QuasiYagi { exponent } | ElementPattern::Patch { exponent } => exponent,
        }
    }

    /// Power pattern normalized to 1 at broadside.
    pub fn shape(&self, theta_deg: f64) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            _ => theta_deg.to_radians().cos().max(0.0).powf(self.exponent()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaConfig {
    pub num_elements: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub element_pattern: ElementPattern,
    /// Element peak gain, dBi.
    pub element_peak_gain: f64,
}

impl UlaConfig {
    pub fn new(
        num_elements: usize,
        spacing: f64,
        element_pattern: ElementPattern,
        element_peak_gain: f64,
    ) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::Domain("ULA needs at least one element".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Domain(format!("element spacing must be > 0, got {spacing}")));
        }
        if !element_peak_gain.is_finite() {
            return Err(Error::Domain("element peak gain must be finite".into()));
        }
        let q = element_pattern.exponent();
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::Domain(format!("element pattern exponent must be >= 0, got {q}")));
        }
        Ok(UlaConfig { num_elements, spacing, element_pattern, element_peak_gain })
    }

    /// 16 isotropic 0 dBi elements at half-wavelength spacing.
    pub fn isotropic() -> Self {
        UlaConfig {
            num_elements: NUM_PORTS,
            spacing: 0.5,
            element_pattern: ElementPattern::Isotropic,
            element_peak_gain: 0.0,
        }
    }

    /// The 1x16 quasi-Yagi array behind the Butler network.
    pub fn quasi_yagi() -> Self {
        UlaConfig {
            num_elements: NUM_PORTS,
            spacing: 0.5,
            element_pattern: ElementPattern::QuasiYagi { exponent: QUASI_YAGI_EXPONENT },
            element_peak_gain: QUASI_YAGI_PEAK_DBI,
        }
    }

    /// The half-wavelength rectangular patch baseline array.
    pub fn patch() -> Self {
        UlaConfig {
            num_elements: NUM_PORTS,
            spacing: 0.5,
            element_pattern: ElementPattern::Patch { exponent: PATCH_EXPONENT },
            element_peak_gain: PATCH_PEAK_DBI,
        }
    }

    /// Element power gain (linear) toward `theta_deg`.
    pub fn element_gain(&self, theta_deg: f64) -> f64 {
        db_to_linear(self.element_peak_gain) * self.element_pattern.shape(theta_deg)
    }
}

fn check_azimuth(theta_deg: f64) -> Result<()> {
    if theta_deg.is_finite() && (-90.0..=90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::Domain(format!("azimuth {theta_deg} deg outside [-90, 90]")))
    }
}

/// Per-element plane-wave phases: element `m` is `exp(j 2 pi spacing m sin(theta))`.
pub fn steering_vector(ula: &UlaConfig, theta_deg: f64) -> Result<DVector<Complex64>> {
    check_azimuth(theta_deg)?;
    let progression = 2.0 * PI * ula.spacing * theta_deg.to_radians().sin();
    Ok(DVector::from_fn(ula.num_elements, |m, _| Complex64::from_polar(1.0, progression * m as f64)))
}

/// Port-to-element transfer matrix of a lossless phase network.
///
/// Column `k` (0-based) holds the element excitations produced by driving
/// beam port `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButlerNetwork {
    transfer: DMatrix<Complex64>,
}

impl ButlerNetwork {
    /// Each digital port drives exactly one element.
    pub fn identity(n: usize) -> Self {
        ButlerNetwork { transfer: DMatrix::identity(n, n) }
    }

    pub fn transfer(&self) -> &DMatrix<Complex64> {
        &self.transfer
    }

    pub fn num_ports(&self) -> usize {
        self.transfer.ncols()
    }
}

/// Ideal `n x n` Butler matrix realized as its DFT-equivalent transfer
/// function.
///
/// Entry `(m, k)` is `exp(-j 2 pi m (2k - n - 1) / (2n)) / sqrt(n)` for
/// element `m` (0-based) and port `k` (1-based), so port `k` points its
/// beam at `sin(theta) = (2k - n - 1) / n` for half-wavelength spacing.
pub fn butler_network(n: usize) -> Result<ButlerNetwork> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("Butler network size must be a power of two, got {n}")));
    }
    let nf = n as f64;
    let scale = 1.0 / nf.sqrt();
    let transfer = DMatrix::from_fn(n, n, |m, col| {
        let k = (col + 1) as f64;
        let phase = -2.0 * PI * m as f64 * (2.0 * k - nf - 1.0) / (2.0 * nf);
        Complex64::from_polar(scale, phase)
    });
    Ok(ButlerNetwork { transfer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrontEndKind {
    #[serde(rename = "butler")]
    MultiBeamButler,
    #[serde(rename = "patch")]
    PatchDirect,
}

impl FrontEndKind {
    pub fn label(&self) -> &'static str {
        match self {
            FrontEndKind::MultiBeamButler => "butler",
            FrontEndKind::PatchDirect => "patch",
        }
    }
}

impl fmt::Display for FrontEndKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FrontEndKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "butler" | "multi_beam_butler" => Ok(FrontEndKind::MultiBeamButler),
            "patch" | "patch_direct" => Ok(FrontEndKind::PatchDirect),
            other => Err(Error::Domain(format!("unknown frontend `{other}` (expected butler or patch)"))),
        }
    }
}

/// An antenna array together with the network feeding it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub kind: FrontEndKind,
    pub ula: UlaConfig,
    pub network: ButlerNetwork,
}

impl FrontEnd {
    pub fn new(kind: FrontEndKind, ula: UlaConfig) -> Result<Self> {
        match kind {
            FrontEndKind::MultiBeamButler => FrontEnd::butler(ula),
            FrontEndKind::PatchDirect => Ok(FrontEnd::patch_direct(ula)),
        }
    }

    pub fn butler(ula: UlaConfig) -> Result<Self> {
        let network = butler_network(ula.num_elements)?;
        Ok(FrontEnd { kind: FrontEndKind::MultiBeamButler, ula, network })
    }

    pub fn patch_direct(ula: UlaConfig) -> Self {
        let network = ButlerNetwork::identity(ula.num_elements);
        FrontEnd { kind: FrontEndKind::PatchDirect, ula, network }
    }

    pub fn num_ports(&self) -> usize {
        self.network.num_ports()
    }

    /// Complex responses of all ports toward `theta_deg`, indexed by 0-based port.
    pub fn port_responses(&self, theta_deg: f64) -> Result<DVector<Complex64>> {
        let steering = steering_vector(&self.ula, theta_deg)?;
        let amplitude = self.ula.element_gain(theta_deg).sqrt();
        Ok(self.network.transfer.tr_mul(&steering) * Complex64::new(amplitude, 0.0))
    }
}

/// Complex gain of beam port `port` (1-based) toward `theta_deg`.
pub fn beam_port_response(front: &FrontEnd, port: usize, theta_deg: f64) -> Result<Complex64> {
    if port == 0 || port > front.num_ports() {
        return Err(Error::Domain(format!("port {port} outside 1..={}", front.num_ports())));
    }
    check_azimuth(theta_deg)?;
    let amplitude = front.ula.element_gain(theta_deg).sqrt();
    let steering = steering_vector(&front.ula, theta_deg)?;
    let column = front.network.transfer.column(port - 1);
    let sum: Complex64 = column.iter().zip(steering.iter()).map(|(w, a)| w * a).sum();
    Ok(sum * amplitude)
}

/// Uniform azimuth grid over [-90, 90] deg with the given step.
pub fn theta_grid(resolution_deg: f64) -> Result<Vec<f64>> {
    if !(resolution_deg.is_finite() && resolution_deg > 0.0 && resolution_deg <= 180.0) {
        return Err(Error::Domain(format!("grid resolution must be in (0, 180], got {resolution_deg}")));
    }
    let steps = (180.0 / resolution_deg).round() as usize;
    Ok((0..=steps).map(|i| -90.0 + 180.0 * i as f64 / steps as f64).collect())
}

/// Dense table of beam-port responses over an azimuth grid.
#[derive(Debug, Clone)]
pub struct PatternTable {
    pub kind: FrontEndKind,
    pub thetas: Vec<f64>,
    /// `responses[row]` holds all port responses at `thetas[row]`.
    pub responses: Vec<DVector<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSummary {
    pub port: usize,
    pub peak_deg: f64,
    pub peak_gain_dbi: f64,
    /// `None` when the beam does not fall 3 dB below its peak on both sides
    /// inside the grid.
    pub hpbw_deg: Option<f64>,
}

pub fn pattern_table(front: &FrontEnd, thetas: &[f64]) -> Result<PatternTable> {
    if thetas.is_empty() {
        return Err(Error::Domain("empty azimuth grid".into()));
    }
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("azimuth grid must be sorted".into()));
    }
    let responses = thetas.iter().map(|&t| front.port_responses(t)).collect::<Result<Vec<_>>>()?;
    Ok(PatternTable { kind: front.kind, thetas: thetas.to_vec(), responses })
}

impl PatternTable {
    pub fn num_ports(&self) -> usize {
        self.responses.first().map_or(0, |r| r.len())
    }

    /// Gain in dBi of 0-based `port` at grid row `row`.
    pub fn gain_dbi(&self, row: usize, port: usize) -> f64 {
        linear_to_db(self.responses[row][port].norm_sqr())
    }

    /// CSV with header `theta_deg,port,gain_dbi,phase_rad`; ports are 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta_deg,port,gain_dbi,phase_rad")?;
        for (theta, row) in self.thetas.iter().zip(&self.responses) {
            for (port, r) in row.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    format_sig(*theta, 6),
                    port + 1,
                    format_sig(linear_to_db(r.norm_sqr()), 6),
                    format_sig(r.arg(), 6)
                )?;
            }
        }
        Ok(())
    }

    pub fn beam_summaries(&self) -> Vec<BeamSummary> {
        (0..self.num_ports()).map(|p| self.beam_summary(p)).collect()
    }

    fn beam_summary(&self, port: usize) -> BeamSummary {
        let gains: Vec<f64> = (0..self.thetas.len()).map(|r| self.gain_dbi(r, port)).collect();
        let (peak_row, &peak) =
            gains.iter().enumerate().fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let level = peak - 3.0;

        let crossing = |a: usize, b: usize| {
            let (ga, gb) = (gains[a], gains[b]);
            let frac = (ga - level) / (ga - gb);
            self.thetas[a] + frac * (self.thetas[b] - self.thetas[a])
        };
        let left = (1..=peak_row).rev().find(|&r| gains[r - 1] < level).map(|r| crossing(r, r - 1));
        let right = (peak_row..self.thetas.len() - 1).find(|&r| gains[r + 1] < level).map(|r| crossing(r, r + 1));

        BeamSummary {
            port: port + 1,
            peak_deg: self.thetas[peak_row],
            peak_gain_dbi: peak,
            hpbw_deg: left.zip(right).map(|(l, r)| r - l),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn isotropic_butler() -> FrontEnd {
        FrontEnd::butler(UlaConfig::isotropic()).unwrap()
    }

    #[test]
    fn steering_broadside_and_endfire() {
        let ula = UlaConfig::isotropic();
        let a0 = steering_vector(&ula, 0.0).unwrap();
        assert!(a0.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let a90 = steering_vector(&ula, 90.0).unwrap();
        for (m, z) in a90.iter().enumerate() {
            let expected = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((z - Complex64::new(expected, 0.0)).norm() < 1e-12, "element {m}: {z}");
        }
    }

    #[test]
    fn steering_phase_at_thirty_degrees() {
        let a = steering_vector(&UlaConfig::isotropic(), 30.0).unwrap();
        assert!((a[1].arg() - PI / 2.0).abs() < 1e-12);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let ula = UlaConfig::isotropic();
        assert!(matches!(steering_vector(&ula, 90.5), Err(Error::Domain(_))));
        assert!(matches!(steering_vector(&ula, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn butler_rejects_non_power_of_two() {
        for n in [0, 3, 12, 17] {
            assert!(matches!(butler_network(n), Err(Error::Domain(_))), "n = {n}");
        }
        assert!(butler_network(8).is_ok());
    }

    #[test]
    fn butler_entries_have_equal_magnitude() {
        let w = butler_network(16).unwrap();
        for z in w.transfer().iter() {
            assert!((z.norm() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn butler_is_unitary() {
        let w = butler_network(16).unwrap();
        let t = w.transfer();
        let gram = t * t.adjoint();
        let err = (gram - DMatrix::<Complex64>::identity(16, 16)).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn port_nine_points_just_off_broadside() {
        // Independent arg-max over a fine grid.
        let front = isotropic_butler();
        let (mut best_theta, mut best) = (0.0, 0.0);
        for i in 0..=180_000 {
            let theta = -90.0 + i as f64 * 0.001;
            let g = beam_port_response(&front, 9, theta).unwrap().norm_sqr();
            if g > best {
                best = g;
                best_theta = theta;
            }
        }
        let expected = (1.0f64 / 16.0).asin().to_degrees();
        assert!((best_theta - expected).abs() < 0.001, "{best_theta} vs {expected}");
        assert!((best_theta - 3.58).abs() < 0.01);
    }

    #[test]
    fn analytic_peak_directions() {
        let front = isotropic_butler();
        for port in 1..=16 {
            let peak = ((2.0 * port as f64 - 17.0) / 16.0).asin().to_degrees();
            let g = beam_port_response(&front, port, peak).unwrap().norm_sqr();
            // Coherent sum of 16 unit phasors scaled by 1/4.
            assert!((g - 16.0).abs() < 1e-9, "port {port}: {g}");
            for delta in [-1e-3, 1e-3] {
                let t = (peak + delta).clamp(-90.0, 90.0);
                assert!(beam_port_response(&front, port, t).unwrap().norm_sqr() < g);
            }
        }
    }

    #[test]
    fn outermost_port_near_sixty_eight_degrees() {
        let peak = (15.0f64 / 16.0).asin().to_degrees();
        assert!((peak - 69.64).abs() < 0.01);
        assert!((peak - 68.0).abs() < 2.0);
    }

    #[test]
    fn broadside_beam_gain_with_quasi_yagi_elements() {
        let front = FrontEnd::butler(UlaConfig::quasi_yagi()).unwrap();
        let peak = (1.0f64 / 16.0).asin().to_degrees();
        let g = linear_to_db(beam_port_response(&front, 9, peak).unwrap().norm_sqr());
        assert!((g - 16.0).abs() < 1.0, "{g}");
    }

    #[test]
    fn beams_are_orthogonal_at_peaks() {
        let front = isotropic_butler();
        for n in 1..=16 {
            let peak = ((2.0 * n as f64 - 17.0) / 16.0).asin().to_degrees();
            let own = beam_port_response(&front, n, peak).unwrap().norm();
            for m in (1..=16).filter(|&m| m != n) {
                let other = beam_port_response(&front, m, peak).unwrap().norm();
                assert!(other < 1e-10 * own, "ports {m} at peak of {n}: {other}");
            }
        }
    }

    #[test]
    fn patch_direct_broadside_is_element_gain() {
        let front = FrontEnd::patch_direct(UlaConfig::patch());
        for port in 1..=16 {
            let r = beam_port_response(&front, port, 0.0).unwrap();
            assert!((r.norm_sqr() - db_to_linear(PATCH_PEAK_DBI)).abs() < 1e-12);
            assert!(r.arg().abs() < 1e-12);
        }
    }

    #[test]
    fn port_responses_match_single_port_evaluation() {
        let front = FrontEnd::butler(UlaConfig::quasi_yagi()).unwrap();
        let all = front.port_responses(-23.7).unwrap();
        for port in 1..=16 {
            let single = beam_port_response(&front, port, -23.7).unwrap();
            assert!((all[port - 1] - single).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_arithmetic() {
        let grid = theta_grid(0.1).unwrap();
        assert_eq!(grid.len(), 1801);
        assert_eq!(grid[0], -90.0);
        assert_eq!(*grid.last().unwrap(), 90.0);
        let front = isotropic_butler();
        let table = pattern_table(&front, &grid).unwrap();
        assert_eq!(table.responses.len(), 1801);
        assert_eq!(table.num_ports(), 16);
    }

    #[test]
    fn pattern_table_rejects_bad_grids() {
        let front = isotropic_butler();
        assert!(matches!(pattern_table(&front, &[]), Err(Error::Domain(_))));
        assert!(matches!(pattern_table(&front, &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(pattern_table(&front, &[0.0, 95.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn port_validation() {
        let front = isotropic_butler();
        assert!(beam_port_response(&front, 0, 0.0).is_err());
        assert!(beam_port_response(&front, 17, 0.0).is_err());
    }

    #[test]
    fn ula_validation() {
        assert!(UlaConfig::new(0, 0.5, ElementPattern::Isotropic, 0.0).is_err());
        assert!(UlaConfig::new(16, 0.0, ElementPattern::Isotropic, 0.0).is_err());
        assert!(UlaConfig::new(16, 0.5, ElementPattern::Isotropic, f64::INFINITY).is_err());
        assert!(UlaConfig::new(16, 0.5, ElementPattern::Patch { exponent: -1.0 }, 6.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let front = isotropic_butler();
        let table = pattern_table(&front, &[0.0, 10.0]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta_deg,port,gain_dbi,phase_rad");
        assert_eq!(lines.len(), 1 + 2 * 16);
        assert!(lines[1].starts_with("0,1,"));
    }
}
