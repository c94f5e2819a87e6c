//! Deterministic line-of-sight beam-port channel, user-side beam selection
//! and the channel-estimation error model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array::FrontEnd;
use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_mw, linear_to_db};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Narrowband link budget of one BS-user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub distance_m: f64,
    /// Cable and other hardware losses, dB (positive is loss).
    pub hardware_loss_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget::reference()
    }
}

impl LinkBudget {
    /// 26 GHz, 20 MHz, 3 dBm, 5 m, -174 dBm/Hz, 9 dB noise figure, no hardware loss.
    pub fn reference() -> Self {
        LinkBudget {
            tx_power_dbm: 3.0,
            frequency_hz: 26e9,
            bandwidth_hz: 20e6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            distance_m: 5.0,
            hardware_loss_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive =
            [("distance_m", self.distance_m), ("bandwidth_hz", self.bandwidth_hz), ("frequency_hz", self.frequency_hz)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        let finite = [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("hardware_loss_db", self.hardware_loss_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }

    /// Linear factor applied for hardware losses (<= 1 for a positive loss).
    pub fn hardware_gain(&self) -> f64 {
        db_to_linear(-self.hardware_loss_db)
    }

    /// `N0 + 10 log10(B) + F`, dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }
}

/// Free-space path gain `(lambda / (4 pi d))^2`, linear.
pub fn path_loss(budget: &LinkBudget) -> f64 {
    let ratio = budget.wavelength_m() / (4.0 * std::f64::consts::PI * budget.distance_m);
    ratio * ratio
}

/// Thermal noise power `N0 B F` in milliwatts.
pub fn noise_power(budget: &LinkBudget) -> f64 {
    dbm_to_mw(budget.noise_power_dbm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    /// Azimuth of the user as seen from the BS array, deg.
    pub theta_bs_deg: f64,
    /// Rotation of the user array toward the BS, deg.
    pub theta_user_deg: f64,
    pub budget: LinkBudget,
}

/// Receive-port x transmit-port channel between two beam-port front ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub DMatrix<Complex64>);

impl ChannelMatrix {
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn rx_ports(&self) -> usize {
        self.0.nrows()
    }

    pub fn tx_ports(&self) -> usize {
        self.0.ncols()
    }
}

pub fn synth_channel(tx: &FrontEnd, rx: &FrontEnd, place: &UserPlacement) -> Result<ChannelMatrix> {
    synth_channel_with_rx_gain(tx, rx, place, None)
}

/// Like [`synth_channel`], optionally rescaling the receive responses so the
/// strongest user beam has exactly `fixed_rx_gain_dbi` (relative port gains
/// and phases are kept).
pub fn synth_channel_with_rx_gain(
    tx: &FrontEnd,
    rx: &FrontEnd,
    place: &UserPlacement,
    fixed_rx_gain_dbi: Option<f64>,
) -> Result<ChannelMatrix> {
    place.budget.validate()?;
    let rx_resp = receive_responses(rx, place.theta_user_deg, fixed_rx_gain_dbi)?;
    let tx_resp = tx.port_responses(place.theta_bs_deg)?;
    let scale = (path_loss(&place.budget) * place.budget.hardware_gain()).sqrt();
    Ok(ChannelMatrix(&rx_resp * tx_resp.transpose() * Complex64::new(scale, 0.0)))
}

pub(crate) fn receive_responses(
    rx: &FrontEnd,
    theta_user_deg: f64,
    fixed_rx_gain_dbi: Option<f64>,
) -> Result<DVector<Complex64>> {
    let resp = rx.port_responses(theta_user_deg)?;
    let Some(gain_dbi) = fixed_rx_gain_dbi else {
        return Ok(resp);
    };
    let strongest = resp.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if strongest == 0.0 {
        return Err(Error::DegenerateChannel(format!("receive array has no gain toward {theta_user_deg} deg")));
    }
    let rescale = (db_to_linear(gain_dbi) / strongest).sqrt();
    Ok(resp * Complex64::new(rescale, 0.0))
}

/// One-hot RF switch state at the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamSelector {
    port: usize,
    num_ports: usize,
}

impl BeamSelector {
    /// Selector for 0-based `port` out of `num_ports`.
    pub fn new(port: usize, num_ports: usize) -> Result<Self> {
        if port >= num_ports {
            return Err(Error::Domain(format!("port index {port} outside 0..{num_ports}")));
        }
        Ok(BeamSelector { port, num_ports })
    }

    /// 0-based selected port.
    pub fn port(&self) -> usize {
        self.port
    }

    pub fn one_hot(&self) -> DVector<f64> {
        DVector::from_fn(self.num_ports, |i, _| if i == self.port { 1.0 } else { 0.0 })
    }
}

/// Selects the receive beam with the highest received power; ties go to
/// the lowest port.
pub fn select_beam(h: &ChannelMatrix) -> Result<BeamSelector> {
    let powers = h.0.row_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>());
    let (port, best) = powers.enumerate().fold((0, 0.0), |best, (i, p)| if p > best.1 { (i, p) } else { best });
    if best <= 0.0 || !best.is_finite() {
        return Err(Error::DegenerateChannel("no receive beam carries power".into()));
    }
    BeamSelector::new(port, h.rx_ports())
}

/// Transmit-port channel seen through a single user beam.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub vector: DVector<Complex64>,
    /// 0-based receive port the vector was taken from.
    pub rx_port: usize,
}

impl EffectiveChannel {
    pub fn power(&self) -> f64 {
        self.vector.norm_squared()
    }
}

/// The selected row of `h`, as a column.
///
/// # Panics
/// If the selector does not match the channel's receive dimension.
pub fn effective_channel(h: &ChannelMatrix, w: &BeamSelector) -> EffectiveChannel {
    assert_eq!(w.num_ports, h.rx_ports(), "selector/channel dimension mismatch");
    EffectiveChannel { vector: h.0.row(w.port).transpose(), rx_port: w.port }
}

/// Per-entry complex variance of the estimation error, `scale * N / p_tx`.
pub fn estimation_noise_variance(budget: &LinkBudget, scale: f64) -> f64 {
    scale * noise_power(budget) / budget.tx_power_mw()
}

/// Adds i.i.d. circularly-symmetric Gaussian error with the link budget's
/// estimation variance to every port.
pub fn estimate_channel<R: Rng + ?Sized>(h: &EffectiveChannel, budget: &LinkBudget, rng: &mut R) -> EffectiveChannel {
    estimate_channel_with_variance(h, estimation_noise_variance(budget, 1.0), rng)
}

pub fn estimate_channel_with_variance<R: Rng + ?Sized>(
    h: &EffectiveChannel,
    variance: f64,
    rng: &mut R,
) -> EffectiveChannel {
    let sigma = (variance / 2.0).sqrt();
    let vector = h.vector.map(|z| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        z + Complex64::new(re, im) * sigma
    });
    EffectiveChannel { vector, rx_port: h.rx_port }
}

/// Path gain in dB, handy for reports.
pub fn path_loss_db(budget: &LinkBudget) -> f64 {
    linear_to_db(path_loss(budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{beam_port_response, FrontEnd, UlaConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn butler() -> FrontEnd {
        FrontEnd::butler(UlaConfig::quasi_yagi()).unwrap()
    }

    fn placement(theta_bs: f64) -> UserPlacement {
        UserPlacement { theta_bs_deg: theta_bs, theta_user_deg: 4.0, budget: LinkBudget::reference() }
    }

    #[test]
    fn friis_at_twenty_six_ghz() {
        // Independent evaluation: 20 log10(c / (4 pi d f)).
        let expected = 20.0 * (299_792_458.0 / (4.0 * std::f64::consts::PI * 5.0 * 26e9)).log10();
        assert!((path_loss_db(&LinkBudget::reference()) - expected).abs() < 1e-9);
        assert!((expected - -74.7).abs() < 0.05);
    }

    #[test]
    fn path_loss_inverse_square_and_unit_distance() {
        let b = LinkBudget::reference();
        let far = LinkBudget { distance_m: 10.0, ..b };
        assert!((path_loss(&far) / path_loss(&b) - 0.25).abs() < 1e-15);
        let unit = LinkBudget { distance_m: b.wavelength_m() / (4.0 * std::f64::consts::PI), ..b };
        assert!((path_loss(&unit) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_power_values() {
        let b = LinkBudget::reference();
        assert!((b.noise_power_dbm() - -92.0).abs() < 0.05);
        let one_hz = LinkBudget { bandwidth_hz: 1.0, noise_figure_db: 0.0, ..b };
        assert!((one_hz.noise_power_dbm() - -174.0).abs() < 1e-12);
        let wide = LinkBudget { bandwidth_hz: 200e6, ..b };
        assert!((wide.noise_power_dbm() - b.noise_power_dbm() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        let b = LinkBudget::reference();
        assert!(LinkBudget { distance_m: 0.0, ..b }.validate().is_err());
        assert!(LinkBudget { bandwidth_hz: -1.0, ..b }.validate().is_err());
        assert!(LinkBudget { tx_power_dbm: f64::NAN, ..b }.validate().is_err());
    }

    #[test]
    fn channel_is_rank_one() {
        let h = synth_channel(&butler(), &butler(), &placement(-31.0)).unwrap();
        let sv = h.0.clone().singular_values();
        assert!(sv[1] < 1e-9 * sv[0], "{sv}");
    }

    #[test]
    fn entry_magnitudes_factorize() {
        let (tx, rx) = (butler(), butler());
        let place = placement(17.3);
        let h = synth_channel(&tx, &rx, &place).unwrap();
        let pl = path_loss(&place.budget);
        for n in 0..16 {
            let g_rx = beam_port_response(&rx, n + 1, 4.0).unwrap().norm_sqr();
            for m in 0..16 {
                let g_tx = beam_port_response(&tx, m + 1, 17.3).unwrap().norm_sqr();
                let expected = g_rx * g_tx * pl;
                let got = h.0[(n, m)].norm_sqr();
                assert!((got - expected).abs() <= 1e-9 * expected.max(1e-300), "({n},{m})");
            }
        }
    }

    #[test]
    fn dominant_entry_link_budget() {
        let peak = (1.0f64 / 16.0).asin().to_degrees();
        let h = synth_channel(&butler(), &butler(), &placement(peak)).unwrap();
        let best = h.0.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let expected_db = 16.0 + 16.0 - 74.7;
        assert!((linear_to_db(best) - expected_db).abs() < 1.0, "{}", linear_to_db(best));
    }

    #[test]
    fn hardware_loss_scales_power() {
        let place = placement(10.0);
        let lossy = UserPlacement { budget: LinkBudget { hardware_loss_db: 3.0, ..place.budget }, ..place };
        let a = synth_channel(&butler(), &butler(), &place).unwrap();
        let b = synth_channel(&butler(), &butler(), &lossy).unwrap();
        let ratio = b.0[(8, 3)].norm_sqr() / a.0[(8, 3)].norm_sqr();
        assert!((ratio - db_to_linear(-3.0)).abs() < 1e-12);
    }

    #[test]
    fn fixed_rx_gain_sets_selected_beam() {
        let (tx, rx) = (butler(), butler());
        let place = placement(0.0);
        let h = synth_channel_with_rx_gain(&tx, &rx, &place, Some(16.0)).unwrap();
        let w = select_beam(&h).unwrap();
        let g_tx: f64 = tx.port_responses(0.0).unwrap().iter().map(|z| z.norm_sqr()).sum();
        let row: f64 = h.0.row(w.port()).iter().map(|z| z.norm_sqr()).sum();
        let g_rx = row / (g_tx * path_loss(&place.budget));
        assert!((linear_to_db(g_rx) - 16.0).abs() < 1e-9);
    }

    #[test]
    fn select_single_nonzero_row() {
        let mut m = DMatrix::zeros(16, 16);
        m[(6, 2)] = Complex64::new(0.0, 1e-5);
        let w = select_beam(&ChannelMatrix(m)).unwrap();
        assert_eq!(w.port(), 6);
        assert_eq!(w.one_hot().sum(), 1.0);
        assert_eq!(w.one_hot()[6], 1.0);
    }

    #[test]
    fn select_ties_go_low() {
        let mut m = DMatrix::zeros(16, 16);
        m[(3, 0)] = Complex64::new(1.0, 0.0);
        m[(11, 5)] = Complex64::new(0.0, -1.0);
        assert_eq!(select_beam(&ChannelMatrix(m)).unwrap().port(), 3);
    }

    #[test]
    fn select_rejects_zero_channel() {
        let m = ChannelMatrix(DMatrix::zeros(16, 16));
        assert!(matches!(select_beam(&m), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn select_matches_exhaustive_scan_and_nearest_peak() {
        let h = synth_channel(&butler(), &butler(), &placement(-12.0)).unwrap();
        let w = select_beam(&h).unwrap();
        let mut best = (0, -1.0);
        for n in 0..16 {
            let p: f64 = (0..16).map(|m| h.0[(n, m)].norm_sqr()).sum();
            if p > best.1 {
                best = (n, p);
            }
        }
        assert_eq!(w.port(), best.0);
        // Peaks at asin((2k-17)/16); port 9 (index 8) sits at 3.58 deg, nearest to 4 deg.
        assert_eq!(w.port(), 8);
    }

    #[test]
    fn selection_is_scale_invariant() {
        let h = synth_channel(&butler(), &butler(), &placement(40.0)).unwrap();
        let scaled = ChannelMatrix(h.0.map(|z| z * 1e7));
        assert_eq!(select_beam(&h).unwrap(), select_beam(&scaled).unwrap());
    }

    #[test]
    fn effective_channel_is_selected_row() {
        let mut m = DMatrix::zeros(16, 16);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        let h = ChannelMatrix(m);
        let e = effective_channel(&h, &BeamSelector::new(0, 16).unwrap());
        assert_eq!(e.vector[0], Complex64::new(1.0, 0.0));
        assert!(e.vector.iter().skip(1).all(|z| *z == Complex64::new(0.0, 0.0)));

        let h = synth_channel(&butler(), &butler(), &placement(25.0)).unwrap();
        let w = select_beam(&h).unwrap();
        let e = effective_channel(&h, &w);
        let mut embedded = DMatrix::zeros(16, 16);
        embedded.set_row(w.port(), &e.vector.transpose());
        assert_eq!(embedded.row(w.port()), h.0.row(w.port()));
        let row_power: f64 = (0..16).map(|m| h.0[(w.port(), m)].norm_sqr()).sum();
        assert!((e.power() - row_power).abs() <= 1e-12 * row_power);
    }

    #[test]
    fn zero_noise_estimate_is_exact() {
        let h = synth_channel(&butler(), &butler(), &placement(5.0)).unwrap();
        let e = effective_channel(&h, &select_beam(&h).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(estimate_channel_with_variance(&e, 0.0, &mut rng), e);
    }

    #[test]
    fn estimation_noise_statistics() {
        let e = EffectiveChannel { vector: DVector::zeros(16), rx_port: 0 };
        let var = 2.5e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000 / 16 + 1;
        let (mut sum, mut sq, mut count) = (Complex64::new(0.0, 0.0), 0.0, 0usize);
        for _ in 0..draws {
            let est = estimate_channel_with_variance(&e, var, &mut rng);
            for z in est.vector.iter() {
                sum += z;
                sq += z.norm_sqr();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let sample_var = sq / count as f64 - mean.norm_sqr();
        assert!((sample_var / var - 1.0).abs() < 0.02, "{sample_var}");
        assert!(mean.norm() < 3.0 * var.sqrt() / (count as f64).sqrt());
    }

    #[test]
    fn estimate_is_reproducible_for_a_seed() {
        let h = synth_channel(&butler(), &butler(), &placement(-50.0)).unwrap();
        let e = effective_channel(&h, &select_beam(&h).unwrap());
        let b = LinkBudget::reference();
        let a1 = estimate_channel(&e, &b, &mut ChaCha8Rng::seed_from_u64(99));
        let a2 = estimate_channel(&e, &b, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a1, a2);
        assert_ne!(a1, e);
    }
}
