//! JSON simulation config.
//!
//! All keys are optional and flat; unknown keys are rejected. An empty file
//! yields the reference setup.
//!
//! ```json
//! { "users": [1, 4, 8, 16], "realizations": 200, "seed": 7, "frontends": ["butler"] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{FrontEndKind, NUM_PORTS, PATCH_EXPONENT, PATCH_PEAK_DBI, QUASI_YAGI_EXPONENT, QUASI_YAGI_PEAK_DBI};
use crate::channel::LinkBudget;
use crate::error::{Error, Result};
use crate::experiment::{ArraySettings, Mode, ScenarioConfig};
use crate::precoding::PrecoderKind;

/// `users` accepts a single count or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UserSweep {
    One(usize),
    Many(Vec<usize>),
}

impl UserSweep {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            UserSweep::One(k) => vec![*k],
            UserSweep::Many(ks) => ks.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub users: UserSweep,
    pub theta_bs_range_deg: f64,
    pub theta_user_deg: f64,
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub distance_m: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub hardware_loss_db: f64,
    pub tau_ratio: f64,
    pub realizations: usize,
    pub estimations: usize,
    pub seed: u64,
    pub frontends: Vec<FrontEndKind>,
    pub precoders: Vec<PrecoderKind>,
    pub estimation_noise_scale: f64,
    pub downlink_noise_dbm: Option<f64>,
    pub fixed_rx_gain_dbi: Option<f64>,
    pub total_power_constraint: bool,
    pub element_spacing_wl: f64,
    pub quasi_yagi_peak_dbi: f64,
    pub quasi_yagi_exponent: f64,
    pub patch_peak_dbi: f64,
    pub patch_exponent: f64,
    pub mode: Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        let budget = LinkBudget::reference();
        SimConfig {
            users: UserSweep::Many((1..=NUM_PORTS).collect()),
            theta_bs_range_deg: 60.0,
            theta_user_deg: 4.0,
            frequency_hz: budget.frequency_hz,
            bandwidth_hz: budget.bandwidth_hz,
            tx_power_dbm: budget.tx_power_dbm,
            distance_m: budget.distance_m,
            noise_density_dbm_hz: budget.noise_density_dbm_hz,
            noise_figure_db: budget.noise_figure_db,
            hardware_loss_db: budget.hardware_loss_db,
            tau_ratio: 1.0,
            realizations: 1000,
            estimations: 100,
            seed: 0,
            frontends: vec![FrontEndKind::MultiBeamButler, FrontEndKind::PatchDirect],
            precoders: PrecoderKind::ALL.to_vec(),
            estimation_noise_scale: 1.0,
            downlink_noise_dbm: None,
            fixed_rx_gain_dbi: None,
            total_power_constraint: false,
            element_spacing_wl: 0.5,
            quasi_yagi_peak_dbi: QUASI_YAGI_PEAK_DBI,
            quasi_yagi_exponent: QUASI_YAGI_EXPONENT,
            patch_peak_dbi: PATCH_PEAK_DBI,
            patch_exponent: PATCH_EXPONENT,
            mode: Mode::Synthesize,
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    if text.trim().is_empty() {
        return Ok(SimConfig::default());
    }
    let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let users = self.users.to_vec();
        check(!users.is_empty(), || "users must not be empty".into())?;
        for k in users {
            check((1..=NUM_PORTS).contains(&k), || format!("users = {k} violates 1 <= users <= {NUM_PORTS}"))?;
        }
        let r = self.theta_bs_range_deg;
        check((0.0..=90.0).contains(&r), || format!("theta_bs_range_deg = {r} violates 0 <= value <= 90"))?;
        let t = self.theta_user_deg;
        check((-90.0..=90.0).contains(&t), || format!("theta_user_deg = {t} violates -90 <= value <= 90"))?;
        for (name, v) in [
            ("frequency_hz", self.frequency_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("distance_m", self.distance_m),
            ("element_spacing_wl", self.element_spacing_wl),
        ] {
            check(v.is_finite() && v > 0.0, || format!("{name} = {v} violates value > 0"))?;
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("hardware_loss_db", self.hardware_loss_db),
            ("quasi_yagi_peak_dbi", self.quasi_yagi_peak_dbi),
            ("patch_peak_dbi", self.patch_peak_dbi),
        ] {
            check(v.is_finite(), || format!("{name} = {v} must be finite"))?;
        }
        for (name, v) in [
            ("quasi_yagi_exponent", self.quasi_yagi_exponent),
            ("patch_exponent", self.patch_exponent),
            ("estimation_noise_scale", self.estimation_noise_scale),
        ] {
            check(v.is_finite() && v >= 0.0, || format!("{name} = {v} violates value >= 0"))?;
        }
        let tau = self.tau_ratio;
        check(tau > 0.0 && tau <= 1.0, || format!("tau_ratio = {tau} violates 0 < value <= 1"))?;
        check(self.realizations >= 1, || "realizations = 0 violates value >= 1".into())?;
        check(self.estimations >= 1, || "estimations = 0 violates value >= 1".into())?;
        check(!self.frontends.is_empty(), || "frontends must not be empty".into())?;
        check(!self.precoders.is_empty(), || "precoders must not be empty".into())?;
        for (name, v) in
            [("downlink_noise_dbm", self.downlink_noise_dbm), ("fixed_rx_gain_dbi", self.fixed_rx_gain_dbi)]
        {
            if let Some(v) = v {
                check(v.is_finite(), || format!("{name} = {v} must be finite"))?;
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: self.tx_power_dbm,
            frequency_hz: self.frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            noise_density_dbm_hz: self.noise_density_dbm_hz,
            noise_figure_db: self.noise_figure_db,
            distance_m: self.distance_m,
            hardware_loss_db: self.hardware_loss_db,
        }
    }

    pub fn arrays(&self) -> ArraySettings {
        ArraySettings {
            spacing_wl: self.element_spacing_wl,
            quasi_yagi_peak_dbi: self.quasi_yagi_peak_dbi,
            quasi_yagi_exponent: self.quasi_yagi_exponent,
            patch_peak_dbi: self.patch_peak_dbi,
            patch_exponent: self.patch_exponent,
        }
    }

    /// One scenario per (K, frontend), K-major.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for users in self.users.to_vec() {
            for &frontend in &self.frontends {
                out.push(ScenarioConfig {
                    users,
                    theta_bs_range_deg: self.theta_bs_range_deg,
                    theta_user_deg: self.theta_user_deg,
                    realizations: self.realizations,
                    estimations: self.estimations,
                    seed: self.seed,
                    frontend,
                    precoders: self.precoders.clone(),
                    budget: self.budget(),
                    mode: self.mode,
                    tau_ratio: self.tau_ratio,
                    estimation_noise_scale: self.estimation_noise_scale,
                    downlink_noise_dbm: self.downlink_noise_dbm,
                    fixed_rx_gain_dbi: self.fixed_rx_gain_dbi,
                    total_power_constraint: self.total_power_constraint,
                    arrays: self.arrays(),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_reference_setup() {
        let cfg = parse_config_str(" \n").unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!(cfg.scenarios().len(), 32);
        assert_eq!(cfg.budget(), LinkBudget::reference());
        assert_eq!(parse_config_str("{}").unwrap(), cfg);
    }

    #[test]
    fn overrides_and_single_user_count() {
        let cfg =
            parse_config_str(r#"{"users": 4, "seed": 9, "frontends": ["patch"], "precoders": ["zf", "rzf"]}"#).unwrap();
        let s = cfg.scenarios();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].users, s[0].seed, s[0].frontend), (4, 9, FrontEndKind::PatchDirect));
        assert_eq!(s[0].precoders, vec![PrecoderKind::Zf, PrecoderKind::Rzf]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_str(r#"{"realisations": 5}"#).unwrap_err().to_string();
        assert!(err.contains("realisations"), "{err}");
    }

    #[test]
    fn range_errors_state_the_bound() {
        let err = parse_config_str(r#"{"users": [2, 17]}"#).unwrap_err().to_string();
        assert!(err.contains("users = 17") && err.contains("<= 16"), "{err}");
        let err = parse_config_str(r#"{"tau_ratio": 1.5}"#).unwrap_err().to_string();
        assert!(err.contains("0 < value <= 1"), "{err}");
        let err = parse_config_str(r#"{"distance_m": -1}"#).unwrap_err().to_string();
        assert!(err.contains("distance_m"), "{err}");
        assert!(parse_config_str(r#"{"users": -1}"#).is_err());
        assert!(parse_config_str("[1, 2").is_err());
    }

    #[test]
    fn serialized_form_parses_back() {
        let cfg = SimConfig { downlink_noise_dbm: Some(-90.0), mode: Mode::Replay, ..SimConfig::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }
}
