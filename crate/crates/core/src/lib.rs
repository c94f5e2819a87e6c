//! Link-level simulator for a 16x16 mmWave multi-user MIMO downlink with a
//! Butler-matrix multi-beam array, compared against a direct-fed patch array.
//!
//! The pipeline is: array model -> channel synthesis and beam selection ->
//! noisy channel estimation -> precoding (analog, MR, ZF, RZF) -> SINR and
//! spectral efficiency, driven by a seeded Monte Carlo [`experiment`].

pub mod array;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod format;
pub mod metrics;
pub mod precoding;
pub mod rng;
pub mod units;

pub use array::{FrontEnd, FrontEndKind};
pub use channel::LinkBudget;
pub use config::{parse_config, parse_config_str, SimConfig};
pub use error::{Error, Result};
pub use experiment::{run_campaign, ChannelSource, ChannelTrace, Experiment, ScenarioConfig};
pub use precoding::PrecoderKind;
