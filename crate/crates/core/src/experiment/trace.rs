//! Recorded per-angle channel vectors.
//!
//! CSV layout, one row per port:
//!
//! ```text
//! angle_deg,estimation_idx,port,re,im
//! -12.5,0,1,1.2e-5,-3.1e-6
//! ```
//!
//! Ports are 1-based. Every angle must carry estimations `0..n` with all
//! ports present.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use super::{ArraySettings, ScenarioConfig};
use crate::array::NUM_PORTS;
use crate::channel::{
    effective_channel, estimate_channel_with_variance, select_beam, synth_channel_with_rx_gain, UserPlacement,
};
use crate::error::{Error, Result};
use crate::rng::{StreamKey, StreamScope};

pub const TRACE_HEADER: [&str; 5] = ["angle_deg", "estimation_idx", "port", "re", "im"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    angles: Vec<f64>,
    estimations: Vec<Vec<DVector<Complex64>>>,
}

impl ChannelTrace {
    pub fn new(angles: Vec<f64>, estimations: Vec<Vec<DVector<Complex64>>>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Schema("trace has no angles".into()));
        }
        if angles.len() != estimations.len() {
            return Err(Error::Schema(format!("{} angles but {} estimation lists", angles.len(), estimations.len())));
        }
        for (angle, list) in angles.iter().zip(&estimations) {
            if !angle.is_finite() || angle.abs() > 90.0 {
                return Err(Error::Schema(format!("angle {angle} outside [-90, 90]")));
            }
            if list.is_empty() {
                return Err(Error::Schema(format!("angle {angle} has no estimations")));
            }
            if let Some(v) = list.iter().find(|v| v.len() != NUM_PORTS) {
                return Err(Error::Schema(format!(
                    "angle {angle}: vector of length {}, expected {NUM_PORTS}",
                    v.len()
                )));
            }
        }
        Ok(ChannelTrace { angles, estimations })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    /// Recorded vectors of angle `index`.
    pub fn estimations(&self, index: usize) -> &[DVector<Complex64>] {
        &self.estimations[index]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for (angle, list) in self.angles.iter().zip(&self.estimations) {
            for (idx, vector) in list.iter().enumerate() {
                for (port, z) in vector.iter().enumerate() {
                    w.write_record([
                        angle.to_string(),
                        idx.to_string(),
                        (port + 1).to_string(),
                        z.re.to_string(),
                        z.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ChannelTrace> {
    parse_trace(File::open(path)?)
}

type PortSlots = [Option<Complex64>; NUM_PORTS];

pub fn parse_trace<R: Read>(input: R) -> Result<ChannelTrace> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Parse { line: 1, message: "empty trace".into() }),
        Some(rec) => rec.map_err(csv_parse_error)?,
    };
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", TRACE_HEADER.join(",")) });
    }

    // Keyed by the angle's bit pattern; insertion order is kept separately.
    let mut order: Vec<f64> = Vec::new();
    let mut by_angle: BTreeMap<u64, BTreeMap<usize, PortSlots>> = BTreeMap::new();

    for rec in records {
        let rec = rec.map_err(csv_parse_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != TRACE_HEADER.len() {
            return Err(Error::Parse { line, message: format!("expected 5 fields, found {}", rec.len()) });
        }
        let angle: f64 = field(&rec[0], "angle_deg", line)?;
        let idx: usize = field(&rec[1], "estimation_idx", line)?;
        let port: usize = field(&rec[2], "port", line)?;
        let re: f64 = field(&rec[3], "re", line)?;
        let im: f64 = field(&rec[4], "im", line)?;

        if !angle.is_finite() || angle.abs() > 90.0 {
            return Err(Error::Parse { line, message: format!("angle_deg {angle} outside [-90, 90]") });
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::Parse { line, message: "non-finite channel entry".into() });
        }
        if !(1..=NUM_PORTS).contains(&port) {
            return Err(Error::Schema(format!(
                "line {line}: port {port} outside 1..={NUM_PORTS} (vectors must have length {NUM_PORTS})"
            )));
        }

        let key = (angle + 0.0).to_bits();
        let estimations = by_angle.entry(key).or_insert_with(|| {
            order.push(angle + 0.0);
            BTreeMap::new()
        });
        let slots = estimations.entry(idx).or_insert([None; NUM_PORTS]);
        if slots[port - 1].replace(Complex64::new(re, im)).is_some() {
            return Err(Error::Schema(format!(
                "line {line}: duplicate entry for angle {angle}, estimation {idx}, port {port}"
            )));
        }
    }

    if order.is_empty() {
        return Err(Error::Schema("trace has no data rows".into()));
    }

    let mut estimations = Vec::with_capacity(order.len());
    for &angle in &order {
        let slots_by_idx = &by_angle[&angle.to_bits()];
        let mut list = Vec::with_capacity(slots_by_idx.len());
        for (expected, (&idx, slots)) in slots_by_idx.iter().enumerate() {
            if idx != expected {
                return Err(Error::Schema(format!("angle {angle}: estimation {expected} missing")));
            }
            let present = slots.iter().filter(|s| s.is_some()).count();
            if present != NUM_PORTS {
                return Err(Error::Schema(format!(
                    "angle {angle}, estimation {idx}: vector has {present} ports, expected {NUM_PORTS}"
                )));
            }
            list.push(DVector::from_iterator(NUM_PORTS, slots.iter().map(|s| s.unwrap_or_default())));
        }
        estimations.push(list);
    }
    ChannelTrace::new(order, estimations)
}

fn field<T: std::str::FromStr>(text: &str, name: &str, line: u64) -> Result<T> {
    text.parse().map_err(|_| Error::Parse { line, message: format!("invalid {name} value {text:?}") })
}

fn csv_parse_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse { line, message: err.to_string() }
}

/// Builds a stand-in measurement trace from the synthetic channel model:
/// `num_angles` uniform angles in the configured range, each with
/// `estimations` noisy observations of the selected-beam channel.
pub fn synthesize_trace(
    cfg: &ScenarioConfig,
    num_angles: usize,
    estimations: usize,
    noise_scale: f64,
) -> Result<ChannelTrace> {
    if num_angles == 0 || estimations == 0 {
        return Err(Error::Domain("trace needs at least one angle and one estimation".into()));
    }
    let arrays: &ArraySettings = &cfg.arrays;
    let tx = arrays.transmitter(cfg.frontend)?;
    let rx = arrays.receiver()?;
    let variance = crate::channel::estimation_noise_variance(&cfg.budget, noise_scale);
    let key = StreamKey::new(cfg.seed, StreamScope::Trace);

    let mut angle_rng = key.rng();
    let range = cfg.theta_bs_range_deg;
    let angles: Vec<f64> = (0..num_angles).map(|_| angle_rng.random_range(-range..=range)).collect();

    let mut lists = Vec::with_capacity(num_angles);
    for (i, &theta) in angles.iter().enumerate() {
        let place = UserPlacement { theta_bs_deg: theta, theta_user_deg: cfg.theta_user_deg, budget: cfg.budget };
        let h = synth_channel_with_rx_gain(&tx, &rx, &place, cfg.fixed_rx_gain_dbi)?;
        let truth = effective_channel(&h, &select_beam(&h)?);
        let list = (0..estimations)
            .map(|e| estimate_channel_with_variance(&truth, variance, &mut key.user(i).round(e + 1).rng()).vector)
            .collect();
        lists.push(list);
    }
    ChannelTrace::new(angles, lists)
}
