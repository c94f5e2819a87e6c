//! CSV writers for per-realization results and aggregate rows.

use std::io::Write;

use super::{AggregateRow, RealizationResult};
use crate::error::Result;
use crate::format::format_sig;

pub const RESULTS_HEADER: [&str; 8] =
    ["K", "frontend", "precoder", "realization", "user", "theta_bs_deg", "se_bpshz", "sum_se_bpshz"];

pub const AGGREGATE_HEADER: [&str; 7] = ["K", "frontend", "precoder", "se_median", "se_q1", "se_q3", "sum_se_mean"];

const DIGITS: usize = 6;

/// Streams one row per user of each result.
pub struct ResultsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(RESULTS_HEADER)?;
        Ok(ResultsWriter { inner })
    }

    pub fn write(&mut self, result: &RealizationResult) -> Result<()> {
        let sum = format_sig(result.sum_se, DIGITS);
        for (user, (se, theta)) in result.per_user_se.iter().zip(&result.theta_bs_deg).enumerate() {
            self.inner.write_record([
                result.users.to_string(),
                result.frontend.to_string(),
                result.precoder.to_string(),
                result.realization.to_string(),
                user.to_string(),
                format_sig(*theta, DIGITS),
                format_sig(*se, DIGITS),
                sum.clone(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

pub fn write_aggregates<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for row in rows {
        let s = &row.individual_se;
        w.write_record([
            row.users.to_string(),
            row.frontend.to_string(),
            row.precoder.to_string(),
            format_sig(s.median, DIGITS),
            format_sig(s.lower_quartile, DIGITS),
            format_sig(s.upper_quartile, DIGITS),
            format_sig(row.sum_se_mean, DIGITS),
        ])?;
    }
    w.flush()?;
    Ok(())
}
