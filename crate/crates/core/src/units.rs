//! Decibel helpers.

/// Linear values below this floor render as -300 dB instead of `-inf`.
const LINEAR_FLOOR: f64 = 1e-30;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.max(LINEAR_FLOOR).log10()
}

/// dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for db in [-174.0, -92.0, 0.0, 3.0, 16.0] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-12);
        }
        assert_eq!(linear_to_db(0.0), -300.0);
    }
}
