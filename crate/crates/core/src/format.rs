//! Locale-independent numeric formatting for CSV output.

/// Formats `x` with `digits` significant digits, `%g` style: fixed notation
/// for decimal exponents in `[-5, digits)`, scientific otherwise, trailing
/// zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn g_style() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(-90.0, 6), "-90");
        assert_eq!(format_sig(1.23456789, 6), "1.23457");
        assert_eq!(format_sig(16.0412, 6), "16.0412");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(999999.7, 6), "1e6");
        assert_eq!(format_sig(1.5e-7, 6), "1.5e-7");
        assert_eq!(format_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(format_sig(-300.0, 6), "-300");
        assert_eq!(format_sig(f64::NAN, 6), "nan");
    }
}
