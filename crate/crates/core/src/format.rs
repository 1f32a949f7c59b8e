//! Fixed numeric formatting shared by every CSV writer.

/// Significant digits used for all emitted numbers.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `value` with [`SIGNIFICANT_DIGITS`] significant digits.
///
/// Plain decimal notation is used for magnitudes in `[1e-5, 1e9)`, scientific
/// notation otherwise. Trailing zeros are trimmed and negative zero prints as
/// `0`, so equal values always produce identical text.
pub fn sig(value: f64) -> String {
    if value.is_nan() {
        return "NaN".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return "0".to_string();
    }
    // Round through scientific formatting first so the exponent reflects the
    // rounded mantissa (e.g. 9.999999999 -> 1.00000000e1).
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, value))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn formats_common_magnitudes() {
        assert_eq!(sig(1.6), "1.6");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(-0.0), "0");
        assert_eq!(sig(1.0 / 3.0), "0.333333333");
        assert_eq!(sig(9.9999999999), "10");
        assert_eq!(sig(123456789.4), "123456789");
        assert_eq!(sig(1.5e-7), "1.5e-7");
        assert_eq!(sig(2.5e12), "2.5e12");
        assert_eq!(sig(-0.052159), "-0.052159");
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(sig(0.00012345678912), "0.000123456789");
    }
}
