//! Number formatting shared by reports and plan displays.

/// Rounds to `digits` significant digits (used for emitted JSON and
/// human-readable interval bounds).
pub(crate) fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    (x * factor).round() / factor
}

/// Shortest decimal form of a value rounded to 6 significant digits.
pub(crate) fn format_number(x: f64) -> String {
    let rounded = round_sig(x, 6);
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_six_significant_digits() {
        assert_eq!(round_sig(2.0 / 3.0, 6), 0.666667);
        assert_eq!(round_sig(0.142857142857, 6), 0.142857);
        assert_eq!(round_sig(1234567.0, 6), 1234570.0);
        assert_eq!(round_sig(0.0, 6), 0.0);
        assert_eq!(round_sig(-0.00012345678, 6), -0.000123457);
    }

    #[test]
    fn formatting_is_compact() {
        assert_eq!(format_number(7.0), "7");
        assert_eq!(format_number(2.0 / 3.0), "0.666667");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.0 / 7.0), "0.142857");
    }
}
