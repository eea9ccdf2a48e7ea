/// Rounds `v` to `decimals` places, ties to even.
pub fn round_half_even(v: f64, decimals: u32) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = v * scale;
    // Values this large have no fractional digits left to round.
    if scaled.abs() >= 2f64.powi(52) {
        return v;
    }
    let r = scaled.round_ties_even() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest decimal text that parses back to exactly `v`. Never uses
/// exponent notation and never emits `-0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    let s = format!("{v}");
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => match s.strip_prefix("-0.") {
            Some(rest) => format!("-.{rest}"),
            None => s,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_half_even(5.0000001, 3), 5.0);
        assert_eq!(round_half_even(2.5, 0), 2.0);
        assert_eq!(round_half_even(3.5, 0), 4.0);
        assert_eq!(round_half_even(-0.0001, 3), 0.0);
        assert_eq!(round_half_even(1.23456, 3), 1.235);
    }

    #[test]
    fn formatting_is_compact_and_exact() {
        assert_eq!(format_number(5.0), "5");
        assert_eq!(format_number(0.5), ".5");
        assert_eq!(format_number(-0.25), "-.25");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1e-7), ".0000001");
        for v in [0.1, 1.0 / 3.0, 123456.789, -7.125e-3] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
    }
}
