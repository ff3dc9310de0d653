//! Flat `key = value` text format shared by couplings, parameter files and
//! experiment specs. Blank lines and `#` comments are ignored.

use crate::error::{Error, Result};

/// Parses `key = value` lines, preserving order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("`{key}`: not a number: `{value}`")))
}

pub fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("`{key}`: not a count: `{value}`")))
}

pub fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("`{key}`: not an integer: `{value}`")))
}

/// Formats a float in plain decimal notation with 17 significant digits.
///
/// Parsing the output with `str::parse::<f64>` recovers the value exactly.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.0000000000000000".to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut s = String::with_capacity(digits.len() + 8);
    if negative {
        s.push('-');
    }
    if exp < 0 {
        s.push_str("0.");
        for _ in 0..(-exp - 1) {
            s.push('0');
        }
        s.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            s.push_str(&digits);
            for _ in digits.len()..int_len {
                s.push('0');
            }
            s.push_str(".0");
        } else {
            s.push_str(&digits[..int_len]);
            s.push('.');
            s.push_str(&digits[int_len..]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_blanks() {
        let kv = parse("# header\n\na = 1\n b=2.5 # trailing\n").unwrap();
        assert_eq!(kv, vec![("a".into(), "1".into()), ("b".into(), "2.5".into())]);
    }

    #[test]
    fn rejects_missing_equals() {
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn decimal_formatting() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000");
        assert_eq!(fmt_f64(-0.25), "-0.25000000000000000");
        assert_eq!(fmt_f64(1.5e20), "150000000000000000000.0");
        assert!(!fmt_f64(1e-7).contains('e'));
    }

    proptest! {
        #[test]
        fn decimal_round_trip(x in proptest::num::f64::NORMAL) {
            let s = fmt_f64(x);
            prop_assert!(!s.contains('e'));
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
