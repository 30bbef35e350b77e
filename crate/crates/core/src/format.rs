//! Shared helpers for the plain-text CSV formats written between stages.

use crate::{Error, Result};

/// Formats a float with 17 significant digits so values round-trip exactly.
pub fn float(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// Joins a label and a numeric row into one CSV line (without newline).
pub fn row<I: IntoIterator<Item = f64>>(label: &str, values: I) -> String {
    let mut out = String::from(label);
    for v in values {
        out.push(',');
        out.push_str(&float(v));
    }
    out
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid number {:?}", field.trim())))
}

pub(crate) fn parse_i64(field: &str, line: usize) -> Result<i64> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(line, format!("invalid integer {:?}", field.trim())))
}

/// Iterates non-blank lines with their 1-based line numbers.
pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(float(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }
}
