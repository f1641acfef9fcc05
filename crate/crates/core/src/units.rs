//! Parsing of dimensioned quantities such as `"185 mT"` or `"3.651 GHz"`.
//!
//! Every quantity is normalized to SI on the way in. Bare numbers are
//! rejected for dimensioned values so that a missing unit cannot silently
//! change the magnitude of an input by a factor of 1000.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    MagneticField,
    Frequency,
    Temperature,
    Time,
    Angle,
    /// Logarithmic gain or loss, dB.
    Gain,
    /// Absolute power on a log scale, dBm.
    PowerDbm,
    /// Linewidth slope, Hz/T.
    FrequencyPerField,
    /// Direct-process coefficient, Hz/T^5.
    FrequencyPerField5,
    /// Field per root power, T/√W.
    FieldPerRootPower,
}

impl Dimension {
    pub fn si_unit(self) -> &'static str {
        match self {
            Dimension::MagneticField => "T",
            Dimension::Frequency => "Hz",
            Dimension::Temperature => "K",
            Dimension::Time => "s",
            Dimension::Angle => "deg",
            Dimension::Gain => "dB",
            Dimension::PowerDbm => "dBm",
            Dimension::FrequencyPerField => "Hz/T",
            Dimension::FrequencyPerField5 => "Hz/T^5",
            Dimension::FieldPerRootPower => "T/sqrt(W)",
        }
    }

    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::MagneticField => &[
                ("T", 1.0),
                ("mT", 1e-3),
                ("uT", 1e-6),
                ("µT", 1e-6),
                ("nT", 1e-9),
                ("G", 1e-4),
                ("mG", 1e-7),
            ],
            Dimension::Frequency => &[
                ("Hz", 1.0),
                ("mHz", 1e-3),
                ("kHz", 1e3),
                ("MHz", 1e6),
                ("GHz", 1e9),
            ],
            Dimension::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("µK", 1e-6)],
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("ns", 1e-9),
                ("min", 60.0),
            ],
            Dimension::Angle => &[("deg", 1.0), ("rad", 180.0 / std::f64::consts::PI)],
            Dimension::Gain => &[("dB", 1.0)],
            Dimension::PowerDbm => &[("dBm", 1.0)],
            Dimension::FrequencyPerField => &[
                ("Hz/T", 1.0),
                ("MHz/T", 1e6),
                ("MHz/mT", 1e9),
                ("kHz/mT", 1e6),
                ("GHz/T", 1e9),
            ],
            Dimension::FrequencyPerField5 => &[("Hz/T^5", 1.0), ("mHz/T^5", 1e-3)],
            Dimension::FieldPerRootPower => &[
                ("T/sqrt(W)", 1.0),
                ("mT/sqrt(W)", 1e-3),
                ("uT/sqrt(W)", 1e-6),
            ],
        }
    }
}

/// Parses `"<number> <unit>"` (whitespace optional) into SI units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && exponent_follows(&text[i + 1..])))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(Error::input(format!(
            "`{text}` is missing a unit (expected e.g. `{}`)",
            dim.si_unit()
        )));
    }
    let value: f64 = num.trim().parse().map_err(|_| Error::Parse {
        context: format!("quantity `{text}`"),
        message: "malformed number".into(),
    })?;
    let factor = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| {
            let known: Vec<_> = dim.units().iter().map(|(u, _)| *u).collect();
            Error::input(format!(
                "unknown unit `{unit}` in `{text}`; accepted: {}",
                known.join(", ")
            ))
        })?;
    if !value.is_finite() {
        return Err(Error::input(format!("`{text}` is not finite")));
    }
    Ok(value * factor)
}

fn exponent_follows(rest: &str) -> bool {
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit())
}

/// Formats an SI value with its canonical unit, full precision.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:e} {}", dim.si_unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_suffixes() {
        let b = parse_quantity("185 mT", Dimension::MagneticField).unwrap();
        assert!((b - 0.185).abs() < 1e-15);
        let f = parse_quantity("3.651GHz", Dimension::Frequency).unwrap();
        assert!((f - 3.651e9).abs() < 1e-3);
        let t = parse_quantity("81.9 mK", Dimension::Temperature).unwrap();
        assert!((t - 0.0819).abs() < 1e-15);
        let s = parse_quantity("0.21 MHz/mT", Dimension::FrequencyPerField).unwrap();
        assert!((s - 2.1e8).abs() < 1e-3);
        let k = parse_quantity("1.65e-3 T/sqrt(W)", Dimension::FieldPerRootPower).unwrap();
        assert!((k - 1.65e-3).abs() < 1e-18);
        assert_eq!(parse_quantity("-55 dB", Dimension::Gain).unwrap(), -55.0);
    }

    #[test]
    fn bare_numbers_are_rejected() {
        let err = parse_quantity("185", Dimension::MagneticField).unwrap_err();
        assert!(err.to_string().contains("missing a unit"));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(parse_quantity("185 mK", Dimension::MagneticField).is_err());
    }

    #[test]
    fn format_round_trips() {
        for v in [0.185, 3.651e9, 1.0 / 3.0, -103.5] {
            let s = format_quantity(v, Dimension::Frequency);
            assert_eq!(parse_quantity(&s, Dimension::Frequency).unwrap(), v);
        }
    }
}
