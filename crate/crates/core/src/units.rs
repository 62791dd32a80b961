//! Speed units accepted in recordings and queries. Everything internal is SI.

use std::fmt;
use std::str::FromStr;

pub const MPH_TO_MPS: f64 = 0.44704;
pub const KMH_TO_MPS: f64 = 1.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedUnit {
    MetersPerSecond,
    KilometersPerHour,
    MilesPerHour,
}

impl SpeedUnit {
    pub fn factor(self) -> f64 {
        match self {
            SpeedUnit::MetersPerSecond => 1.0,
            SpeedUnit::KilometersPerHour => KMH_TO_MPS,
            SpeedUnit::MilesPerHour => MPH_TO_MPS,
        }
    }

    pub fn to_si(self, value: f64) -> f64 {
        value * self.factor()
    }

    pub fn from_si(self, value: f64) -> f64 {
        value / self.factor()
    }

    pub fn suffix(self) -> &'static str {
        match self {
            SpeedUnit::MetersPerSecond => "mps",
            SpeedUnit::KilometersPerHour => "kmh",
            SpeedUnit::MilesPerHour => "mph",
        }
    }
}

impl fmt::Display for SpeedUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown unit `{0}`")]
pub struct UnknownUnit(pub String);

impl FromStr for SpeedUnit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mps" | "m/s" => Ok(SpeedUnit::MetersPerSecond),
            "kmh" | "km/h" | "kph" => Ok(SpeedUnit::KilometersPerHour),
            "mph" => Ok(SpeedUnit::MilesPerHour),
            other => Err(UnknownUnit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpeedParseError {
    #[error("`{0}` is not a number")]
    NotANumber(String),
    #[error(transparent)]
    Unit(#[from] UnknownUnit),
}

/// Parses `"50mph"`, `"80 kmh"`, `"12.5"` (bare numbers are m/s) into m/s.
pub fn parse_speed(text: &str) -> Result<f64, SpeedParseError> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| SpeedParseError::NotANumber(text.to_string()))?;
    if unit.trim().is_empty() {
        return Ok(value);
    }
    let unit: SpeedUnit = unit.parse()?;
    Ok(unit.to_si(value))
}

/// Inverse of [`parse_speed`]: formats an SI speed in the requested unit.
pub fn format_speed(mps: f64, unit: SpeedUnit) -> String {
    format!("{}{}", unit.from_si(mps), unit.suffix())
}
