//! Fixed-point money (RMB, stored as integer fen).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An RMB amount in minor units (fen, hundredths of a yuan). Never negative
/// in stored records; arithmetic that could go below zero saturates at the
/// call site, not here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoneyError {
    #[error("invalid money literal {0:?}: expected a decimal amount like \"12.50\"")]
    Invalid(String),
    #[error("money amount {0:?} is negative")]
    Negative(String),
    #[error("money amount {0:?} has more than two decimal places")]
    TooPrecise(String),
}

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_fen(fen: i64) -> Money {
        Money(fen)
    }

    pub fn from_yuan(yuan: i64) -> Money {
        Money(yuan * 100)
    }

    pub fn fen(self) -> i64 {
        self.0
    }

    /// Whole-yuan part, truncated.
    pub fn yuan_floor(self) -> i64 {
        self.0.div_euclid(100)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub(self, other: Money) -> Money {
        Money((self.0 - other.0).max(0))
    }

    pub fn checked_add(self, other: Money) -> Option<Money> {
        self.0.checked_add(other.0).map(Money)
    }

    pub fn checked_mul(self, k: i64) -> Option<Money> {
        self.0.checked_mul(k).map(Money)
    }

    /// Canonical record rendering: always two decimal places ("85.00").
    pub fn display_record(self) -> String {
        format!("{}.{:02}", self.0 / 100, (self.0 % 100).abs())
    }

    /// Rendering for advance-shipping answers: one decimal place ("3.0").
    /// Amounts that do not fit one decimal fall back to two so the stated
    /// figure is never wrong.
    pub fn display_one_decimal(self) -> String {
        if self.0 % 10 == 0 {
            format!("{}.{}", self.0 / 100, (self.0 % 100).abs() / 10)
        } else {
            self.display_record()
        }
    }

    /// Rendering for red-envelope answers: whole RMB ("7").
    pub fn display_whole_yuan(self) -> String {
        format!("{}", self.yuan_floor())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_record())
    }
}

impl FromStr for Money {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Money, MoneyError> {
        let t = s.trim();
        if t.starts_with('-') {
            return Err(MoneyError::Negative(s.to_string()));
        }
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(MoneyError::Invalid(s.to_string()));
        }
        if frac.len() > 2 {
            return Err(MoneyError::TooPrecise(s.to_string()));
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(MoneyError::Invalid(s.to_string()));
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| MoneyError::Invalid(s.to_string()))?
        };
        let mut fen = 0i64;
        let mut digits = frac.chars();
        fen += digits
            .next()
            .map_or(0, |c| c.to_digit(10).unwrap() as i64 * 10);
        fen += digits.next().map_or(0, |c| c.to_digit(10).unwrap() as i64);
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(fen))
            .map(Money)
            .ok_or_else(|| MoneyError::Invalid(s.to_string()))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.display_record())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Money, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A merchant compensation percentage stored as basis points of one
/// (i.e. 0.07 -> 700). Exact integer arithmetic keeps floor() honest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fraction(u32);

impl Fraction {
    pub const SCALE: u32 = 10_000;

    pub fn from_basis_points(bp: u32) -> Fraction {
        Fraction(bp)
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn is_at_most_one(self) -> bool {
        self.0 <= Self::SCALE
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Decimal form with trailing zeros trimmed: 700 -> "0.07".
        let mut s = format!("{}.{:04}", self.0 / Self::SCALE, self.0 % Self::SCALE);
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
        f.write_str(&s)
    }
}

impl FromStr for Fraction {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Fraction, MoneyError> {
        let t = s.trim();
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if frac.len() > 4
            || !whole.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || (whole.is_empty() && frac.is_empty())
        {
            return Err(MoneyError::Invalid(s.to_string()));
        }
        let whole: u32 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| MoneyError::Invalid(s.to_string()))?
        };
        let mut bp = 0u32;
        for (i, c) in frac.chars().enumerate() {
            bp += c.to_digit(10).unwrap() * 10u32.pow(3 - i as u32);
        }
        Ok(Fraction(whole * Fraction::SCALE + bp))
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Fraction, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Product unit weight stored as integer grams; JSON form is a decimal
/// kilogram string ("0.8"). Grams keep ceil(quantity * weight) exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightKg(u64);

impl WeightKg {
    pub fn from_grams(g: u64) -> WeightKg {
        WeightKg(g)
    }

    pub fn grams(self) -> u64 {
        self.0
    }
}

impl fmt::Display for WeightKg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = format!("{}.{:03}", self.0 / 1000, self.0 % 1000);
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
        f.write_str(&s)
    }
}

impl FromStr for WeightKg {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<WeightKg, MoneyError> {
        let t = s.trim();
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if frac.len() > 3
            || !whole.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || (whole.is_empty() && frac.is_empty())
        {
            return Err(MoneyError::Invalid(s.to_string()));
        }
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole
                .parse()
                .map_err(|_| MoneyError::Invalid(s.to_string()))?
        };
        let mut g = 0u64;
        for (i, c) in frac.chars().enumerate() {
            g += c.to_digit(10).unwrap() as u64 * 10u64.pow(2 - i as u32);
        }
        Ok(WeightKg(whole * 1000 + g))
    }
}

impl Serialize for WeightKg {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WeightKg {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<WeightKg, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders_two_decimals() {
        let m: Money = "12.50".parse().unwrap();
        assert_eq!(m.fen(), 1250);
        assert_eq!(m.display_record(), "12.50");
        assert_eq!("12".parse::<Money>().unwrap().fen(), 1200);
        assert_eq!("0.5".parse::<Money>().unwrap().fen(), 50);
    }

    #[test]
    fn rejects_bad_literals() {
        assert!("-3".parse::<Money>().is_err());
        assert!("1.234".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
    }

    #[test]
    fn one_decimal_rendering() {
        assert_eq!(Money::from_fen(300).display_one_decimal(), "3.0");
        assert_eq!(Money::from_fen(1180).display_one_decimal(), "11.8");
        assert_eq!(Money::from_fen(0).display_one_decimal(), "0.0");
        // Odd fen never lies about the amount.
        assert_eq!(Money::from_fen(1185).display_one_decimal(), "11.85");
    }

    #[test]
    fn whole_yuan_rendering() {
        assert_eq!(Money::from_yuan(7).display_whole_yuan(), "7");
        assert_eq!(Money::from_fen(599).display_whole_yuan(), "5");
    }

    #[test]
    fn fraction_round_trip() {
        let p: Fraction = "0.07".parse().unwrap();
        assert_eq!(p.basis_points(), 700);
        assert_eq!(p.to_string(), "0.07");
        assert_eq!("0.1050".parse::<Fraction>().unwrap().basis_points(), 1050);
    }

    #[test]
    fn weight_round_trip() {
        let w: WeightKg = "0.8".parse().unwrap();
        assert_eq!(w.grams(), 800);
        assert_eq!(w.to_string(), "0.8");
        assert_eq!("1.234".parse::<WeightKg>().unwrap().to_string(), "1.234");
        assert_eq!("2".parse::<WeightKg>().unwrap().grams(), 2000);
    }
}
