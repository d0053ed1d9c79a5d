//! Minute-precision timestamps anchored to the environment's fixed clock.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A calendar datetime with minute precision. Serialized as
/// `"YYYY-MM-DD HH:MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid timestamp {0:?}: expected \"YYYY-MM-DD HH:MM\"")]
pub struct TimestampError(String);

/// The environment's clock never moves: 00:00 on June 12, 2025.
pub fn system_now() -> Timestamp {
    Timestamp::new(2025, 6, 12, 0, 0)
}

impl Timestamp {
    pub fn new(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Timestamp {
        Timestamp(
            NaiveDate::from_ymd_opt(year, month, day)
                .expect("valid date")
                .and_hms_opt(hour, minute, 0)
                .expect("valid time"),
        )
    }

    pub fn plus_hours(self, hours: i64) -> Timestamp {
        Timestamp(self.0 + Duration::hours(hours))
    }

    pub fn plus_days(self, days: i64) -> Timestamp {
        Timestamp(self.0 + Duration::days(days))
    }

    /// Whole hours from `earlier` to `self` (negative if `self` is earlier).
    pub fn hours_since(self, earlier: Timestamp) -> i64 {
        (self.0 - earlier.0).num_hours()
    }

    /// Minutes from `earlier` to `self`.
    pub fn minutes_since(self, earlier: Timestamp) -> i64 {
        (self.0 - earlier.0).num_minutes()
    }

    /// Truncate to the top of the hour (answers are exact to the hour).
    pub fn truncate_to_hour(self) -> Timestamp {
        Timestamp(self.0.with_minute(0).expect("minute 0"))
    }

    /// Render the hour-precision answer form: `"13:00 on June 12"`.
    pub fn display_hour_answer(self) -> String {
        let t = self.truncate_to_hour().0;
        format!(
            "{:02}:00 on {} {}",
            t.hour(),
            month_name(t.month()),
            t.day()
        )
    }
}

fn month_name(m: u32) -> &'static str {
    match m {
        1 => "January",
        2 => "February",
        3 => "March",
        4 => "April",
        5 => "May",
        6 => "June",
        7 => "July",
        8 => "August",
        9 => "September",
        10 => "October",
        11 => "November",
        _ => "December",
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d %H:%M"))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Timestamp, TimestampError> {
        NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M")
            .map(Timestamp)
            .map_err(|_| TimestampError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let t: Timestamp = "2025-06-10 14:00".parse().unwrap();
        assert_eq!(t.to_string(), "2025-06-10 14:00");
        assert!("2025-6-10".parse::<Timestamp>().is_err());
    }

    #[test]
    fn hour_answer_format() {
        let t = Timestamp::new(2025, 6, 12, 13, 0);
        assert_eq!(t.display_hour_answer(), "13:00 on June 12");
        let t = Timestamp::new(2025, 6, 14, 0, 0);
        assert_eq!(t.display_hour_answer(), "00:00 on June 14");
    }

    #[test]
    fn minutes_truncate_not_round() {
        let t = Timestamp::new(2025, 6, 12, 13, 45);
        assert_eq!(t.display_hour_answer(), "13:00 on June 12");
    }

    #[test]
    fn hour_arithmetic() {
        let t = Timestamp::new(2025, 6, 10, 14, 0);
        assert_eq!(t.plus_hours(24).to_string(), "2025-06-11 14:00");
        assert_eq!(system_now().plus_hours(48).to_string(), "2025-06-14 00:00");
        assert_eq!(t.plus_hours(0), t);
    }
}
