//! Model time: duration literals, the hourly operational horizon, and the
//! single-period investment horizon.
//!
//! All timestamps are naive (no timezone); datasets use ISO-8601 seconds
//! precision (`2019-01-01T00:00:00`). Durations appear in parameters as an
//! integer with an `h` (hours) or `D` (days) suffix.

use chrono::{Duration, NaiveDateTime};

use crate::CoreError;

/// Parses an ISO-8601 timestamp without timezone, e.g. `2019-01-01T00:00:00`.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime, CoreError> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S").map_err(|_| {
        CoreError::Parse(format!("invalid timestamp {s:?}, expected YYYY-MM-DDTHH:MM:SS"))
    })
}

/// Formats a timestamp the way [`parse_timestamp`] reads it.
pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Parses a duration literal: `<n>h` for hours or `<n>D` for days.
pub fn parse_duration(s: &str) -> Result<Duration, CoreError> {
    let s = s.trim();
    let (digits, unit) = s.split_at(s.len().saturating_sub(1));
    let n: i64 = digits
        .parse()
        .map_err(|_| CoreError::Parse(format!("invalid duration {s:?}, expected e.g. 168h or 364D")))?;
    if n < 0 {
        return Err(CoreError::Parse(format!("negative duration {s:?}")));
    }
    match unit {
        "h" => Ok(Duration::hours(n)),
        "D" => Ok(Duration::days(n)),
        _ => Err(CoreError::Parse(format!(
            "invalid duration {s:?}, unit must be h (hours) or D (days)"
        ))),
    }
}

/// The time structure a compiled instance runs over: an hourly operational
/// horizon and one aggregate investment period covering all of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    /// First operational hour (inclusive).
    pub start: NaiveDateTime,
    /// End of the horizon (exclusive); `start + hours`.
    pub end: NaiveDateTime,
    /// Number of hourly steps.
    pub hours: usize,
}

impl Horizon {
    /// Builds an hourly horizon between two timestamps. The span must be a
    /// positive whole number of hours.
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Result<Self, CoreError> {
        let span = end - start;
        let minutes = span.num_minutes();
        if minutes <= 0 || minutes % 60 != 0 {
            return Err(CoreError::Parse(format!(
                "horizon from {} to {} is not a positive whole number of hours",
                format_timestamp(start),
                format_timestamp(end)
            )));
        }
        Ok(Horizon { start, end, hours: (minutes / 60) as usize })
    }

    /// The timestamp of operational hour `h` (0-based).
    pub fn timestamp(&self, h: usize) -> NaiveDateTime {
        self.start + Duration::hours(h as i64)
    }

    /// Iterates `(index, timestamp)` over the operational hours.
    pub fn iter(&self) -> impl Iterator<Item = (usize, NaiveDateTime)> + '_ {
        (0..self.hours).map(|h| (h, self.timestamp(h)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_literals_cover_hours_and_days() {
        assert_eq!(parse_duration("1h").unwrap(), Duration::hours(1));
        assert_eq!(parse_duration("168h").unwrap(), Duration::hours(168));
        assert_eq!(parse_duration("364D").unwrap(), Duration::days(364));
        assert_eq!(parse_duration("0h").unwrap(), Duration::zero());
        assert!(parse_duration("12m").is_err());
        assert!(parse_duration("h").is_err());
        assert!(parse_duration("-3h").is_err());
    }

    #[test]
    fn timestamps_round_trip() {
        let t = parse_timestamp("2019-06-15T07:00:00").unwrap();
        assert_eq!(format_timestamp(t), "2019-06-15T07:00:00");
        assert!(parse_timestamp("2019-06-15 07:00").is_err());
    }

    #[test]
    fn horizon_enumerates_hours() {
        let start = parse_timestamp("2019-01-01T00:00:00").unwrap();
        let end = parse_timestamp("2019-01-01T03:00:00").unwrap();
        let h = Horizon::new(start, end).unwrap();
        assert_eq!(h.hours, 3);
        let stamps: Vec<String> = h.iter().map(|(_, t)| format_timestamp(t)).collect();
        assert_eq!(
            stamps,
            [
                "2019-01-01T00:00:00",
                "2019-01-01T01:00:00",
                "2019-01-01T02:00:00"
            ]
        );
        assert!(Horizon::new(end, start).is_err());
    }
}
