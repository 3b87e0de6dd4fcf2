//! Parameter values: constants, flags, free text, and hourly time series with
//! previous-value-hold sampling.

use chrono::NaiveDateTime;

use crate::time::format_timestamp;
use crate::CoreError;

/// A time-indexed parameter: `(timestamp, value)` points sorted ascending.
/// Sampling holds the previous value, so a series only needs points where the
/// value changes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    points: Vec<(NaiveDateTime, f64)>,
    /// Dataset file the series came from (`ts:` reference), if any. Kept so
    /// emitting a dataset can reproduce the reference instead of inlining
    /// thousands of rows.
    pub source: Option<String>,
}

impl TimeSeries {
    /// Builds a series from points, sorting them by timestamp. Duplicate
    /// timestamps are rejected — there is no meaningful order between two
    /// values for the same instant.
    pub fn new(mut points: Vec<(NaiveDateTime, f64)>) -> Result<Self, CoreError> {
        points.sort_by_key(|&(t, _)| t);
        if points.is_empty() {
            return Err(CoreError::Parse("empty time series".into()));
        }
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CoreError::Parse(format!(
                    "duplicate timestamp {} in time series",
                    format_timestamp(w[0].0)
                )));
            }
        }
        Ok(TimeSeries { points, source: None })
    }

    /// The value at `t`: the last point at or before `t`. Returns `None` when
    /// `t` precedes the first point — the series does not cover that instant.
    pub fn sample(&self, t: NaiveDateTime) -> Option<f64> {
        match self.points.binary_search_by_key(&t, |&(ts, _)| ts) {
            Ok(i) => Some(self.points[i].1),
            Err(0) => None,
            Err(i) => Some(self.points[i - 1].1),
        }
    }

    pub fn points(&self) -> &[(NaiveDateTime, f64)] {
        &self.points
    }
}

/// One parameter assignment in a scenario layer.
#[derive(Debug, Clone, PartialEq)]
pub enum ParameterValue {
    Number(f64),
    Flag(bool),
    /// Free text: enum-like settings (`integer`, `==`), duration literals
    /// (`2h`), timestamps, or solver names.
    Text(String),
    Series(TimeSeries),
}

impl ParameterValue {
    /// Numeric view; `Flag(true)` reads as 1 and `Flag(false)` as 0, matching
    /// how on/off parameters participate in arithmetic.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParameterValue::Number(v) => Some(*v),
            ParameterValue::Flag(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            ParameterValue::Flag(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParameterValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_series(&self) -> Option<&TimeSeries> {
        match self {
            ParameterValue::Series(s) => Some(s),
            _ => None,
        }
    }

    /// The value at time `t`: series are sampled, constants apply everywhere.
    pub fn number_at(&self, t: NaiveDateTime) -> Option<f64> {
        match self {
            ParameterValue::Series(s) => s.sample(t),
            other => other.as_number(),
        }
    }
}
