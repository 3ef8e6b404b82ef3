use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SECONDS_PER_DAY;

pub const NIGHT_END_S: i64 = 9 * 3600;
pub const DAY_END_S: i64 = 18 * 3600;

/// Wall-clock thirds of a day: Night `[00:00, 09:00)`, Day `[09:00, 18:00)`,
/// Evening `[18:00, 24:00)`. A boundary instant belongs to the later period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayPeriod {
    Night,
    Day,
    Evening,
}

impl DayPeriod {
    pub const ALL: [DayPeriod; 3] = [DayPeriod::Night, DayPeriod::Day, DayPeriod::Evening];

    /// `[start, end)` in seconds after local midnight.
    pub fn window(self) -> (i64, i64) {
        match self {
            DayPeriod::Night => (0, NIGHT_END_S),
            DayPeriod::Day => (NIGHT_END_S, DAY_END_S),
            DayPeriod::Evening => (DAY_END_S, SECONDS_PER_DAY),
        }
    }

    pub fn len_s(self) -> i64 {
        let (a, b) = self.window();
        b - a
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayPeriod::Night => "night",
            DayPeriod::Day => "day",
            DayPeriod::Evening => "evening",
        }
    }
}

impl fmt::Display for DayPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Period slot a feature describes: one of the three periods or the whole day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodSlot {
    Period(DayPeriod),
    Daily,
}

impl fmt::Display for PeriodSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodSlot::Period(p) => p.fmt(f),
            PeriodSlot::Daily => f.write_str("daily"),
        }
    }
}

impl FromStr for PeriodSlot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "night" => Ok(PeriodSlot::Period(DayPeriod::Night)),
            "day" => Ok(PeriodSlot::Period(DayPeriod::Day)),
            "evening" => Ok(PeriodSlot::Period(DayPeriod::Evening)),
            "daily" => Ok(PeriodSlot::Daily),
            other => Err(format!("unknown period '{other}'")),
        }
    }
}

/// Period of a local timestamp (seconds; only the time of day matters).
pub fn period_of(local_t: i64) -> DayPeriod {
    let s = local_t.rem_euclid(SECONDS_PER_DAY);
    if s < NIGHT_END_S {
        DayPeriod::Night
    } else if s < DAY_END_S {
        DayPeriod::Day
    } else {
        DayPeriod::Evening
    }
}

/// Splits `[start, end)` (seconds after midnight, clipped to the day) into
/// seconds per period.
pub fn split_span(start: i64, end: i64) -> [i64; 3] {
    let mut out = [0; 3];
    for p in DayPeriod::ALL {
        let (a, b) = p.window();
        out[p.index()] = (end.min(b) - start.max(a)).max(0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_instants() {
        assert_eq!(period_of(10 * 3600 + 30 * 60), DayPeriod::Day);
        assert_eq!(period_of(0), DayPeriod::Night);
        assert_eq!(period_of(18 * 3600), DayPeriod::Evening);
        assert_eq!(period_of(9 * 3600 - 1), DayPeriod::Night);
        assert_eq!(period_of(9 * 3600), DayPeriod::Day);
        assert_eq!(period_of(-1), DayPeriod::Evening);
    }

    #[test]
    fn windows_partition_the_day() {
        let total: i64 = DayPeriod::ALL.iter().map(|p| p.len_s()).sum();
        assert_eq!(total, SECONDS_PER_DAY);
        for s in (0..SECONDS_PER_DAY).step_by(97) {
            let p = period_of(s);
            let (a, b) = p.window();
            assert!(a <= s && s < b);
        }
    }

    #[test]
    fn span_split_sums_to_length() {
        assert_eq!(split_span(8 * 3600, 10 * 3600), [3600, 3600, 0]);
        assert_eq!(split_span(0, SECONDS_PER_DAY), [32_400, 32_400, 21_600]);
        let [a, b, c] = split_span(1234, 80_000);
        assert_eq!(a + b + c, 80_000 - 1234);
    }
}
