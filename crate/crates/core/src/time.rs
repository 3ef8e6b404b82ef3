//! Wall-clock helpers. Timestamps are integer epoch seconds (UTC); the study's
//! fixed timezone offset turns them into local seconds before any day or
//! period bucketing happens.

use chrono::{Datelike, NaiveDate, Weekday};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Fixed-offset local clock for one study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalClock {
    pub tz_offset_s: i64,
}

impl LocalClock {
    pub fn new(tz_offset_s: i64) -> Self {
        Self { tz_offset_s }
    }

    pub fn to_local(&self, t: i64) -> i64 {
        t + self.tz_offset_s
    }

    /// Calendar day that `t` falls on in local time.
    pub fn date_of(&self, t: i64) -> NaiveDate {
        date_from_local(self.to_local(t))
    }

    /// Seconds since local midnight.
    pub fn second_of_day(&self, t: i64) -> i64 {
        self.to_local(t).rem_euclid(SECONDS_PER_DAY)
    }

    /// UTC epoch second at which local `date` begins.
    pub fn day_start(&self, date: NaiveDate) -> i64 {
        local_midnight(date) - self.tz_offset_s
    }
}

pub fn epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Day containing a local-seconds value.
pub fn date_from_local(local: i64) -> NaiveDate {
    let days = local.div_euclid(SECONDS_PER_DAY);
    epoch_date() + chrono::Duration::days(days)
}

/// Local seconds at midnight starting `date`.
pub fn local_midnight(date: NaiveDate) -> i64 {
    (date - epoch_date()).num_days() * SECONDS_PER_DAY
}

/// Inclusive iterator over calendar days.
pub fn days_inclusive(start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let n = (end - start).num_days().max(-1) + 1;
    (0..n).map(move |i| start + chrono::Duration::days(i))
}

/// 0 = Monday .. 6 = Sunday.
pub fn weekday_index(date: NaiveDate) -> u8 {
    date.weekday().num_days_from_monday() as u8
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_offsets_shift_the_day() {
        // 2013-03-27 03:00 UTC is still the 26th in UTC-5.
        let clock = LocalClock::new(-5 * 3600);
        let t = 1_364_353_200;
        assert_eq!(clock.date_of(t), NaiveDate::from_ymd_opt(2013, 3, 26).unwrap());
        assert_eq!(clock.second_of_day(t), 22 * 3600);
    }

    #[test]
    fn day_start_round_trips() {
        let clock = LocalClock::new(3600);
        let d = NaiveDate::from_ymd_opt(2013, 4, 1).unwrap();
        let s = clock.day_start(d);
        assert_eq!(clock.date_of(s), d);
        assert_eq!(clock.second_of_day(s), 0);
        assert_eq!(clock.date_of(s - 1), d.pred_opt().unwrap());
    }

    #[test]
    fn inclusive_day_range() {
        let a = NaiveDate::from_ymd_opt(2013, 3, 30).unwrap();
        let b = NaiveDate::from_ymd_opt(2013, 4, 2).unwrap();
        assert_eq!(days_inclusive(a, b).count(), 4);
        assert_eq!(days_inclusive(b, a).count(), 0);
    }
}
