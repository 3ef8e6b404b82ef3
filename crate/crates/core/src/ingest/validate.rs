use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::types::*;
use crate::time::local_midnight;

/// One parsed data row together with its owner and source line.
#[derive(Debug, Clone)]
pub struct Row<E> {
    pub user: UserId,
    /// 1-based line in the source file; 0 for rows built in memory.
    pub line: u64,
    pub event: E,
}

impl<E: PartialEq> PartialEq for Row<E> {
    /// Line numbers are provenance, not content.
    fn eq(&self, other: &Self) -> bool {
        self.user == other.user && self.event == other.event
    }
}

/// WiFi scan before location interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WifiRecord {
    pub t: i64,
    pub location: String,
}

/// Per-stream record contract used by validation.
pub trait Record: Clone + PartialEq {
    /// Secondary sort key after the user.
    fn time_key(&self) -> i64;

    /// Range check; `Err` carries a human-readable reason.
    fn check(&self) -> Result<(), String>;

    /// Records sharing a user and a conflict key may not coexist.
    fn conflict_key(&self) -> Option<i64> {
        None
    }
}

fn finite_time(t: i64) -> Result<(), String> {
    // i64 timestamps are always finite; keep them inside the range chrono
    // can turn into a calendar day.
    if t.abs() > 1 << 40 {
        Err(format!("timestamp {t} out of range"))
    } else {
        Ok(())
    }
}

impl Record for WifiRecord {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)?;
        if self.location.trim().is_empty() {
            return Err("empty location".into());
        }
        Ok(())
    }
}

impl Record for GpsFix {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)?;
        if !(self.lat.is_finite() && (-90.0..=90.0).contains(&self.lat)) {
            return Err(format!("latitude {} outside [-90, 90]", self.lat));
        }
        if !(self.lon.is_finite() && (-180.0..=180.0).contains(&self.lon)) {
            return Err(format!("longitude {} outside [-180, 180]", self.lon));
        }
        Ok(())
    }
}

impl Record for ActivitySample {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)
    }
}

impl Record for AudioSample {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)
    }
}

impl Record for PhoneStateInterval {
    fn time_key(&self) -> i64 {
        self.start
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.start)?;
        finite_time(self.end)?;
        if self.start >= self.end {
            return Err(format!("interval start {} not before end {}", self.start, self.end));
        }
        Ok(())
    }
}

impl Record for CommEvent {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)?;
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(format!("duration {} must be finite and >= 0", self.duration_s));
        }
        if self.kind != CommKind::Call && self.duration_s != 0.0 {
            return Err(format!("{} events carry no duration", self.kind));
        }
        Ok(())
    }
}

impl Record for AcademicRecord {
    fn time_key(&self) -> i64 {
        local_midnight(self.date)
    }
    fn check(&self) -> Result<(), String> {
        if !(self.gpa.is_finite() && self.gpa >= 0.0) {
            return Err(format!("gpa {} must be >= 0", self.gpa));
        }
        if !(self.class_hours.is_finite() && self.class_hours >= 0.0) {
            return Err(format!("class_hours {} must be >= 0", self.class_hours));
        }
        Ok(())
    }
    fn conflict_key(&self) -> Option<i64> {
        Some(self.time_key())
    }
}

impl Record for EmaStress {
    fn time_key(&self) -> i64 {
        self.t
    }
    fn check(&self) -> Result<(), String> {
        finite_time(self.t)?;
        if !(1..=5).contains(&self.level) {
            return Err(format!("stress level {} outside 1..=5", self.level));
        }
        Ok(())
    }
}

impl Record for Phq9Score {
    fn time_key(&self) -> i64 {
        0
    }
    fn check(&self) -> Result<(), String> {
        if self.0 > Phq9Score::MAX {
            return Err(format!("PHQ-9 score {} outside 0..=27", self.0));
        }
        Ok(())
    }
    fn conflict_key(&self) -> Option<i64> {
        Some(0)
    }
}

/// Why a row did not make it into the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Wrong column count or unparseable field.
    Malformed,
    /// Parsed but violates a value range or invariant.
    OutOfRange,
    /// Identical to an earlier row.
    Duplicate,
    /// Second record for a key that admits only one (PHQ-9 per user,
    /// academic record per user-day).
    Conflict,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::Malformed => "malformed",
            DropReason::OutOfRange => "out_of_range",
            DropReason::Duplicate => "duplicate",
            DropReason::Conflict => "conflict",
        };
        f.write_str(s)
    }
}

/// A dropped row with its location in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowIssue {
    pub line: u64,
    pub reason: DropReason,
    pub message: String,
}

/// Row accounting for one stream. `kept + dropped() == total` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    pub issues: Vec<RowIssue>,
}

impl ValidationReport {
    pub fn dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    pub fn dropped_for(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }

    pub fn deduplicated(&self) -> usize {
        self.dropped_for(DropReason::Duplicate)
    }

    pub(crate) fn record_drop(&mut self, line: u64, reason: DropReason, message: String) {
        *self.dropped.entry(reason).or_default() += 1;
        self.issues.push(RowIssue { line, reason, message });
    }

    /// Folds another report for the same stream into this one.
    pub fn absorb(&mut self, other: ValidationReport) {
        self.total += other.total;
        self.kept += other.kept;
        for (k, v) in other.dropped {
            *self.dropped.entry(k).or_default() += v;
        }
        self.issues.extend(other.issues);
        self.issues.sort_by_key(|i| i.line);
    }
}

/// Report-only validation of a stream. Does not modify the input.
pub fn validate_stream<E: Record>(rows: &[Row<E>]) -> ValidationReport {
    clean_stream(rows.to_vec()).1
}

/// Drops out-of-range, duplicate and conflicting rows and sorts the rest by
/// `(user, time)`. The sort is stable, so equal keys keep input order.
pub fn clean_stream<E: Record>(rows: Vec<Row<E>>) -> (Vec<Row<E>>, ValidationReport) {
    let mut report = ValidationReport {
        total: rows.len(),
        ..Default::default()
    };
    let mut valid = Vec::with_capacity(rows.len());
    for row in rows {
        match row.event.check() {
            Ok(()) => valid.push(row),
            Err(msg) => report.record_drop(row.line, DropReason::OutOfRange, msg),
        }
    }
    valid.sort_by(|a, b| {
        a.user
            .cmp(&b.user)
            .then(a.event.time_key().cmp(&b.event.time_key()))
    });

    let mut kept: Vec<Row<E>> = Vec::with_capacity(valid.len());
    let mut group_start = 0;
    for row in valid {
        let same_group = kept
            .last()
            .map(|last| last.user == row.user && last.event.time_key() == row.event.time_key())
            .unwrap_or(false);
        if !same_group {
            group_start = kept.len();
        }
        let group = &kept[group_start..];
        if group.iter().any(|k| k.event == row.event) {
            report.record_drop(row.line, DropReason::Duplicate, "duplicate row".into());
            continue;
        }
        if let Some(key) = row.event.conflict_key() {
            if group.iter().any(|k| k.event.conflict_key() == Some(key)) {
                report.record_drop(
                    row.line,
                    DropReason::Conflict,
                    format!("second record for user {}", row.user),
                );
                continue;
            }
        }
        kept.push(row);
    }
    report.kept = kept.len();
    report.issues.sort_by_key(|i| i.line);
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ema(user: &str, line: u64, t: i64, level: u8) -> Row<EmaStress> {
        Row {
            user: UserId::new(user).unwrap(),
            line,
            event: EmaStress { t, level },
        }
    }

    #[test]
    fn empty_stream_reports_nothing() {
        let r = validate_stream::<EmaStress>(&[]);
        assert_eq!((r.total, r.kept, r.dropped()), (0, 0, 0));
    }

    #[test]
    fn one_out_of_range_row_is_dropped() {
        let rows = vec![
            ema("u1", 2, 10, 3),
            ema("u1", 3, 20, 1),
            ema("u2", 4, 5, 5),
            ema("u2", 5, 7, 7),
        ];
        let r = validate_stream(&rows);
        assert_eq!(r.kept, 3);
        assert_eq!(r.dropped(), 1);
        assert_eq!(r.dropped_for(DropReason::OutOfRange), 1);
        assert_eq!(r.issues[0].line, 5);
    }

    #[test]
    fn duplicates_match_a_set_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(0..40);
            let rows: Vec<_> = (0..n)
                .map(|i| {
                    let u = if rng.gen_bool(0.5) { "a" } else { "b" };
                    ema(u, i as u64 + 2, rng.gen_range(0..5), rng.gen_range(1..=5))
                })
                .collect();
            let distinct: BTreeSet<(String, i64, u8)> = rows
                .iter()
                .map(|r| (r.user.to_string(), r.event.t, r.event.level))
                .collect();
            let (kept, report) = clean_stream(rows.clone());
            assert_eq!(report.kept, distinct.len());
            assert_eq!(report.deduplicated(), rows.len() - distinct.len());
            assert_eq!(report.kept + report.dropped(), report.total);
            let got: BTreeSet<_> = kept
                .iter()
                .map(|r| (r.user.to_string(), r.event.t, r.event.level))
                .collect();
            assert_eq!(got, distinct);
        }
    }

    #[test]
    fn sorted_by_user_then_time() {
        let rows = vec![ema("b", 2, 5, 1), ema("a", 3, 9, 1), ema("a", 4, 1, 2)];
        let (kept, _) = clean_stream(rows);
        let keys: Vec<_> = kept.iter().map(|r| (r.user.as_str(), r.event.t)).collect();
        assert_eq!(keys, vec![("a", 1), ("a", 9), ("b", 5)]);
    }

    #[test]
    fn second_phq9_for_a_user_conflicts() {
        let u = UserId::new("u").unwrap();
        let rows = vec![
            Row { user: u.clone(), line: 2, event: Phq9Score(4) },
            Row { user: u, line: 3, event: Phq9Score(9) },
        ];
        let (kept, report) = clean_stream(rows);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].event, Phq9Score(4));
        assert_eq!(report.dropped_for(DropReason::Conflict), 1);
    }

    #[test]
    fn non_call_with_duration_is_out_of_range() {
        let ev = CommEvent { t: 0, kind: CommKind::Sms, duration_s: 3.0 };
        assert!(ev.check().is_err());
        let call = CommEvent { t: 0, kind: CommKind::Call, duration_s: 3.0 };
        assert!(call.check().is_ok());
    }
}
