use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::UserId;

use super::TaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    Chronological8020,
    LeaveOneUserOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub policy: SplitPolicy,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Last training date (chronological).
    pub cutoff: Option<NaiveDate>,
    /// Test user (leave-one-user-out).
    pub held_out: Option<UserId>,
}

impl Split {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }
}

/// Fraction of distinct days that go to training.
pub const TRAIN_FRACTION: (usize, usize) = (4, 5);

/// Last training date: the first `ceil(4n/5)` of the `n` distinct dates.
pub fn chronological_cutoff(dates: &[NaiveDate]) -> Option<NaiveDate> {
    let distinct: BTreeSet<NaiveDate> = dates.iter().copied().collect();
    let n = distinct.len();
    let (num, den) = TRAIN_FRACTION;
    let n_train = (num * n).div_ceil(den);
    distinct.into_iter().nth(n_train.checked_sub(1)?)
}

/// Rows dated on or before `cutoff` train, the rest test.
pub fn split_at(dates: &[NaiveDate], cutoff: NaiveDate) -> Result<Split, TaskError> {
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) = (0..dates.len()).partition(|&i| dates[i] <= cutoff);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(TaskError::DegenerateSplit(format!(
            "cut after {cutoff}: {} train rows, {} test rows",
            train_rows.len(),
            test_rows.len()
        )));
    }
    Ok(Split { policy: SplitPolicy::Chronological8020, train_rows, test_rows, cutoff: Some(cutoff), held_out: None })
}

/// The first 80% of distinct dates train; ties on the cut date train.
pub fn chronological_split(dates: &[NaiveDate]) -> Result<Split, TaskError> {
    let cutoff = chronological_cutoff(dates).ok_or_else(|| TaskError::DegenerateSplit("no examples".into()))?;
    split_at(dates, cutoff)
}

/// One split per distinct user, in user order.
pub fn louo_splits(users: &[UserId]) -> Result<Vec<Split>, TaskError> {
    let distinct: BTreeSet<&UserId> = users.iter().collect();
    if distinct.len() < 2 {
        return Err(TaskError::DegenerateSplit(format!("{} user(s); need two", distinct.len())));
    }
    Ok(distinct
        .into_iter()
        .map(|u| {
            let (test_rows, train_rows) = (0..users.len()).partition(|&i| &users[i] == u);
            Split { policy: SplitPolicy::LeaveOneUserOut, train_rows, test_rows, cutoff: None, held_out: Some(u.clone()) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 4, n).unwrap()
    }

    #[test]
    fn ten_days_cut_after_eight() {
        let dates: Vec<NaiveDate> = (1..=10).flat_map(|d| [day(d), day(d)]).collect();
        let s = chronological_split(&dates).unwrap();
        assert_eq!(s.cutoff, Some(day(8)));
        assert_eq!(s.train_rows.len(), 16);
        assert!(s.test_rows.iter().all(|&i| dates[i] >= day(9)));
    }

    #[test]
    fn single_day_is_degenerate() {
        assert!(matches!(chronological_split(&[day(1), day(1)]), Err(TaskError::DegenerateSplit(_))));
        assert!(matches!(chronological_split(&[]), Err(TaskError::DegenerateSplit(_))));
    }

    #[test]
    fn louo_sizes() {
        let users: Vec<UserId> = (0..38).map(|i| UserId::new(format!("u{i:02}")).unwrap()).collect();
        let splits = louo_splits(&users).unwrap();
        assert_eq!(splits.len(), 38);
        for s in &splits {
            assert_eq!((s.train_rows.len(), s.test_rows.len()), (37, 1));
            assert_eq!(users[s.test_rows[0]], *s.held_out.as_ref().unwrap());
        }
    }
}
