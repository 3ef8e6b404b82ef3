use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{Dataset, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StressClass {
    Low,
    Medium,
    High,
}

impl StressClass {
    pub const ALL: [StressClass; 3] = [StressClass::Low, StressClass::Medium, StressClass::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A response's class relative to its user's median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressLabel {
    pub value: StressClass,
    pub user_median: f64,
}

/// Midpoint median: the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn classify(level: f64, median: f64) -> StressClass {
    match level.partial_cmp(&median) {
        Some(std::cmp::Ordering::Less) => StressClass::Low,
        Some(std::cmp::Ordering::Greater) => StressClass::High,
        _ => StressClass::Medium,
    }
}

/// Labels each of one user's responses against that user's median.
pub fn label_stress(levels: &[u8]) -> Vec<StressLabel> {
    let vals: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let Some(m) = median(&vals) else { return Vec::new() };
    vals.iter().map(|&l| StressLabel { value: classify(l, m), user_median: m }).collect()
}

/// Lower median of one day's response classes.
pub fn day_label(classes: &[StressClass]) -> Option<StressClass> {
    let mut c = classes.to_vec();
    c.sort();
    c.get(c.len().checked_sub(1)? / 2).copied()
}

/// One labelled user-day.
#[derive(Debug, Clone, PartialEq)]
pub struct StressDay {
    pub user: UserId,
    pub date: NaiveDate,
    pub class: StressClass,
    pub user_median: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DayLabels {
    pub days: Vec<StressDay>,
    /// Users with responses but none inside the median window.
    pub users_without_median: usize,
}

/// Per-user day labels. Medians use only responses on or before `fit_through`
/// (all responses when `None`); every response is then labelled against it.
pub fn stress_day_labels(dataset: &Dataset, fit_through: Option<NaiveDate>) -> DayLabels {
    let clock = dataset.clock();
    let mut out = DayLabels::default();
    for (user, s) in &dataset.users {
        if s.ema_stress.is_empty() {
            continue;
        }
        let fit: Vec<f64> = s
            .ema_stress
            .iter()
            .filter(|e| fit_through.map_or(true, |d| clock.date_of(e.t) <= d))
            .map(|e| e.level as f64)
            .collect();
        let Some(m) = median(&fit) else {
            out.users_without_median += 1;
            continue;
        };
        let mut by_day: BTreeMap<NaiveDate, Vec<StressClass>> = BTreeMap::new();
        for e in &s.ema_stress {
            by_day.entry(clock.date_of(e.t)).or_default().push(classify(e.level as f64, m));
        }
        for (date, classes) in by_day {
            let class = day_label(&classes).expect("non-empty day");
            out.days.push(StressDay { user: user.clone(), date, class, user_median: m });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use StressClass::*;

    #[test]
    fn odd_count() {
        let l = label_stress(&[1, 2, 3, 4, 5]);
        assert_eq!(l[0].user_median, 3.0);
        assert_eq!((l[1].value, l[2].value, l[4].value), (Low, Medium, High));
    }

    #[test]
    fn all_equal_is_medium() {
        assert!(label_stress(&[4, 4, 4]).iter().all(|l| l.value == Medium));
    }

    #[test]
    fn even_count_midpoint_gives_no_medium() {
        let l = label_stress(&[1, 2, 4, 5]);
        assert_eq!(l[0].user_median, 3.0);
        assert!(l.iter().all(|x| x.value != Medium));
    }

    #[test]
    fn day_label_takes_lower_median() {
        assert_eq!(day_label(&[High, Low]), Some(Low));
        assert_eq!(day_label(&[High, Low, High]), Some(High));
        assert_eq!(day_label(&[]), None);
    }
}
