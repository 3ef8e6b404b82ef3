use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::ingest::{Dataset, LocationId, UserId, UserStreams};
use crate::time::{days_inclusive, LocalClock, SECONDS_PER_DAY};

use super::extract::*;
use super::registry::{FeatureGroup, FeatureRegistry};
use super::FeatureError;

/// One user-day of features in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub user: UserId,
    pub date: NaiveDate,
    pub values: Vec<f64>,
    /// `true` where the feature's stream had no data in its period that day.
    pub missing_mask: Vec<bool>,
}

/// Rows for every `(user, day)` in the study range, sorted by user then date.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub registry: FeatureRegistry,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn row_index(&self, user: &UserId, date: NaiveDate) -> Option<usize> {
        self.rows
            .binary_search_by(|r| r.user.cmp(user).then(r.date.cmp(&date)))
            .ok()
    }

    pub fn row(&self, user: &UserId, date: NaiveDate) -> Option<&FeatureVector> {
        self.row_index(user, date).map(|i| &self.rows[i])
    }

    /// Writes `features.csv`: `user,date,<registry names>`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["user".to_string(), "date".to_string()];
        header.extend(self.registry.names().map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.user.to_string(), r.date.format("%Y-%m-%d").to_string()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which rows count as training when fitting data-dependent feature state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitScope {
    All,
    /// Days up to and including the given date.
    Through(NaiveDate),
    /// Every user except this one. Per-user lists still use the user's own days.
    ExcludeUser(UserId),
}

impl FitScope {
    fn day_ok(&self, date: NaiveDate) -> bool {
        match self {
            FitScope::Through(cut) => date <= *cut,
            _ => true,
        }
    }

    fn user_in_global(&self, user: &UserId) -> bool {
        !matches!(self, FitScope::ExcludeUser(u) if u == user)
    }
}

/// Each user's three and the population's seven most visited WiFi
/// locations, by attributed dwell time. Ties go to the lower location id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationRanking {
    user_top: BTreeMap<UserId, Vec<LocationId>>,
    global_top: Vec<LocationId>,
}

fn top_k(totals: &HashMap<LocationId, i64>, k: usize) -> Vec<LocationId> {
    let mut v: Vec<(LocationId, i64)> = totals.iter().map(|(l, s)| (*l, *s)).filter(|(_, s)| *s > 0).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(k).map(|(l, _)| l).collect()
}

impl LocationRanking {
    pub fn fit(dataset: &Dataset, scope: &FitScope, max_carry_s: i64) -> Self {
        let clock = dataset.clock();
        let per_user: Vec<(UserId, HashMap<LocationId, i64>)> = dataset
            .users
            .par_iter()
            .map(|(user, streams)| {
                let mut totals: HashMap<LocationId, i64> = HashMap::new();
                for (date, scans) in wifi_by_day(&clock, streams) {
                    if !scope.day_ok(date) {
                        continue;
                    }
                    let day_start = clock.day_start(date);
                    for period in wifi_dwell(scans, day_start, max_carry_s) {
                        for (loc, s) in period {
                            *totals.entry(loc).or_default() += s;
                        }
                    }
                }
                (user.clone(), totals)
            })
            .collect();
        let mut global: HashMap<LocationId, i64> = HashMap::new();
        let mut user_top = BTreeMap::new();
        for (user, totals) in per_user {
            if scope.user_in_global(&user) {
                for (l, s) in &totals {
                    *global.entry(*l).or_default() += s;
                }
            }
            user_top.insert(user, top_k(&totals, 3));
        }
        Self { user_top, global_top: top_k(&global, 7) }
    }

    pub fn user_top3(&self, user: &UserId) -> &[LocationId] {
        self.user_top.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn global_top7(&self) -> &[LocationId] {
        &self.global_top
    }
}

fn wifi_by_day<'a>(clock: &LocalClock, s: &'a UserStreams) -> Vec<(NaiveDate, &'a [crate::ingest::WifiScan])> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.wifi.len() {
        let date = clock.date_of(s.wifi[i].t);
        let end = clock.day_start(date) + SECONDS_PER_DAY;
        let j = i + s.wifi[i..].partition_point(|w| w.t < end);
        out.push((date, &s.wifi[i..j]));
        i = j;
    }
    out
}

fn day_slice<T>(events: &[T], day_start: i64, t: impl Fn(&T) -> i64) -> &[T] {
    let lo = events.partition_point(|e| t(e) < day_start);
    let hi = events.partition_point(|e| t(e) < day_start + SECONDS_PER_DAY);
    &events[lo..hi]
}

/// Positions of each extractor output inside the registry.
struct Layout {
    groups: Vec<(FeatureGroup, Vec<usize>)>,
    width: usize,
}

impl Layout {
    fn new(registry: &FeatureRegistry) -> Result<Self, FeatureError> {
        let index: HashMap<&str, (usize, FeatureGroup)> =
            registry.defs().iter().map(|d| (d.name.as_str(), (d.index, d.group))).collect();
        let sizes = registry.group_sizes();
        let mut groups = Vec::new();
        for group in registry.groups() {
            let names = group.feature_names();
            if sizes[&group] != names.len() {
                return Err(FeatureError::RegistryMismatch {
                    group,
                    message: format!(
                        "registry declares {} columns, extractor emits {}",
                        sizes[&group],
                        names.len()
                    ),
                });
            }
            let mut slots = Vec::with_capacity(names.len());
            for (name, _) in &names {
                match index.get(name.as_str()) {
                    Some((i, g)) if *g == group => slots.push(*i),
                    Some((_, g)) => {
                        return Err(FeatureError::RegistryMismatch {
                            group,
                            message: format!("'{name}' is registered under group {g}"),
                        })
                    }
                    None => {
                        return Err(FeatureError::RegistryMismatch {
                            group,
                            message: format!("extractor output '{name}' has no registry slot"),
                        })
                    }
                }
            }
            groups.push((group, slots));
        }
        Ok(Self { groups, width: registry.len() })
    }
}

fn user_day(
    clock: &LocalClock,
    layout: &Layout,
    user: &UserId,
    s: &UserStreams,
    date: NaiveDate,
    ranking: &LocationRanking,
    opts: &ExtractOptions,
) -> FeatureVector {
    let day_start = clock.day_start(date);
    let day_end = day_start + SECONDS_PER_DAY;
    let mut values = vec![0.0; layout.width];
    let mut mask = vec![false; layout.width];
    for (group, slots) in &layout.groups {
        let block = match group {
            FeatureGroup::Wifi => wifi_features(
                day_slice(&s.wifi, day_start, |e| e.t),
                day_start,
                TopLocations { user_top3: ranking.user_top3(user), global_top7: ranking.global_top7() },
                opts,
            ),
            FeatureGroup::Gps => gps_features(day_slice(&s.gps, day_start, |e| e.t), day_start, opts),
            FeatureGroup::Social => social_features(day_slice(&s.comm, day_start, |e| e.t), day_start),
            FeatureGroup::PhoneLog => {
                let upto = s.phone_state.partition_point(|iv| iv.start < day_end);
                let touching: Vec<_> = s.phone_state[..upto]
                    .iter()
                    .filter(|iv| iv.end > day_start)
                    .copied()
                    .collect();
                phonelog_features(&touching, day_start)
            }
            FeatureGroup::Activity => activity_features(day_slice(&s.activity, day_start, |e| e.t), day_start, opts),
            FeatureGroup::Audio => audio_features(day_slice(&s.audio, day_start, |e| e.t), day_start, opts),
            FeatureGroup::Academic => {
                let rec = s
                    .academic
                    .binary_search_by(|r| r.date.cmp(&date))
                    .ok()
                    .map(|i| &s.academic[i]);
                academic_features(rec)
            }
        };
        for (k, &slot) in slots.iter().enumerate() {
            values[slot] = block.values[k];
            mask[slot] = block.mask[k];
        }
    }
    FeatureVector { user: user.clone(), date, values, missing_mask: mask }
}

/// One feature vector per `(user, day)` in the study range. Column order is
/// the registry's. Work is spread over the rayon pool per user; the output
/// order does not depend on scheduling.
pub fn build_feature_matrix(
    dataset: &Dataset,
    registry: &FeatureRegistry,
    ranking: &LocationRanking,
    opts: &ExtractOptions,
) -> Result<FeatureMatrix, FeatureError> {
    let layout = Layout::new(registry)?;
    let (start, end) = dataset.study_range().ok_or(FeatureError::NoStudyRange)?;
    let clock = dataset.clock();
    let per_user: Vec<Vec<FeatureVector>> = dataset
        .users
        .par_iter()
        .map(|(user, streams)| {
            days_inclusive(start, end)
                .map(|d| user_day(&clock, &layout, user, streams, d, ranking, opts))
                .collect()
        })
        .collect();
    Ok(FeatureMatrix { registry: registry.clone(), rows: per_user.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureRegistry;
    use crate::ingest::{ActivityClass, DatasetBuilder, DatasetMeta, PhoneState};

    fn small_dataset(reverse: bool) -> Dataset {
        let meta = DatasetMeta {
            tz_offset_s: -4 * 3600,
            study_start: NaiveDate::from_ymd_opt(2013, 3, 27),
            study_end: NaiveDate::from_ymd_opt(2013, 3, 29),
            extra: Default::default(),
        };
        let mut b = DatasetBuilder::new(meta);
        let u = UserId::new("u1").unwrap();
        let base = 1_364_356_800; // 2013-03-27 04:00 UTC = local midnight
        let mut scans: Vec<(i64, &str)> = (0..300).map(|k| (base + k * 600, if k % 3 == 0 { "a" } else { "b" })).collect();
        if reverse {
            scans.reverse();
        }
        for (t, l) in scans {
            b.push_wifi(&u, t, l);
        }
        b.push_activity(&u, base + 100, ActivityClass::Walking);
        b.push_phone_state(&u, base + 10, base + 5000, PhoneState::Locked);
        b.build().0
    }

    #[test]
    fn one_user_three_days() {
        let ds = small_dataset(false);
        let reg = FeatureRegistry::default_registry();
        let ranking = LocationRanking::fit(&ds, &FitScope::All, 600);
        let m = build_feature_matrix(&ds, &reg, &ranking, &ExtractOptions::default()).unwrap();
        assert_eq!(m.rows.len(), 3);
        assert!(m.rows.iter().all(|r| r.values.len() == 123 && r.missing_mask.len() == 123));
        for r in &m.rows {
            for (v, masked) in r.values.iter().zip(&r.missing_mask) {
                assert!(v.is_finite());
                if *masked {
                    assert_eq!(*v, 0.0);
                }
            }
        }
        assert_eq!(ranking.user_top3(&UserId::new("u1").unwrap()).len(), 2);
    }

    #[test]
    fn row_order_does_not_matter() {
        let reg = FeatureRegistry::default_registry();
        let a = small_dataset(false);
        let b = small_dataset(true);
        let ra = LocationRanking::fit(&a, &FitScope::All, 600);
        let rb = LocationRanking::fit(&b, &FitScope::All, 600);
        let opts = ExtractOptions::default();
        assert_eq!(
            build_feature_matrix(&a, &reg, &ra, &opts).unwrap(),
            build_feature_matrix(&b, &reg, &rb, &opts).unwrap()
        );
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let mut entries: Vec<_> = FeatureRegistry::default_registry()
            .defs()
            .iter()
            .map(|d| (d.name.clone(), d.group, d.period))
            .collect();
        entries.retain(|(n, _, _)| n != "social_day_comm_count");
        let reg = FeatureRegistry::from_entries(entries).unwrap();
        let ds = small_dataset(false);
        let err = build_feature_matrix(&ds, &reg, &LocationRanking::default(), &ExtractOptions::default()).unwrap_err();
        assert!(matches!(err, FeatureError::RegistryMismatch { group: FeatureGroup::Social, .. }));
    }

    #[test]
    fn reordered_registry_moves_columns() {
        let default = FeatureRegistry::default_registry();
        let mut entries: Vec<_> = default.defs().iter().map(|d| (d.name.clone(), d.group, d.period)).collect();
        entries.reverse();
        let reversed = FeatureRegistry::from_entries(entries).unwrap();
        let ds = small_dataset(false);
        let rk = LocationRanking::fit(&ds, &FitScope::All, 600);
        let opts = ExtractOptions::default();
        let a = build_feature_matrix(&ds, &default, &rk, &opts).unwrap();
        let b = build_feature_matrix(&ds, &reversed, &rk, &opts).unwrap();
        let mut col: Vec<f64> = b.rows[0].values.clone();
        col.reverse();
        assert_eq!(a.rows[0].values, col);
    }

    #[test]
    fn ranking_respects_the_cutoff() {
        let ds = small_dataset(false);
        let u = UserId::new("u1").unwrap();
        let first = NaiveDate::from_ymd_opt(2013, 3, 27).unwrap();
        let r = LocationRanking::fit(&ds, &FitScope::Through(first - chrono::Duration::days(1)), 600);
        assert!(r.user_top3(&u).is_empty());
        assert!(r.global_top7().is_empty());
        let excl = LocationRanking::fit(&ds, &FitScope::ExcludeUser(u.clone()), 600);
        assert!(excl.global_top7().is_empty());
        assert_eq!(excl.user_top3(&u).len(), 2);
    }
}
