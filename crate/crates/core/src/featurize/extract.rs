//! Per-group extractors. Each one is a pure function of a single user-day
//! slice; timestamps are UTC epoch seconds and `day_start` is the UTC second
//! of local midnight.

use crate::ingest::{
    AcademicRecord, ActivitySample, AudioSample, CommEvent, CommKind, GpsFix, LocationId, PhoneState,
    PhoneStateInterval, WifiScan,
};
use crate::time::SECONDS_PER_DAY;

use super::carry::{attribute_states, carry_spans};
use super::geo::{haversine_m, hull_area_m2, mean_var};
use super::period::{period_of, split_span, DayPeriod};

/// Values and missing-data mask for one group. Masked entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBlock {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GroupBlock {
    fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n], mask: vec![false; n] }
    }

    fn mask_range(&mut self, range: std::ops::Range<usize>) {
        for i in range {
            self.values[i] = 0.0;
            self.mask[i] = true;
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Knobs shared by the extractors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExtractOptions {
    /// Longest a sample's state is carried forward.
    pub max_carry_s: i64,
    /// Step speed above which a GPS step counts as moving.
    pub moving_speed_mps: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { max_carry_s: 600, moving_speed_mps: 0.5 }
    }
}

/// Top-location lists used by the WiFi extractor.
#[derive(Debug, Clone, Copy)]
pub struct TopLocations<'a> {
    pub user_top3: &'a [LocationId],
    pub global_top7: &'a [LocationId],
}

fn offsets<T>(events: &[T], day_start: i64, t: impl Fn(&T) -> i64) -> Vec<i64> {
    events.iter().map(|e| t(e) - day_start).collect()
}

pub const WIFI_PER_PERIOD: usize = 12;

/// Dwell seconds per location and period for one day of scans.
pub fn wifi_dwell(scans: &[WifiScan], day_start: i64, max_carry_s: i64) -> [Vec<(LocationId, i64)>; 3] {
    let offs = offsets(scans, day_start, |s| s.t);
    let mut dwell: [Vec<(LocationId, i64)>; 3] = Default::default();
    for (i, start, end) in carry_spans(&offs, max_carry_s) {
        let split = split_span(start, end);
        for p in 0..3 {
            if split[p] == 0 {
                continue;
            }
            let loc = scans[i].location;
            match dwell[p].iter_mut().find(|(l, _)| *l == loc) {
                Some(slot) => slot.1 += split[p],
                None => dwell[p].push((loc, split[p])),
            }
        }
    }
    dwell
}

/// Per period: distinct locations, population variance of per-location
/// dwell, dwell at the user's top 3 and the global top 7 locations.
pub fn wifi_features(scans: &[WifiScan], day_start: i64, top: TopLocations<'_>, opts: &ExtractOptions) -> GroupBlock {
    let mut block = GroupBlock::zeros(3 * WIFI_PER_PERIOD);
    let dwell = wifi_dwell(scans, day_start, opts.max_carry_s);
    for p in DayPeriod::ALL {
        let base = p.index() * WIFI_PER_PERIOD;
        let d = &dwell[p.index()];
        if d.is_empty() {
            block.mask_range(base..base + WIFI_PER_PERIOD);
            continue;
        }
        let secs: Vec<f64> = d.iter().map(|(_, s)| *s as f64).collect();
        block.values[base] = d.len() as f64;
        block.values[base + 1] = mean_var(&secs).1;
        let at = |loc: Option<&LocationId>| -> f64 {
            loc.and_then(|l| d.iter().find(|(x, _)| x == l)).map_or(0.0, |(_, s)| *s as f64)
        };
        for k in 0..3 {
            block.values[base + 2 + k] = at(top.user_top3.get(k));
        }
        for k in 0..7 {
            block.values[base + 5 + k] = at(top.global_top7.get(k));
        }
    }
    block
}

pub const GPS_PER_PERIOD: usize = 10;

/// Per period: max/total/variance of step distance, mean/variance of step
/// speed, hull area, indoor/outdoor seconds, fix count, moving fraction.
pub fn gps_features(fixes: &[GpsFix], day_start: i64, opts: &ExtractOptions) -> GroupBlock {
    let mut block = GroupBlock::zeros(3 * GPS_PER_PERIOD);
    let offs = offsets(fixes, day_start, |f| f.t);

    // indoor / outdoor time: carry each fix's flag forward
    let mut inout = [[0i64; 3]; 2];
    for (i, start, end) in carry_spans(&offs, opts.max_carry_s) {
        let row = match fixes[i].indoor {
            Some(true) => 0,
            Some(false) => 1,
            None => continue,
        };
        let split = split_span(start, end);
        for p in 0..3 {
            inout[row][p] += split[p];
        }
    }

    for p in DayPeriod::ALL {
        let base = p.index() * GPS_PER_PERIOD;
        let members: Vec<usize> = (0..fixes.len()).filter(|&i| period_of(offs[i]) == p).collect();
        block.values[base + 8] = members.len() as f64;
        if members.len() < 2 {
            block.mask_range(base..base + 8);
            block.mask_range(base + 9..base + 10);
            continue;
        }
        let mut dists = Vec::with_capacity(members.len() - 1);
        let mut speeds = Vec::new();
        let (mut moving_s, mut step_s) = (0.0, 0.0);
        for w in members.windows(2) {
            let (a, b) = (&fixes[w[0]], &fixes[w[1]]);
            let d = haversine_m(a.lat, a.lon, b.lat, b.lon);
            dists.push(d);
            let dt = (b.t - a.t) as f64;
            if dt > 0.0 {
                let v = d / dt;
                speeds.push(v);
                step_s += dt;
                if v > opts.moving_speed_mps {
                    moving_s += dt;
                }
            }
        }
        let coords: Vec<(f64, f64)> = members.iter().map(|&i| (fixes[i].lat, fixes[i].lon)).collect();
        let (mean_speed, speed_var) = mean_var(&speeds);
        block.values[base] = dists.iter().cloned().fold(0.0, f64::max);
        block.values[base + 1] = dists.iter().sum();
        block.values[base + 2] = mean_var(&dists).1;
        block.values[base + 3] = mean_speed;
        block.values[base + 4] = speed_var;
        block.values[base + 5] = hull_area_m2(&coords);
        block.values[base + 6] = inout[0][p.index()] as f64;
        block.values[base + 7] = inout[1][p.index()] as f64;
        block.values[base + 9] = if step_s > 0.0 { moving_s / step_s } else { 0.0 };
    }
    block
}

pub const SOCIAL_PER_PERIOD: usize = 3;

/// Per period: SMS + calls, app usages + Bluetooth contacts, call seconds.
pub fn social_features(events: &[CommEvent], day_start: i64) -> GroupBlock {
    let mut block = GroupBlock::zeros(3 * SOCIAL_PER_PERIOD);
    let mut seen = [false; 3];
    for e in events {
        let p = period_of(e.t - day_start).index();
        seen[p] = true;
        let base = p * SOCIAL_PER_PERIOD;
        match e.kind {
            CommKind::Sms => block.values[base] += 1.0,
            CommKind::Call => {
                block.values[base] += 1.0;
                block.values[base + 2] += e.duration_s;
            }
            CommKind::AppUsage | CommKind::BluetoothContact => block.values[base + 1] += 1.0,
        }
    }
    for p in 0..3 {
        if !seen[p] {
            block.mask_range(p * SOCIAL_PER_PERIOD..(p + 1) * SOCIAL_PER_PERIOD);
        }
    }
    block
}

pub const PHONELOG_LEN: usize = 14;

/// Per period charging/locked/dark seconds, then daily totals and the number
/// of charge and lock sessions touching the day.
pub fn phonelog_features(intervals: &[PhoneStateInterval], day_start: i64) -> GroupBlock {
    let mut block = GroupBlock::zeros(PHONELOG_LEN);
    let mut seen = [false; 3];
    let mut sessions = [0usize; 3];
    for iv in intervals {
        let s = (iv.start - day_start).max(0);
        let e = (iv.end - day_start).min(SECONDS_PER_DAY);
        if e <= s {
            continue;
        }
        let k = match iv.kind {
            PhoneState::Charging => 0,
            PhoneState::Locked => 1,
            PhoneState::Dark => 2,
        };
        sessions[k] += 1;
        let split = split_span(s, e);
        for p in 0..3 {
            if split[p] > 0 {
                seen[p] = true;
                block.values[p * 3 + k] += split[p] as f64;
                block.values[9 + k] += split[p] as f64;
            }
        }
    }
    block.values[12] = sessions[0] as f64;
    block.values[13] = sessions[1] as f64;
    for p in 0..3 {
        if !seen[p] {
            block.mask_range(p * 3..p * 3 + 3);
        }
    }
    if !seen.iter().any(|&s| s) {
        block.mask_range(9..14);
    }
    block
}

fn state_block<const N: usize>(offs: &[i64], max_carry_s: i64, state_of: impl Fn(usize) -> usize) -> GroupBlock {
    let acc: [[i64; 3]; N] = attribute_states(offs, max_carry_s, state_of);
    let mut block = GroupBlock::zeros(3 * N);
    for p in 0..3 {
        let total: i64 = acc.iter().map(|row| row[p]).sum();
        if total == 0 {
            block.mask_range(p * N..(p + 1) * N);
            continue;
        }
        for (k, row) in acc.iter().enumerate() {
            block.values[p * N + k] = row[p] as f64;
        }
    }
    block
}

/// Per period seconds in each activity class (stationary, walking, running,
/// unknown).
pub fn activity_features(samples: &[ActivitySample], day_start: i64, opts: &ExtractOptions) -> GroupBlock {
    let offs = offsets(samples, day_start, |s| s.t);
    state_block::<4>(&offs, opts.max_carry_s, |i| samples[i].class.index())
}

/// Per period seconds in silence, voice and noise.
pub fn audio_features(samples: &[AudioSample], day_start: i64, opts: &ExtractOptions) -> GroupBlock {
    let offs = offsets(samples, day_start, |s| s.t);
    state_block::<3>(&offs, opts.max_carry_s, |i| samples[i].class.index())
}

pub const ACADEMIC_LEN: usize = 13;

/// Record fields, then a one-hot over {Mon-Thu, Fri, Sat, Sun} and a
/// deadline-day flag. A missing record masks the whole block.
pub fn academic_features(record: Option<&AcademicRecord>) -> GroupBlock {
    let mut block = GroupBlock::zeros(ACADEMIC_LEN);
    let Some(r) = record else {
        block.mask_range(0..ACADEMIC_LEN);
        return block;
    };
    let fields = [
        r.gpa,
        r.page_views as f64,
        r.contributions as f64,
        r.questions as f64,
        r.notes as f64,
        r.answers as f64,
        r.days_to_deadline as f64,
        r.class_hours,
    ];
    block.values[..8].copy_from_slice(&fields);
    let slot = match r.day_of_week() {
        0..=3 => 8,
        4 => 9,
        5 => 10,
        _ => 11,
    };
    block.values[slot] = 1.0;
    block.values[12] = if r.days_to_deadline == 0 { 1.0 } else { 0.0 };
    block
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ActivityClass, AudioClass};
    use chrono::NaiveDate;

    const H: i64 = 3600;
    const OPTS: ExtractOptions = ExtractOptions { max_carry_s: 600, moving_speed_mps: 0.5 };

    fn scan(t: i64, l: u32) -> WifiScan {
        WifiScan { t, location: LocationId(l) }
    }

    fn top() -> (Vec<LocationId>, Vec<LocationId>) {
        (vec![LocationId(0), LocationId(1), LocationId(2)], (0..7).map(LocationId).collect())
    }

    #[test]
    fn wifi_empty_night_is_masked() {
        let (u, g) = top();
        let scans: Vec<_> = (0..108).map(|k| scan(9 * H + k * 300, 0)).collect();
        let b = wifi_features(&scans, 0, TopLocations { user_top3: &u, global_top7: &g }, &OPTS);
        assert!(b.mask[..12].iter().all(|&m| m));
        assert!(b.values[..12].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wifi_single_location_all_day_period() {
        let (u, g) = top();
        let scans: Vec<_> = (0..108).map(|k| scan(9 * H + k * 300, 0)).collect();
        let b = wifi_features(&scans, 0, TopLocations { user_top3: &u, global_top7: &g }, &OPTS);
        let day = &b.values[12..24];
        assert_eq!(day[0], 1.0);
        assert_eq!(day[1], 0.0);
        assert_eq!(day[2], 9.0 * 3600.0);
        assert_eq!(day[5], 9.0 * 3600.0);
    }

    #[test]
    fn wifi_two_location_dwell_variance() {
        let (u, g) = top();
        // 6 h at location 0 then 3 h at location 1, scans every 5 minutes
        let scans: Vec<_> = (0..108)
            .map(|k| scan(9 * H + k * 300, if k < 72 { 0 } else { 1 }))
            .collect();
        let b = wifi_features(&scans, 0, TopLocations { user_top3: &u, global_top7: &g }, &OPTS);
        let xs = [21_600.0f64, 10_800.0];
        let mean = (xs[0] + xs[1]) / 2.0;
        let oracle = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 2.0;
        assert_eq!(b.values[12 + 1], oracle);
        assert_eq!(b.values[12 + 3], 10_800.0);
    }

    fn fix(t: i64, lat: f64, lon: f64) -> GpsFix {
        GpsFix { t, lat, lon, indoor: None }
    }

    #[test]
    fn gps_stationary_day_has_no_distance_or_area() {
        let fixes: Vec<_> = (0..10).map(|k| fix(10 * H + k * 600, 43.7, -72.29)).collect();
        let b = gps_features(&fixes, 0, &OPTS);
        let day = &b.values[10..20];
        assert_eq!(day[1], 0.0);
        assert_eq!(day[5], 0.0);
        assert_eq!(day[8], 10.0);
        assert_eq!(day[9], 0.0);
    }

    #[test]
    fn gps_quarter_circle_step() {
        let fixes = [fix(10 * H, 0.0, 0.0), fix(11 * H, 0.0, 90.0)];
        let b = gps_features(&fixes, 0, &OPTS);
        let expected = std::f64::consts::PI * 6371.0 / 2.0 * 1000.0;
        assert!((b.values[10] - expected).abs() < 1e-6);
        assert!((b.values[11] - expected).abs() < 1e-6);
        assert!((b.values[13] - expected / 3600.0).abs() < 1e-9);
    }

    #[test]
    fn gps_single_fix_masks_all_but_count() {
        let b = gps_features(&[fix(10 * H, 1.0, 1.0)], 0, &OPTS);
        assert_eq!(b.values[18], 1.0);
        assert!(!b.mask[18]);
        assert!(b.mask[10..18].iter().all(|&m| m));
        assert!(b.mask[19]);
    }

    #[test]
    fn gps_indoor_time_from_flags() {
        let mut fixes = vec![fix(10 * H, 1.0, 1.0), fix(10 * H + 600, 1.0, 1.0)];
        fixes[0].indoor = Some(true);
        fixes[1].indoor = Some(false);
        let b = gps_features(&fixes, 0, &OPTS);
        assert_eq!(b.values[16], 600.0);
        assert_eq!(b.values[17], 600.0);
    }

    fn comm(t: i64, kind: CommKind, d: f64) -> CommEvent {
        CommEvent { t, kind, duration_s: d }
    }

    #[test]
    fn social_counts() {
        let empty = social_features(&[], 0);
        assert!(empty.mask.iter().all(|&m| m));
        let evening_call = social_features(&[comm(20 * H, CommKind::Call, 120.0)], 0);
        assert_eq!(&evening_call.values[6..9], &[1.0, 0.0, 120.0]);
        let mixed = [
            comm(10 * H, CommKind::Sms, 0.0),
            comm(10 * H + 1, CommKind::Sms, 0.0),
            comm(11 * H, CommKind::Call, 60.0),
            comm(12 * H, CommKind::BluetoothContact, 0.0),
            comm(12 * H + 5, CommKind::BluetoothContact, 0.0),
            comm(13 * H, CommKind::BluetoothContact, 0.0),
        ];
        let b = social_features(&mixed, 0);
        assert_eq!(&b.values[3..6], &[3.0, 3.0, 60.0]);
    }

    fn iv(start: i64, end: i64, kind: PhoneState) -> PhoneStateInterval {
        PhoneStateInterval { start, end, kind }
    }

    #[test]
    fn phonelog_interval_across_morning_boundary() {
        let b = phonelog_features(&[iv(8 * H, 10 * H, PhoneState::Charging)], 0);
        assert_eq!(b.values[0], 3600.0);
        assert_eq!(b.values[3], 3600.0);
        assert_eq!(b.values[9], 7200.0);
        assert_eq!(b.values[12], 1.0);
    }

    #[test]
    fn phonelog_locked_exact_night() {
        let b = phonelog_features(&[iv(0, 9 * H, PhoneState::Locked)], 0);
        assert_eq!(b.values[1], 32_400.0);
        assert_eq!(b.values[4], 0.0);
        assert_eq!(b.values[7], 0.0);
        assert_eq!(b.values[13], 1.0);
        let none = phonelog_features(&[], 0);
        assert!(none.mask.iter().all(|&m| m) && none.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn phonelog_clips_to_the_day() {
        let day = 5 * SECONDS_PER_DAY;
        let b = phonelog_features(&[iv(day - H, day + H, PhoneState::Dark)], day);
        assert_eq!(b.values[2], 3600.0);
        assert_eq!(b.values[11], 3600.0);
    }

    #[test]
    fn activity_all_stationary() {
        let samples: Vec<_> = (0..144)
            .map(|k| ActivitySample { t: k * 600, class: ActivityClass::Stationary })
            .collect();
        let b = activity_features(&samples, 0, &OPTS);
        for p in 0..3 {
            assert_eq!(&b.values[p * 4 + 1..p * 4 + 4], &[0.0, 0.0, 0.0]);
        }
        assert_eq!(b.values[0] + b.values[4] + b.values[8], 86_400.0);
        assert!(activity_features(&[], 0, &OPTS).mask.iter().all(|&m| m));
    }

    #[test]
    fn audio_all_silence() {
        let samples: Vec<_> = (0..10).map(|k| AudioSample { t: 20 * H + k * 60, class: AudioClass::Silence }).collect();
        let b = audio_features(&samples, 0, &OPTS);
        assert_eq!(&b.values[7..9], &[0.0, 0.0]);
        assert!(b.values[6] > 0.0);
    }

    fn record(date: NaiveDate, days_to_deadline: u32) -> AcademicRecord {
        AcademicRecord {
            date,
            gpa: 3.2,
            page_views: 14,
            contributions: 3,
            questions: 1,
            notes: 2,
            answers: 4,
            days_to_deadline,
            class_hours: 2.5,
        }
    }

    #[test]
    fn academic_weekday_structure() {
        let sunday = NaiveDate::from_ymd_opt(2013, 3, 31).unwrap();
        let b = academic_features(Some(&record(sunday, 3)));
        assert_eq!(&b.values[8..12], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.values[12], 0.0);
        let due = academic_features(Some(&record(sunday, 0)));
        assert_eq!(due.values[12], 1.0);
        let wednesday = NaiveDate::from_ymd_opt(2013, 3, 27).unwrap();
        assert_eq!(&academic_features(Some(&record(wednesday, 1))).values[8..12], &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn academic_fields_pass_through() {
        let r = record(NaiveDate::from_ymd_opt(2013, 4, 5).unwrap(), 2);
        let b = academic_features(Some(&r));
        let oracle = [
            r.gpa,
            f64::from(r.page_views),
            f64::from(r.contributions),
            f64::from(r.questions),
            f64::from(r.notes),
            f64::from(r.answers),
            f64::from(r.days_to_deadline),
            r.class_hours,
        ];
        assert_eq!(&b.values[..8], &oracle);
        assert!(academic_features(None).mask.iter().all(|&m| m));
    }
}
