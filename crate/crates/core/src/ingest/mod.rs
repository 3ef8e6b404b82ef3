//! Raw sensor logs to validated, per-user canonical event streams.
//!
//! Every stream ends up sorted by `(user, time)`; phone-state intervals of
//! the same kind are merged; malformed and out-of-range rows are counted in
//! an [`IngestReport`] rather than silently lost. With
//! [`ParseOptions::strict`] the first such row becomes an error instead.

mod canonical;
mod intervals;
mod studentlife;
mod types;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::time::{date_from_local, LocalClock};

pub use canonical::{read_meta, write_canonical, write_meta};
pub use intervals::{dark_intervals_from_lux, merge_intervals};
pub use types::*;
pub use validate::{clean_stream, validate_stream, DropReason, Record, Row, RowIssue, ValidationReport, WifiRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("required stream {stream} missing: {path}")]
    MissingStream { stream: StreamKind, path: PathBuf },
    #[error("{file}:{line}: schema error: {message}")]
    SchemaError { file: String, line: u64, message: String },
    #[error("{file}:{line}: value out of range: {message}")]
    RangeError { file: String, line: u64, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The nine canonical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Wifi,
    Gps,
    Activity,
    Audio,
    PhoneState,
    Comm,
    Academic,
    EmaStress,
    Phq9,
}

impl StreamKind {
    pub const ALL: [StreamKind; 9] = [
        StreamKind::Wifi,
        StreamKind::Gps,
        StreamKind::Activity,
        StreamKind::Audio,
        StreamKind::PhoneState,
        StreamKind::Comm,
        StreamKind::Academic,
        StreamKind::EmaStress,
        StreamKind::Phq9,
    ];

    /// Canonical file name inside a dataset directory.
    pub fn file_name(self) -> &'static str {
        match self {
            StreamKind::Wifi => "wifi.csv",
            StreamKind::Gps => "gps.csv",
            StreamKind::Activity => "activity.csv",
            StreamKind::Audio => "audio.csv",
            StreamKind::PhoneState => "phonestate.csv",
            StreamKind::Comm => "comm.csv",
            StreamKind::Academic => "academic.csv",
            StreamKind::EmaStress => "ema_stress.csv",
            StreamKind::Phq9 => "phq9.csv",
        }
    }

    /// Canonical header columns.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            StreamKind::Wifi => &["user", "t", "location"],
            StreamKind::Gps => &["user", "t", "lat", "lon", "indoor"],
            StreamKind::Activity => &["user", "t", "class"],
            StreamKind::Audio => &["user", "t", "class"],
            StreamKind::PhoneState => &["user", "start", "end", "kind"],
            StreamKind::Comm => &["user", "t", "kind", "duration_s"],
            StreamKind::Academic => &[
                "user",
                "date",
                "gpa",
                "page_views",
                "contributions",
                "questions",
                "notes",
                "answers",
                "days_to_deadline",
                "class_hours",
            ],
            StreamKind::EmaStress => &["user", "t", "level"],
            StreamKind::Phq9 => &["user", "score"],
        }
    }

    fn stem(self) -> &'static str {
        self.file_name().trim_end_matches(".csv")
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stem())
    }
}

impl FromStr for StreamKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StreamKind::ALL
            .into_iter()
            .find(|k| k.stem() == s.trim())
            .ok_or_else(|| format!("unknown stream '{s}'"))
    }
}

/// Raw layout the dataset directory follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    #[default]
    Canonical,
    Studentlife,
}

impl FromStr for Adapter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "canonical" => Ok(Adapter::Canonical),
            "studentlife" => Ok(Adapter::Studentlife),
            other => Err(format!("unknown adapter '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Turn the first malformed or out-of-range row into an error.
    pub strict: bool,
    /// Streams whose absence is an error.
    pub required: Vec<StreamKind>,
    /// Light level below which a lux sample counts as dark (studentlife).
    pub dark_lux_threshold: f64,
    /// Longest a light sample is carried forward when deriving dark spans.
    pub max_carry_s: i64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            strict: false,
            required: Vec::new(),
            dark_lux_threshold: 10.0,
            max_carry_s: 600,
        }
    }
}

/// Contents of `dataset.meta`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub tz_offset_s: i64,
    pub study_start: Option<NaiveDate>,
    pub study_end: Option<NaiveDate>,
    /// Keys this crate does not interpret, kept for round trips.
    pub extra: BTreeMap<String, String>,
}

/// All streams for one participant, each sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserStreams {
    pub wifi: Vec<WifiScan>,
    pub gps: Vec<GpsFix>,
    pub activity: Vec<ActivitySample>,
    pub audio: Vec<AudioSample>,
    /// Merged per kind; sorted by `(start, kind)`.
    pub phone_state: Vec<PhoneStateInterval>,
    pub comm: Vec<CommEvent>,
    /// At most one record per day, sorted by date.
    pub academic: Vec<AcademicRecord>,
    pub ema_stress: Vec<EmaStress>,
    pub phq9: Option<Phq9Score>,
}

/// Immutable, validated dataset indexed by user.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub locations: LocationTable,
    pub users: BTreeMap<UserId, UserStreams>,
    study_range: Option<(NaiveDate, NaiveDate)>,
}

impl Dataset {
    pub fn clock(&self) -> LocalClock {
        LocalClock::new(self.meta.tz_offset_s)
    }

    /// Inclusive study range: `dataset.meta` values where given, otherwise the
    /// first and last local day that carries any event.
    pub fn study_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        self.study_range
    }

    pub fn roster(&self) -> Vec<UserId> {
        self.users.keys().cloned().collect()
    }

    pub fn user(&self, id: &UserId) -> Option<&UserStreams> {
        self.users.get(id)
    }

    /// Total number of records in one stream across users.
    pub fn stream_len(&self, kind: StreamKind) -> usize {
        self.users
            .values()
            .map(|u| match kind {
                StreamKind::Wifi => u.wifi.len(),
                StreamKind::Gps => u.gps.len(),
                StreamKind::Activity => u.activity.len(),
                StreamKind::Audio => u.audio.len(),
                StreamKind::PhoneState => u.phone_state.len(),
                StreamKind::Comm => u.comm.len(),
                StreamKind::Academic => u.academic.len(),
                StreamKind::EmaStress => u.ema_stress.len(),
                StreamKind::Phq9 => usize::from(u.phq9.is_some()),
            })
            .sum()
    }

    fn infer_study_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let clock = self.clock();
        let mut lo: Option<i64> = None;
        let mut hi: Option<i64> = None;
        let mut see = |t: i64| {
            let local = clock.to_local(t);
            lo = Some(lo.map_or(local, |v: i64| v.min(local)));
            hi = Some(hi.map_or(local, |v: i64| v.max(local)));
        };
        for u in self.users.values() {
            u.wifi.iter().for_each(|e| see(e.t));
            u.gps.iter().for_each(|e| see(e.t));
            u.activity.iter().for_each(|e| see(e.t));
            u.audio.iter().for_each(|e| see(e.t));
            u.comm.iter().for_each(|e| see(e.t));
            u.ema_stress.iter().for_each(|e| see(e.t));
            u.phone_state.iter().for_each(|e| {
                see(e.start);
                see(e.end - 1);
            });
        }
        let mut range = lo.zip(hi).map(|(a, b)| (date_from_local(a), date_from_local(b)));
        for u in self.users.values() {
            for rec in &u.academic {
                range = Some(match range {
                    Some((a, b)) => (a.min(rec.date), b.max(rec.date)),
                    None => (rec.date, rec.date),
                });
            }
        }
        let start = self.meta.study_start.or(range.map(|r| r.0))?;
        let end = self.meta.study_end.or(range.map(|r| r.1))?;
        Some((start, end))
    }
}

/// Row accounting for every stream plus interval merges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub streams: BTreeMap<StreamKind, ValidationReport>,
    /// Raw phone-state intervals absorbed by merging.
    pub merged_intervals: usize,
    /// Streams whose source file was absent.
    pub missing: BTreeSet<StreamKind>,
}

impl IngestReport {
    pub fn total_dropped(&self) -> usize {
        self.streams.values().map(|r| r.dropped()).sum()
    }

    /// First dropped row that strict mode treats as fatal.
    fn first_fatal(&self) -> Option<(StreamKind, &RowIssue)> {
        self.streams.iter().find_map(|(k, r)| {
            r.issues
                .iter()
                .find(|i| i.reason != DropReason::Duplicate)
                .map(|i| (*k, i))
        })
    }
}

/// Result of [`parse_dataset`].
#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: Dataset,
    pub report: IngestReport,
}

/// Collects rows for every stream and turns them into a [`Dataset`].
/// Used both by the file adapters and for in-memory construction.
#[derive(Debug, Clone, Default)]
pub struct DatasetBuilder {
    pub meta: DatasetMeta,
    pub wifi: Vec<Row<WifiRecord>>,
    pub gps: Vec<Row<GpsFix>>,
    pub activity: Vec<Row<ActivitySample>>,
    pub audio: Vec<Row<AudioSample>>,
    pub phone_state: Vec<Row<PhoneStateInterval>>,
    pub comm: Vec<Row<CommEvent>>,
    pub academic: Vec<Row<AcademicRecord>>,
    pub ema_stress: Vec<Row<EmaStress>>,
    pub phq9: Vec<Row<Phq9Score>>,
    /// Users that belong to the roster even without any rows.
    pub roster: BTreeSet<UserId>,
    pre_reports: BTreeMap<StreamKind, ValidationReport>,
    missing: BTreeSet<StreamKind>,
}

fn row<E>(user: &UserId, event: E) -> Row<E> {
    Row { user: user.clone(), line: 0, event }
}

impl DatasetBuilder {
    pub fn new(meta: DatasetMeta) -> Self {
        Self { meta, ..Default::default() }
    }

    /// Appends another builder's rows and roster. `other.meta` is ignored.
    pub fn extend(&mut self, other: DatasetBuilder) {
        self.wifi.extend(other.wifi);
        self.gps.extend(other.gps);
        self.activity.extend(other.activity);
        self.audio.extend(other.audio);
        self.phone_state.extend(other.phone_state);
        self.comm.extend(other.comm);
        self.academic.extend(other.academic);
        self.ema_stress.extend(other.ema_stress);
        self.phq9.extend(other.phq9);
        self.roster.extend(other.roster);
    }

    pub fn push_wifi(&mut self, user: &UserId, t: i64, location: &str) {
        self.wifi.push(row(user, WifiRecord { t, location: location.to_string() }));
    }
    pub fn push_gps(&mut self, user: &UserId, fix: GpsFix) {
        self.gps.push(row(user, fix));
    }
    pub fn push_activity(&mut self, user: &UserId, t: i64, class: ActivityClass) {
        self.activity.push(row(user, ActivitySample { t, class }));
    }
    pub fn push_audio(&mut self, user: &UserId, t: i64, class: AudioClass) {
        self.audio.push(row(user, AudioSample { t, class }));
    }
    pub fn push_phone_state(&mut self, user: &UserId, start: i64, end: i64, kind: PhoneState) {
        self.phone_state.push(row(user, PhoneStateInterval { start, end, kind }));
    }
    pub fn push_comm(&mut self, user: &UserId, t: i64, kind: CommKind, duration_s: f64) {
        self.comm.push(row(user, CommEvent { t, kind, duration_s }));
    }
    pub fn push_academic(&mut self, user: &UserId, record: AcademicRecord) {
        self.academic.push(row(user, record));
    }
    pub fn push_ema(&mut self, user: &UserId, t: i64, level: u8) {
        self.ema_stress.push(row(user, EmaStress { t, level }));
    }
    pub fn push_phq9(&mut self, user: &UserId, score: u8) {
        self.phq9.push(row(user, Phq9Score(score)));
    }
    pub fn add_user(&mut self, user: &UserId) {
        self.roster.insert(user.clone());
    }

    pub(crate) fn note_parse_report(&mut self, kind: StreamKind, report: ValidationReport) {
        self.pre_reports.entry(kind).or_default().absorb(report);
    }

    pub(crate) fn note_missing(&mut self, kind: StreamKind) {
        self.missing.insert(kind);
    }

    /// Validates, sorts, deduplicates and merges everything collected so far.
    pub fn build(self) -> (Dataset, IngestReport) {
        let DatasetBuilder {
            meta,
            wifi,
            gps,
            activity,
            audio,
            phone_state,
            comm,
            academic,
            ema_stress,
            phq9,
            roster,
            mut pre_reports,
            missing,
        } = self;

        let mut report = IngestReport { missing, ..Default::default() };
        let mut finish = |kind: StreamKind, r: ValidationReport| {
            let mut base = pre_reports.remove(&kind).unwrap_or_default();
            base.absorb(r);
            report.streams.insert(kind, base);
        };

        let (wifi, r) = clean_stream(wifi);
        finish(StreamKind::Wifi, r);
        let (gps, r) = clean_stream(gps);
        finish(StreamKind::Gps, r);
        let (activity, r) = clean_stream(activity);
        finish(StreamKind::Activity, r);
        let (audio, r) = clean_stream(audio);
        finish(StreamKind::Audio, r);
        let (phone_state, r) = clean_stream(phone_state);
        finish(StreamKind::PhoneState, r);
        let (comm, r) = clean_stream(comm);
        finish(StreamKind::Comm, r);
        let (academic, r) = clean_stream(academic);
        finish(StreamKind::Academic, r);
        let (ema_stress, r) = clean_stream(ema_stress);
        finish(StreamKind::EmaStress, r);
        let (phq9, r) = clean_stream(phq9);
        finish(StreamKind::Phq9, r);

        let locations = LocationTable::from_names(wifi.iter().map(|r| r.event.location.clone()));
        let mut users: BTreeMap<UserId, UserStreams> =
            roster.into_iter().map(|u| (u, UserStreams::default())).collect();
        macro_rules! distribute {
            ($rows:expr, $field:ident, $map:expr) => {
                for r in $rows {
                    let ev = $map(&r.event);
                    users.entry(r.user).or_default().$field.push(ev);
                }
            };
        }
        distribute!(wifi, wifi, |e: &WifiRecord| WifiScan {
            t: e.t,
            location: locations.id(&e.location).expect("interned above"),
        });
        distribute!(gps, gps, |e: &GpsFix| *e);
        distribute!(activity, activity, |e: &ActivitySample| *e);
        distribute!(audio, audio, |e: &AudioSample| *e);
        distribute!(phone_state, phone_state, |e: &PhoneStateInterval| *e);
        distribute!(comm, comm, |e: &CommEvent| *e);
        distribute!(academic, academic, |e: &AcademicRecord| *e);
        distribute!(ema_stress, ema_stress, |e: &EmaStress| *e);
        for r in phq9 {
            users.entry(r.user).or_default().phq9 = Some(r.event);
        }
        for streams in users.values_mut() {
            let before = streams.phone_state.len();
            streams.phone_state = merge_intervals(&streams.phone_state);
            report.merged_intervals += before - streams.phone_state.len();
        }

        let mut dataset = Dataset { meta, locations, users, study_range: None };
        dataset.study_range = dataset.infer_study_range();
        (dataset, report)
    }
}

/// Reads a dataset directory through the given adapter.
pub fn parse_dataset(root: &Path, adapter: Adapter, options: &ParseOptions) -> Result<Parsed, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        });
    }
    let builder = match adapter {
        Adapter::Canonical => canonical::read_dir(root)?,
        Adapter::Studentlife => studentlife::read_dir(root, options)?,
    };
    for &kind in &options.required {
        if builder.missing.contains(&kind) {
            return Err(IngestError::MissingStream {
                stream: kind,
                path: root.join(kind.file_name()),
            });
        }
    }
    let (dataset, report) = builder.build();
    if options.strict {
        if let Some((kind, issue)) = report.first_fatal() {
            let file = issue_file(adapter, kind);
            return Err(match issue.reason {
                DropReason::Malformed => IngestError::SchemaError {
                    file,
                    line: issue.line,
                    message: issue.message.clone(),
                },
                _ => IngestError::RangeError {
                    file,
                    line: issue.line,
                    message: issue.message.clone(),
                },
            });
        }
    }
    Ok(Parsed { dataset, report })
}

fn issue_file(adapter: Adapter, kind: StreamKind) -> String {
    match adapter {
        Adapter::Canonical => kind.file_name().to_string(),
        Adapter::Studentlife => format!("{kind} stream"),
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn single_wifi_row_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "wifi.csv", "user,t,location\nu1,1364356800,sudikoff\n");
        let parsed = parse_dataset(dir.path(), Adapter::Canonical, &ParseOptions::default()).unwrap();
        let u1 = UserId::new("u1").unwrap();
        let streams = parsed.dataset.user(&u1).unwrap();
        assert_eq!(streams.wifi.len(), 1);
        assert_eq!(streams.wifi[0].t, 1_364_356_800);
        assert_eq!(parsed.dataset.locations.name(streams.wifi[0].location), "sudikoff");
        assert_eq!(parsed.dataset.stream_len(StreamKind::Wifi), 1);
    }

    #[test]
    fn stress_level_zero_is_a_range_error_in_strict_mode() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ema_stress.csv", "user,t,level\nu1,100,3\nu1,200,0\n");
        let opts = ParseOptions { strict: true, ..Default::default() };
        match parse_dataset(dir.path(), Adapter::Canonical, &opts) {
            Err(IngestError::RangeError { file, line, .. }) => {
                assert_eq!(file, "ema_stress.csv");
                assert_eq!(line, 3);
            }
            other => panic!("expected RangeError, got {other:?}"),
        }
        let lenient = parse_dataset(dir.path(), Adapter::Canonical, &ParseOptions::default()).unwrap();
        let r = &lenient.report.streams[&StreamKind::EmaStress];
        assert_eq!((r.total, r.kept, r.dropped()), (2, 1, 1));
    }

    #[test]
    fn overlapping_charging_rows_merge_at_ingest() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "phonestate.csv",
            "user,start,end,kind\nu1,0,100,charging\nu1,50,200,charging\n",
        );
        let parsed = parse_dataset(dir.path(), Adapter::Canonical, &ParseOptions::default()).unwrap();
        let u = parsed.dataset.user(&UserId::new("u1").unwrap()).unwrap();
        assert_eq!(
            u.phone_state,
            vec![PhoneStateInterval { start: 0, end: 200, kind: PhoneState::Charging }]
        );
        assert_eq!(parsed.report.merged_intervals, 1);
    }

    #[test]
    fn missing_required_stream() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ParseOptions { required: vec![StreamKind::EmaStress], ..Default::default() };
        let err = parse_dataset(dir.path(), Adapter::Canonical, &opts).unwrap_err();
        assert!(matches!(err, IngestError::MissingStream { stream: StreamKind::EmaStress, .. }));
    }

    #[test]
    fn header_mismatch_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "gps.csv", "user,t,latitude,lon,indoor\n");
        let err = parse_dataset(dir.path(), Adapter::Canonical, &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::SchemaError { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_rows_are_counted_not_lost() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "activity.csv",
            "user,t,class\nu1,10,walking\nu1,abc,walking\nu1,20\nu1,30,flying\n",
        );
        let parsed = parse_dataset(dir.path(), Adapter::Canonical, &ParseOptions::default()).unwrap();
        let r = &parsed.report.streams[&StreamKind::Activity];
        assert_eq!(r.total, 4);
        assert_eq!(r.kept, 1);
        assert_eq!(r.dropped_for(DropReason::Malformed), 2);
        assert_eq!(r.dropped_for(DropReason::OutOfRange), 1);

        let strict = ParseOptions { strict: true, ..Default::default() };
        let err = parse_dataset(dir.path(), Adapter::Canonical, &strict).unwrap_err();
        assert!(matches!(err, IngestError::SchemaError { line: 3, .. }), "{err}");
    }

    #[test]
    fn study_range_falls_back_to_event_days() {
        let mut b = DatasetBuilder::new(DatasetMeta::default());
        let u = UserId::new("u").unwrap();
        b.push_ema(&u, 86_400 * 3 + 5, 2);
        b.push_activity(&u, 86_400 * 5 + 5, ActivityClass::Walking);
        let (ds, _) = b.build();
        let (a, z) = ds.study_range().unwrap();
        assert_eq!((z - a).num_days(), 2);
    }
}
