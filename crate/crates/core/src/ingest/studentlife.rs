//! Adapter for the published StudentLife directory layout.
//!
//! Per-user sensing files (`sensing/<stream>/<stream>_uXX.csv`), call/SMS/app
//! logs, EMA stress answers as JSON, the PHQ-9 survey and the education
//! folder are mapped onto canonical rows. Columns are located by header
//! name, so column order and trailing extras do not matter.
//!
//! Mapping notes:
//! - WiFi `in[x]` and `near[x;y]` both resolve to the first listed location.
//! - GPS fixes from the `network` provider over WiFi count as indoor, `gps`
//!   provider fixes as outdoor, anything else as unknown.
//! - Every app-usage and Bluetooth row is one point event.
//! - Only the post-study PHQ-9 is used; item answers map 0..=3 from
//!   "Not at all" .. "Nearly every day".
//! - Academic records are emitted for every day covered by
//!   `education/deadlines.csv`; class hours are not part of the public
//!   release and are left at zero.
//! - Without `dataset.meta` the study clock defaults to UTC-4 (Dartmouth,
//!   spring term).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::canonical::read_meta;
use super::*;

const DEFAULT_TZ_OFFSET_S: i64 = -4 * 3600;

struct Table {
    file: String,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, Vec<String>)>,
    malformed: ValidationReport,
}

impl Table {
    fn col(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.columns.get(&n.to_ascii_lowercase()).copied())
    }
}

fn read_table(path: &Path) -> Result<Table, IngestError> {
    let file_name = path.display().to_string();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = reader.headers().map_err(|e| IngestError::SchemaError {
        file: file_name.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let columns = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect();
    let mut rows = Vec::new();
    let mut malformed = ValidationReport::default();
    for rec in reader.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line());
                rows.push((line, r.iter().map(|s| s.trim().to_string()).collect()));
            }
            Err(e) => {
                malformed.total += 1;
                let line = e.position().map_or(0, |p| p.line());
                malformed.record_drop(line, DropReason::Malformed, format!("{file_name}: {e}"));
            }
        }
    }
    Ok(Table { file: file_name, columns, rows, malformed })
}

/// `<dir>/<prefix>uXX.<ext>` files keyed by user id.
fn user_files(dir: &Path, prefix: &str, ext: &str) -> Vec<(UserId, PathBuf)> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<(UserId, PathBuf)> = entries
        .filter_map(Result::ok)
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let stem = name.strip_prefix(prefix)?.strip_suffix(ext)?;
            let user = UserId::new(stem)?;
            Some((user, e.path()))
        })
        .collect();
    out.sort();
    out
}

/// Converts each row of every per-user file in `dir` with `convert`.
/// Rows where `convert` fails are counted as malformed.
fn per_user_rows<E>(
    builder: &mut DatasetBuilder,
    kind: StreamKind,
    dir: &Path,
    prefix: &str,
    mut convert: impl FnMut(&Table, &[String]) -> Result<Option<E>, String>,
) -> Result<Vec<Row<E>>, IngestError> {
    let files = user_files(dir, prefix, ".csv");
    if files.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut report = ValidationReport::default();
    for (user, path) in files {
        let table = read_table(&path)?;
        report.absorb(table.malformed.clone());
        for (line, fields) in &table.rows {
            match convert(&table, fields) {
                Ok(Some(event)) => out.push(Row { user: user.clone(), line: *line, event }),
                Ok(None) => {}
                Err(msg) => {
                    report.total += 1;
                    report.record_drop(*line, DropReason::Malformed, format!("{}: {msg}", table.file));
                }
            }
        }
    }
    builder.note_parse_report(kind, report);
    Ok(out)
}

fn get<'a>(table: &Table, fields: &'a [String], names: &[&str]) -> Result<&'a str, String> {
    let i = table.col(names).ok_or_else(|| format!("no column named {}", names[0]))?;
    fields
        .get(i)
        .map(String::as_str)
        .ok_or_else(|| format!("row has no column {}", names[0]))
}

fn epoch(table: &Table, fields: &[String], names: &[&str]) -> Result<i64, String> {
    let s = get(table, fields, names)?;
    s.parse::<i64>()
        .or_else(|_| s.parse::<f64>().map(|v| v as i64))
        .map_err(|_| format!("'{s}' is not a timestamp"))
}

fn wifi_location(raw: &str) -> Option<String> {
    let inner = raw
        .strip_prefix("in[")
        .or_else(|| raw.strip_prefix("near["))
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(raw);
    let first = inner.split(';').next()?.trim();
    (!first.is_empty()).then(|| first.to_string())
}

fn phq_item(answer: &str) -> Option<u8> {
    match answer.trim().to_ascii_lowercase().as_str() {
        "not at all" => Some(0),
        "several days" => Some(1),
        "more than half the days" => Some(2),
        "nearly every day" => Some(3),
        _ => None,
    }
}

pub(super) fn read_dir(root: &Path, options: &ParseOptions) -> Result<DatasetBuilder, IngestError> {
    let meta_path = root.join("dataset.meta");
    let meta = if meta_path.exists() {
        read_meta(&meta_path)?
    } else {
        DatasetMeta { tz_offset_s: DEFAULT_TZ_OFFSET_S, ..Default::default() }
    };
    let mut b = DatasetBuilder::new(meta);
    let sensing = root.join("sensing");

    let wifi_dir = sensing.join("wifi_location");
    let rows = per_user_rows(&mut b, StreamKind::Wifi, &wifi_dir, "wifi_location_", |t, f| {
        let time = epoch(t, f, &["time", "timestamp"])?;
        let loc = get(t, f, &["location"])?;
        Ok(wifi_location(loc).map(|location| WifiRecord { t: time, location }))
    })?;
    b.wifi.extend(rows);

    let rows = per_user_rows(&mut b, StreamKind::Gps, &sensing.join("gps"), "gps_", |t, f| {
        let lat = get(t, f, &["latitude"])?.parse::<f64>().map_err(|e| e.to_string())?;
        let lon = get(t, f, &["longitude"])?.parse::<f64>().map_err(|e| e.to_string())?;
        let provider = get(t, f, &["provider"]).unwrap_or("");
        let network = get(t, f, &["network_type"]).unwrap_or("");
        let indoor = match (provider, network) {
            ("network", "wifi") => Some(true),
            ("gps", _) => Some(false),
            _ => None,
        };
        Ok(Some(GpsFix { t: epoch(t, f, &["time", "timestamp"])?, lat, lon, indoor }))
    })?;
    b.gps.extend(rows);

    let rows = per_user_rows(&mut b, StreamKind::Activity, &sensing.join("activity"), "activity_", |t, f| {
        let code = get(t, f, &["activity inference", "activity_inference"])?;
        let class = match code {
            "0" => ActivityClass::Stationary,
            "1" => ActivityClass::Walking,
            "2" => ActivityClass::Running,
            "3" => ActivityClass::Unknown,
            other => return Err(format!("activity code '{other}'")),
        };
        Ok(Some(ActivitySample { t: epoch(t, f, &["timestamp", "time"])?, class }))
    })?;
    b.activity.extend(rows);

    let rows = per_user_rows(&mut b, StreamKind::Audio, &sensing.join("audio"), "audio_", |t, f| {
        let code = get(t, f, &["audio inference", "audio_inference"])?;
        let class = match code {
            "0" => AudioClass::Silence,
            "1" => AudioClass::Voice,
            "2" => AudioClass::Noise,
            other => return Err(format!("audio code '{other}'")),
        };
        Ok(Some(AudioSample { t: epoch(t, f, &["timestamp", "time"])?, class }))
    })?;
    b.audio.extend(rows);

    let mut phone = Vec::new();
    for (sub, prefix, kind) in [
        ("phonecharge", "phonecharge_", PhoneState::Charging),
        ("phonelock", "phonelock_", PhoneState::Locked),
        ("dark", "dark_", PhoneState::Dark),
    ] {
        let rows = per_user_rows(&mut b, StreamKind::PhoneState, &sensing.join(sub), prefix, |t, f| {
            let start = epoch(t, f, &["start", "start_timestamp"])?;
            let end = epoch(t, f, &["end", "end_timestamp"])?;
            Ok(Some(PhoneStateInterval { start, end, kind }))
        })?;
        phone.extend(rows);
    }
    // Raw lux traces, when present, become dark intervals.
    let light_dir = sensing.join("light");
    let mut lux: BTreeMap<UserId, Vec<(i64, f64)>> = BTreeMap::new();
    let lux_rows = per_user_rows(&mut b, StreamKind::PhoneState, &light_dir, "light_", |t, f| {
        let v = get(t, f, &["lux", "light"])?.parse::<f64>().map_err(|e| e.to_string())?;
        Ok(Some((epoch(t, f, &["timestamp", "time"])?, v)))
    })?;
    for r in lux_rows {
        lux.entry(r.user).or_default().push(r.event);
    }
    for (user, mut samples) in lux {
        samples.sort_by_key(|s| s.0);
        for (start, end) in dark_intervals_from_lux(&samples, options.dark_lux_threshold, options.max_carry_s) {
            phone.push(Row { user: user.clone(), line: 0, event: PhoneStateInterval { start, end, kind: PhoneState::Dark } });
        }
    }
    b.phone_state.extend(phone);

    let mut comm = Vec::new();
    comm.extend(per_user_rows(&mut b, StreamKind::Comm, &root.join("sms"), "sms_", |t, f| {
        Ok(Some(CommEvent { t: epoch(t, f, &["timestamp"])?, kind: CommKind::Sms, duration_s: 0.0 }))
    })?);
    comm.extend(per_user_rows(&mut b, StreamKind::Comm, &root.join("call_log"), "call_log_", |t, f| {
        let dur = get(t, f, &["calls_duration"]).unwrap_or("");
        if dur.is_empty() {
            return Ok(None);
        }
        let duration_s = dur.parse::<f64>().map_err(|e| e.to_string())?;
        Ok(Some(CommEvent { t: epoch(t, f, &["timestamp"])?, kind: CommKind::Call, duration_s }))
    })?);
    comm.extend(per_user_rows(&mut b, StreamKind::Comm, &root.join("app_usage"), "running_app_", |t, f| {
        Ok(Some(CommEvent { t: epoch(t, f, &["timestamp"])?, kind: CommKind::AppUsage, duration_s: 0.0 }))
    })?);
    comm.extend(per_user_rows(&mut b, StreamKind::Comm, &sensing.join("bluetooth"), "bt_", |t, f| {
        Ok(Some(CommEvent {
            t: epoch(t, f, &["time", "timestamp"])?,
            kind: CommKind::BluetoothContact,
            duration_s: 0.0,
        }))
    })?);
    b.comm.extend(comm);

    read_ema(&mut b, &root.join("EMA").join("response").join("Stress"))?;
    read_phq9(&mut b, &root.join("survey").join("PHQ-9.csv"))?;
    read_education(&mut b, &root.join("education"))?;

    for (kind, present) in [
        (StreamKind::Wifi, wifi_dir.is_dir()),
        (StreamKind::Gps, sensing.join("gps").is_dir()),
        (StreamKind::Activity, sensing.join("activity").is_dir()),
        (StreamKind::Audio, sensing.join("audio").is_dir()),
        (StreamKind::EmaStress, root.join("EMA").join("response").join("Stress").is_dir()),
        (StreamKind::Phq9, root.join("survey").join("PHQ-9.csv").is_file()),
        (StreamKind::Academic, root.join("education").join("deadlines.csv").is_file()),
    ] {
        if !present {
            b.note_missing(kind);
        }
    }
    Ok(b)
}

fn read_ema(b: &mut DatasetBuilder, dir: &Path) -> Result<(), IngestError> {
    let mut report = ValidationReport::default();
    for (user, path) in user_files(dir, "Stress_", ".json") {
        let text = std::fs::read_to_string(&path).map_err(|source| IngestError::Io { path: path.clone(), source })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| IngestError::SchemaError {
            file: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let Some(items) = value.as_array() else {
            return Err(IngestError::SchemaError {
                file: path.display().to_string(),
                line: 1,
                message: "expected a JSON array of responses".into(),
            });
        };
        for (i, item) in items.iter().enumerate() {
            let Some(level) = item.get("level") else {
                // Prompt without an answer.
                continue;
            };
            let level = level
                .as_i64()
                .or_else(|| level.as_str().and_then(|s| s.trim().parse().ok()));
            let t = item.get("resp_time").and_then(serde_json::Value::as_i64);
            match (level, t) {
                (Some(level), Some(t)) => {
                    let level = u8::try_from(level).unwrap_or(u8::MAX);
                    b.ema_stress.push(Row { user: user.clone(), line: i as u64 + 1, event: EmaStress { t, level } });
                }
                _ => {
                    report.total += 1;
                    report.record_drop(
                        i as u64 + 1,
                        DropReason::Malformed,
                        format!("{}: response {} lacks a numeric level or resp_time", path.display(), i),
                    );
                }
            }
        }
    }
    b.note_parse_report(StreamKind::EmaStress, report);
    Ok(())
}

fn read_phq9(b: &mut DatasetBuilder, path: &Path) -> Result<(), IngestError> {
    if !path.is_file() {
        return Ok(());
    }
    let table = read_table(path)?;
    let mut report = table.malformed.clone();
    let (Some(uid), Some(kind)) = (table.col(&["uid"]), table.col(&["type"])) else {
        return Err(IngestError::SchemaError {
            file: table.file.clone(),
            line: 1,
            message: "PHQ-9 survey needs uid and type columns".into(),
        });
    };
    let response_col = table.col(&["response"]);
    let item_cols: Vec<usize> = (0..table.columns.len())
        .filter(|&i| i != uid && i != kind && Some(i) != response_col)
        .collect();
    for (line, fields) in &table.rows {
        if fields.get(kind).map(String::as_str) != Some("post") {
            continue;
        }
        let Some(user) = fields.get(uid).and_then(|u| UserId::new(u.as_str())) else {
            report.total += 1;
            report.record_drop(*line, DropReason::Malformed, "missing uid".into());
            continue;
        };
        let items: Option<Vec<u8>> = item_cols
            .iter()
            .map(|&i| fields.get(i).and_then(|a| phq_item(a)))
            .collect();
        match items {
            Some(items) if items.len() == 9 => {
                let score = items.iter().sum();
                b.phq9.push(Row { user, line: *line, event: Phq9Score(score) });
            }
            _ => {
                report.total += 1;
                report.record_drop(*line, DropReason::Malformed, "incomplete PHQ-9 answers".into());
            }
        }
    }
    b.note_parse_report(StreamKind::Phq9, report);
    Ok(())
}

fn read_education(b: &mut DatasetBuilder, dir: &Path) -> Result<(), IngestError> {
    let deadlines_path = dir.join("deadlines.csv");
    if !deadlines_path.is_file() {
        return Ok(());
    }
    let deadlines = read_table(&deadlines_path)?;
    let mut gpa: HashMap<String, f64> = HashMap::new();
    if dir.join("grades.csv").is_file() {
        let t = read_table(&dir.join("grades.csv"))?;
        if let (Some(u), Some(g)) = (t.col(&["uid"]), t.col(&["gpa all"])) {
            for (_, f) in &t.rows {
                if let (Some(user), Some(v)) = (f.get(u), f.get(g).and_then(|s| s.parse::<f64>().ok())) {
                    gpa.insert(user.clone(), v);
                }
            }
        }
    }
    let mut piazza: HashMap<String, [u32; 5]> = HashMap::new();
    if dir.join("piazza.csv").is_file() {
        let t = read_table(&dir.join("piazza.csv"))?;
        let cols: Vec<Option<usize>> = ["views", "contributions", "questions", "notes", "answers"]
            .iter()
            .map(|c| t.col(&[c]))
            .collect();
        if let Some(u) = t.col(&["uid"]) {
            for (_, f) in &t.rows {
                let mut v = [0u32; 5];
                for (slot, c) in v.iter_mut().zip(&cols) {
                    *slot = c.and_then(|i| f.get(i)).and_then(|s| s.parse().ok()).unwrap_or(0);
                }
                if let Some(user) = f.get(u) {
                    piazza.insert(user.clone(), v);
                }
            }
        }
    }

    let mut dates: Vec<(usize, NaiveDate)> = deadlines
        .columns
        .iter()
        .filter_map(|(name, &i)| NaiveDate::parse_from_str(name, "%Y-%m-%d").ok().map(|d| (i, d)))
        .collect();
    dates.sort_by_key(|(_, d)| *d);
    let uid = deadlines.col(&["uid"]).ok_or_else(|| IngestError::SchemaError {
        file: deadlines.file.clone(),
        line: 1,
        message: "deadlines.csv needs a uid column".into(),
    })?;
    for (line, fields) in &deadlines.rows {
        let Some(user_raw) = fields.get(uid) else { continue };
        let Some(user) = UserId::new(user_raw.as_str()) else { continue };
        let due: Vec<NaiveDate> = dates
            .iter()
            .filter(|(i, _)| fields.get(*i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(0.0) > 0.0)
            .map(|(_, d)| *d)
            .collect();
        let p = piazza.get(user_raw).copied().unwrap_or_default();
        for &(_, date) in &dates {
            let days_to_deadline = due
                .iter()
                .find(|d| **d >= date)
                .map(|d| (*d - date).num_days())
                .or_else(|| due.last().map(|d| (date - *d).num_days()))
                .unwrap_or(0) as u32;
            b.academic.push(Row {
                user: user.clone(),
                line: *line,
                event: AcademicRecord {
                    date,
                    gpa: gpa.get(user_raw).copied().unwrap_or(0.0),
                    page_views: p[0],
                    contributions: p[1],
                    questions: p[2],
                    notes: p[3],
                    answers: p[4],
                    days_to_deadline,
                    class_hours: 0.0,
                },
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn put(root: &Path, rel: &str, body: &str) {
        let p = root.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, body).unwrap();
    }

    #[test]
    fn maps_a_small_studentlife_tree() {
        let dir = tempfile::tempdir().unwrap();
        let r = dir.path();
        put(r, "sensing/wifi_location/wifi_location_u00.csv", "time,location\n1364400000,in[sudikoff]\n1364400600,near[baker;berry]\n");
        put(
            r,
            "sensing/gps/gps_u00.csv",
            "time,provider,network_type,accuracy,latitude,longitude,altitude,bearing,speed,travelstate\n1364400000,gps,,10,43.70,-72.29,0,0,0,stationary\n",
        );
        put(r, "sensing/activity/activity_u00.csv", "timestamp, activity inference\n1364400000,1\n1364400010,9\n");
        put(r, "sensing/audio/audio_u00.csv", "timestamp, audio inference\n1364400000,2\n");
        put(r, "sensing/phonecharge/phonecharge_u00.csv", "start,end\n1364400000,1364403600\n");
        put(r, "sensing/light/light_u00.csv", "timestamp,lux\n1364400000,1\n1364400300,200\n");
        put(r, "sms/sms_u00.csv", "id,device,timestamp\n1,x,1364400100\n");
        put(r, "call_log/call_log_u00.csv", "id,timestamp,CALLS_duration\n1,1364400200,42\n2,1364400300,\n");
        put(r, "EMA/response/Stress/Stress_u00.json", r#"[{"level":"4","resp_time":1364400500},{"null":"x","resp_time":1}]"#);
        put(
            r,
            "survey/PHQ-9.csv",
            "uid,type,q1,q2,q3,q4,q5,q6,q7,q8,q9,Response\nu00,post,Not at all,Several days,Several days,Nearly every day,Not at all,Not at all,Not at all,Not at all,More than half the days,Somewhat difficult\nu00,pre,Not at all,Not at all,Not at all,Not at all,Not at all,Not at all,Not at all,Not at all,Not at all,x\n",
        );
        put(r, "education/deadlines.csv", "uid,2013-03-27,2013-03-28,2013-03-29\nu00,0,0,1\n");
        put(r, "education/grades.csv", "uid, gpa all, gpa 13s, cs 65\nu00,3.5,3.4,3.9\n");

        let parsed = parse_dataset(r, Adapter::Studentlife, &ParseOptions::default()).unwrap();
        let ds = &parsed.dataset;
        assert_eq!(ds.meta.tz_offset_s, DEFAULT_TZ_OFFSET_S);
        let u = ds.user(&UserId::new("u00").unwrap()).unwrap();
        let names: Vec<_> = u.wifi.iter().map(|w| ds.locations.name(w.location)).collect();
        assert_eq!(names, vec!["sudikoff", "baker"]);
        assert_eq!(u.gps[0].indoor, Some(false));
        assert_eq!(u.activity.len(), 1);
        assert_eq!(parsed.report.streams[&StreamKind::Activity].dropped_for(DropReason::Malformed), 1);
        assert_eq!(u.audio[0].class, AudioClass::Noise);
        assert!(u.phone_state.iter().any(|p| p.kind == PhoneState::Dark && p.start == 1_364_400_000 && p.end == 1_364_400_300));
        assert_eq!(u.comm.iter().filter(|c| c.kind == CommKind::Call).count(), 1);
        assert_eq!(u.ema_stress, vec![EmaStress { t: 1_364_400_500, level: 4 }]);
        assert_eq!(u.phq9, Some(Phq9Score(1 + 1 + 3 + 2)));
        assert_eq!(u.academic.len(), 3);
        assert_eq!(u.academic[0].days_to_deadline, 2);
        assert_eq!(u.academic[2].days_to_deadline, 0);
        assert_eq!(u.academic[0].gpa, 3.5);
    }
}
