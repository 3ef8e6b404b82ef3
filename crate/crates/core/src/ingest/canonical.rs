//! The canonical directory layout: one CSV per stream plus `dataset.meta`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;

use super::*;

pub(super) enum RowFault {
    Malformed(String),
    OutOfRange(String),
}

type FieldResult<T> = Result<T, RowFault>;

pub(super) fn field<'a>(rec: &'a StringRecord, i: usize, name: &str) -> FieldResult<&'a str> {
    rec.get(i)
        .map(str::trim)
        .ok_or_else(|| RowFault::Malformed(format!("missing column {name}")))
}

pub(super) fn int(rec: &StringRecord, i: usize, name: &str) -> FieldResult<i64> {
    let s = field(rec, i, name)?;
    s.parse::<i64>()
        .map_err(|_| RowFault::Malformed(format!("{name}: '{s}' is not an integer")))
}

pub(super) fn count(rec: &StringRecord, i: usize, name: &str) -> FieldResult<u32> {
    let v = int(rec, i, name)?;
    u32::try_from(v).map_err(|_| RowFault::OutOfRange(format!("{name} {v} must be a non-negative count")))
}

pub(super) fn real(rec: &StringRecord, i: usize, name: &str) -> FieldResult<f64> {
    let s = field(rec, i, name)?;
    s.parse::<f64>()
        .map_err(|_| RowFault::Malformed(format!("{name}: '{s}' is not a number")))
}

fn token<T: std::str::FromStr<Err = String>>(rec: &StringRecord, i: usize, name: &str) -> FieldResult<T> {
    field(rec, i, name)?.parse::<T>().map_err(RowFault::OutOfRange)
}

fn user(rec: &StringRecord) -> FieldResult<UserId> {
    let s = field(rec, 0, "user")?;
    UserId::new(s).ok_or_else(|| RowFault::Malformed("empty user id".into()))
}

fn date(s: &str, name: &str) -> FieldResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| RowFault::Malformed(format!("{name}: '{s}' is not a YYYY-MM-DD date")))
}

/// Reads one canonical CSV. Returns `None` when the file is absent.
fn read_stream<E>(
    root: &Path,
    kind: StreamKind,
    parse: impl Fn(&StringRecord) -> FieldResult<(UserId, E)>,
) -> Result<Option<(Vec<Row<E>>, ValidationReport)>, IngestError> {
    let path = root.join(kind.file_name());
    if !path.exists() {
        return Ok(None);
    }
    let file = File::open(&path).map_err(|source| IngestError::Io { path: path.clone(), source })?;
    read_records(file, kind.file_name(), kind.columns(), parse).map(Some)
}

pub(super) fn read_records<E, R: std::io::Read>(
    input: R,
    file_name: &str,
    columns: &[&str],
    parse: impl Fn(&StringRecord) -> FieldResult<(UserId, E)>,
) -> Result<(Vec<Row<E>>, ValidationReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers().map_err(|e| IngestError::SchemaError {
        file: file_name.to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != columns {
        return Err(IngestError::SchemaError {
            file: file_name.to_string(),
            line: 1,
            message: format!("expected columns [{}], found [{}]", columns.join(","), got.join(",")),
        });
    }

    let mut rows = Vec::new();
    let mut report = ValidationReport::default();
    let mut record = StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                report.total += 1;
                report.record_drop(line, DropReason::Malformed, e.to_string());
                continue;
            }
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != columns.len() {
            report.total += 1;
            report.record_drop(
                line,
                DropReason::Malformed,
                format!("expected {} columns, found {}", columns.len(), record.len()),
            );
            continue;
        }
        match parse(&record) {
            Ok((user, event)) => rows.push(Row { user, line, event }),
            Err(fault) => {
                report.total += 1;
                let (reason, msg) = match fault {
                    RowFault::Malformed(m) => (DropReason::Malformed, m),
                    RowFault::OutOfRange(m) => (DropReason::OutOfRange, m),
                };
                report.record_drop(line, reason, msg);
            }
        }
    }
    Ok((rows, report))
}

fn indoor(s: &str) -> FieldResult<Option<bool>> {
    match s {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(RowFault::OutOfRange(format!("indoor '{other}' must be 0, 1 or empty"))),
    }
}

pub(super) fn read_dir(root: &Path) -> Result<DatasetBuilder, IngestError> {
    let meta_path = root.join("dataset.meta");
    let meta = if meta_path.exists() {
        read_meta(&meta_path)?
    } else {
        DatasetMeta::default()
    };
    let mut builder = DatasetBuilder::new(meta);

    // Each file parse is independent; run them on the rayon pool.
    let (mut wifi, mut gps, mut activity, mut audio, mut phone, mut comm, mut academic, mut ema, mut phq) =
        (None, None, None, None, None, None, None, None, None);
    rayon::scope(|s| {
        s.spawn(|_| {
            wifi = Some(read_stream(root, StreamKind::Wifi, |r| {
                let t = int(r, 1, "t")?;
                let location = field(r, 2, "location")?.to_string();
                Ok((user(r)?, WifiRecord { t, location }))
            }))
        });
        s.spawn(|_| {
            gps = Some(read_stream(root, StreamKind::Gps, |r| {
                Ok((
                    user(r)?,
                    GpsFix {
                        t: int(r, 1, "t")?,
                        lat: real(r, 2, "lat")?,
                        lon: real(r, 3, "lon")?,
                        indoor: indoor(field(r, 4, "indoor")?)?,
                    },
                ))
            }))
        });
        s.spawn(|_| {
            activity = Some(read_stream(root, StreamKind::Activity, |r| {
                Ok((user(r)?, ActivitySample { t: int(r, 1, "t")?, class: token(r, 2, "class")? }))
            }))
        });
        s.spawn(|_| {
            audio = Some(read_stream(root, StreamKind::Audio, |r| {
                Ok((user(r)?, AudioSample { t: int(r, 1, "t")?, class: token(r, 2, "class")? }))
            }))
        });
        s.spawn(|_| {
            phone = Some(read_stream(root, StreamKind::PhoneState, |r| {
                Ok((
                    user(r)?,
                    PhoneStateInterval {
                        start: int(r, 1, "start")?,
                        end: int(r, 2, "end")?,
                        kind: token(r, 3, "kind")?,
                    },
                ))
            }))
        });
        s.spawn(|_| {
            comm = Some(read_stream(root, StreamKind::Comm, |r| {
                Ok((
                    user(r)?,
                    CommEvent {
                        t: int(r, 1, "t")?,
                        kind: token(r, 2, "kind")?,
                        duration_s: real(r, 3, "duration_s")?,
                    },
                ))
            }))
        });
        s.spawn(|_| {
            academic = Some(read_stream(root, StreamKind::Academic, |r| {
                let days = int(r, 8, "days_to_deadline")?;
                Ok((
                    user(r)?,
                    AcademicRecord {
                        date: date(field(r, 1, "date")?, "date")?,
                        gpa: real(r, 2, "gpa")?,
                        page_views: count(r, 3, "page_views")?,
                        contributions: count(r, 4, "contributions")?,
                        questions: count(r, 5, "questions")?,
                        notes: count(r, 6, "notes")?,
                        answers: count(r, 7, "answers")?,
                        days_to_deadline: u32::try_from(days).map_err(|_| {
                            RowFault::OutOfRange(format!("days_to_deadline {days} must be >= 0"))
                        })?,
                        class_hours: real(r, 9, "class_hours")?,
                    },
                ))
            }))
        });
        s.spawn(|_| {
            ema = Some(read_stream(root, StreamKind::EmaStress, |r| {
                let level = int(r, 2, "level")?;
                let level = u8::try_from(level)
                    .map_err(|_| RowFault::OutOfRange(format!("stress level {level} outside 1..=5")))?;
                Ok((user(r)?, EmaStress { t: int(r, 1, "t")?, level }))
            }))
        });
        s.spawn(|_| {
            phq = Some(read_stream(root, StreamKind::Phq9, |r| {
                let score = int(r, 1, "score")?;
                let score = u8::try_from(score)
                    .map_err(|_| RowFault::OutOfRange(format!("PHQ-9 score {score} outside 0..=27")))?;
                Ok((user(r)?, Phq9Score(score)))
            }))
        });
    });

    macro_rules! collect {
        ($slot:ident, $kind:expr, $field:ident) => {
            match $slot.expect("spawned above")? {
                Some((rows, report)) => {
                    builder.$field.extend(rows);
                    builder.note_parse_report($kind, report);
                }
                None => builder.note_missing($kind),
            }
        };
    }
    collect!(wifi, StreamKind::Wifi, wifi);
    collect!(gps, StreamKind::Gps, gps);
    collect!(activity, StreamKind::Activity, activity);
    collect!(audio, StreamKind::Audio, audio);
    collect!(phone, StreamKind::PhoneState, phone_state);
    collect!(comm, StreamKind::Comm, comm);
    collect!(academic, StreamKind::Academic, academic);
    collect!(ema, StreamKind::EmaStress, ema_stress);
    collect!(phq, StreamKind::Phq9, phq9);
    Ok(builder)
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn read_meta(path: &Path) -> Result<DatasetMeta, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = path.file_name().map_or_else(|| "dataset.meta".into(), |f| f.to_string_lossy().into_owned());
    let mut meta = DatasetMeta::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| IngestError::SchemaError {
            file: file.clone(),
            line: i as u64 + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_date = |v: &str| {
            NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| err(format!("{key}: '{v}' is not YYYY-MM-DD")))
        };
        match key {
            "tz_offset_s" => {
                meta.tz_offset_s = value
                    .parse()
                    .map_err(|_| err(format!("tz_offset_s: '{value}' is not an integer")))?
            }
            "study_start" => meta.study_start = Some(parse_date(value)?),
            "study_end" => meta.study_end = Some(parse_date(value)?),
            _ => {
                meta.extra.insert(key.to_string(), value.to_string());
            }
        }
    }
    if let (Some(a), Some(b)) = (meta.study_start, meta.study_end) {
        if b < a {
            return Err(IngestError::SchemaError {
                file,
                line: 0,
                message: format!("study_end {b} precedes study_start {a}"),
            });
        }
    }
    Ok(meta)
}

pub fn write_meta(meta: &DatasetMeta, path: &Path) -> Result<(), IngestError> {
    let mut out = String::new();
    out.push_str(&format!("tz_offset_s={}\n", meta.tz_offset_s));
    if let Some(d) = meta.study_start {
        out.push_str(&format!("study_start={d}\n"));
    }
    if let Some(d) = meta.study_end {
        out.push_str(&format!("study_end={d}\n"));
    }
    for (k, v) in &meta.extra {
        out.push_str(&format!("{k}={v}\n"));
    }
    std::fs::write(path, out).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |e| IngestError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_stream<F>(dir: &Path, kind: StreamKind, mut body: F) -> Result<(), IngestError>
where
    F: FnMut(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
{
    let path = dir.join(kind.file_name());
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(kind.columns()).map_err(csv_err(&path))?;
    body(&mut w).map_err(csv_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

/// Writes every stream in the canonical layout. Output bytes depend only on
/// dataset content. Users are written in roster order; an empty roster
/// member produces no rows.
pub fn write_canonical(dataset: &Dataset, dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut meta = dataset.meta.clone();
    if meta.study_start.is_none() || meta.study_end.is_none() {
        if let Some((a, b)) = dataset.study_range() {
            meta.study_start.get_or_insert(a);
            meta.study_end.get_or_insert(b);
        }
    }
    write_meta(&meta, &dir.join("dataset.meta"))?;
    let users = &dataset.users;

    write_stream(dir, StreamKind::Wifi, |w| {
        for (u, s) in users {
            for e in &s.wifi {
                w.write_record([u.as_str(), &e.t.to_string(), dataset.locations.name(e.location)])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Gps, |w| {
        for (u, s) in users {
            for e in &s.gps {
                let indoor = match e.indoor {
                    None => "",
                    Some(false) => "0",
                    Some(true) => "1",
                };
                w.write_record([u.as_str(), &e.t.to_string(), &e.lat.to_string(), &e.lon.to_string(), indoor])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Activity, |w| {
        for (u, s) in users {
            for e in &s.activity {
                w.write_record([u.as_str(), &e.t.to_string(), e.class.as_str()])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Audio, |w| {
        for (u, s) in users {
            for e in &s.audio {
                w.write_record([u.as_str(), &e.t.to_string(), e.class.as_str()])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::PhoneState, |w| {
        for (u, s) in users {
            for e in &s.phone_state {
                w.write_record([u.as_str(), &e.start.to_string(), &e.end.to_string(), e.kind.as_str()])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Comm, |w| {
        for (u, s) in users {
            for e in &s.comm {
                w.write_record([u.as_str(), &e.t.to_string(), e.kind.as_str(), &e.duration_s.to_string()])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Academic, |w| {
        for (u, s) in users {
            for e in &s.academic {
                w.write_record([
                    u.as_str(),
                    &e.date.format("%Y-%m-%d").to_string(),
                    &e.gpa.to_string(),
                    &e.page_views.to_string(),
                    &e.contributions.to_string(),
                    &e.questions.to_string(),
                    &e.notes.to_string(),
                    &e.answers.to_string(),
                    &e.days_to_deadline.to_string(),
                    &e.class_hours.to_string(),
                ])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::EmaStress, |w| {
        for (u, s) in users {
            for e in &s.ema_stress {
                w.write_record([u.as_str(), &e.t.to_string(), &e.level.to_string()])?;
            }
        }
        Ok(())
    })?;
    write_stream(dir, StreamKind::Phq9, |w| {
        for (u, s) in users {
            if let Some(p) = s.phq9 {
                w.write_record([u.as_str(), &p.0.to_string()])?;
            }
        }
        Ok(())
    })?;
    Ok(())
}
