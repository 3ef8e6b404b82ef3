use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tasks::{Metric, ModelFamily, Task};

/// Group label used for the baseline row of every `(task, model, metric)`.
pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub task: Task,
    pub model: ModelFamily,
    pub group: String,
    pub metric: Metric,
    /// Percent for accuracy and F1, score points for RMSE. `None` if every
    /// run failed.
    pub mean: Option<f64>,
    /// Sample std; `None` for deterministic baselines or single runs.
    pub std: Option<f64>,
    pub n_runs: usize,
    pub failed_runs: usize,
    /// 1 = best, 2 = second best within its row.
    pub rank: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub fingerprint: String,
    /// Key/value notes written as header comments.
    pub provenance: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecimalMark {
    #[default]
    Point,
    Comma,
}

impl FromStr for DecimalMark {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point" | "." => Ok(DecimalMark::Point),
            "comma" | "," => Ok(DecimalMark::Comma),
            _ => Err(format!("unknown decimal mark '{s}' (point|comma)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn better(metric: Metric, a: &AblationCell, b: &AblationCell) -> Ordering {
    let (ma, mb) = (a.mean.unwrap_or(f64::NAN), b.mean.unwrap_or(f64::NAN));
    let by_mean = if metric.higher_is_better() { mb.total_cmp(&ma) } else { ma.total_cmp(&mb) };
    by_mean
        .then(a.std.unwrap_or(0.0).total_cmp(&b.std.unwrap_or(0.0)))
        .then(a.group.cmp(&b.group))
}

/// Marks the best and second-best non-baseline group per
/// `(task, model, metric)`. Ties go to the lower std, then the group name.
pub fn rank_and_mark(report: &mut AblationReport) {
    let mut rows: BTreeMap<(Task, ModelFamily, Metric), Vec<usize>> = BTreeMap::new();
    for (i, c) in report.cells.iter_mut().enumerate() {
        c.rank = None;
        if c.group != BASELINE && c.mean.is_some() {
            rows.entry((c.task, c.model, c.metric)).or_default().push(i);
        }
    }
    for ((_, _, metric), mut idx) in rows {
        idx.sort_by(|&a, &b| better(metric, &report.cells[a], &report.cells[b]));
        for (r, &i) in idx.iter().take(2).enumerate() {
            report.cells[i].rank = Some(r as u8 + 1);
        }
    }
}

fn num(v: f64, decimals: usize, mark: DecimalMark) -> String {
    let s = format!("{v:.decimals$}");
    match mark {
        DecimalMark::Point => s,
        DecimalMark::Comma => s.replace('.', ","),
    }
}

/// `mean ± std` at one decimal, or the mean alone when std is absent.
pub fn format_mean_std(mean: f64, std: Option<f64>, mark: DecimalMark) -> String {
    match std {
        Some(s) => format!("{} ± {}", num(mean, 1, mark), num(s, 1, mark)),
        None => num(mean, 1, mark),
    }
}

const CSV_HEADER: &str = "task,model,group,metric,mean,std,n_runs,failed_runs,rank";

fn header_comments(report: &AblationReport, out: &mut String) {
    let _ = writeln!(out, "# fingerprint: {}", report.fingerprint);
    for (k, v) in &report.provenance {
        let _ = writeln!(out, "# {k}: {v}");
    }
}

pub fn emit(report: &AblationReport, format: ReportFormat, mark: DecimalMark) -> Vec<u8> {
    match format {
        ReportFormat::Csv => emit_csv(report).into_bytes(),
        ReportFormat::Markdown => emit_markdown(report, mark).into_bytes(),
    }
}

fn emit_csv(report: &AblationReport) -> String {
    let mut out = String::new();
    header_comments(report, &mut out);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.task,
            c.model,
            c.group,
            c.metric.as_str(),
            opt(c.mean),
            opt(c.std),
            c.n_runs,
            c.failed_runs,
            c.rank.map(|r| r.to_string()).unwrap_or_default()
        );
    }
    out
}

fn emit_markdown(report: &AblationReport, mark: DecimalMark) -> String {
    let mut out = String::new();
    for line in {
        let mut h = String::new();
        header_comments(report, &mut h);
        h
    }
    .lines()
    {
        let _ = writeln!(out, "<!-- {} -->", line.trim_start_matches("# "));
    }
    let mut groups: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !groups.contains(&c.group.as_str()) {
            groups.push(&c.group);
        }
    }
    let _ = write!(out, "| task | model | metric |");
    for g in &groups {
        let _ = write!(out, " {g} |");
    }
    out.push('\n');
    out.push_str("|---|---|---|");
    out.push_str(&"---|".repeat(groups.len()));
    out.push('\n');
    let mut rows: Vec<(Task, ModelFamily, Metric)> = Vec::new();
    for c in &report.cells {
        let key = (c.task, c.model, c.metric);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    for (task, model, metric) in rows {
        let _ = write!(out, "| {task} | {model} | {} |", metric.as_str());
        for g in &groups {
            let cell = report.cells.iter().find(|c| c.task == task && c.model == model && c.metric == metric && c.group == *g);
            let text = match cell {
                None => String::new(),
                Some(c) => match c.mean {
                    None => "failed".into(),
                    Some(m) => {
                        let s = format_mean_std(m, c.std, mark);
                        match c.rank {
                            Some(1) => format!("**{s}**"),
                            Some(2) => format!("*{s}*"),
                            _ => s,
                        }
                    }
                },
            };
            let _ = write!(out, " {text} |");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(group: &str, mean: f64, std: f64) -> AblationCell {
        AblationCell {
            task: Task::LH,
            model: ModelFamily::Fcn,
            group: group.into(),
            metric: Metric::Accuracy,
            mean: Some(mean),
            std: Some(std),
            n_runs: 5,
            failed_runs: 0,
            rank: None,
        }
    }

    fn ranks(r: &AblationReport) -> Vec<Option<u8>> {
        r.cells.iter().map(|c| c.rank).collect()
    }

    #[test]
    fn decreasing_row_marks_first_two() {
        let mut r = AblationReport { cells: vec![cell("a", 70.0, 1.0), cell("b", 60.0, 1.0), cell("c", 50.0, 1.0)], ..Default::default() };
        rank_and_mark(&mut r);
        assert_eq!(ranks(&r), vec![Some(1), Some(2), None]);
    }

    #[test]
    fn equal_means_prefer_lower_std_then_name() {
        let mut r = AblationReport { cells: vec![cell("a", 60.0, 3.0), cell("b", 60.0, 1.0), cell("c", 50.0, 0.0)], ..Default::default() };
        rank_and_mark(&mut r);
        assert_eq!(ranks(&r), vec![Some(2), Some(1), None]);
        let mut r = AblationReport { cells: vec![cell("c", 1.0, 1.0), cell("b", 1.0, 1.0), cell("a", 1.0, 1.0)], ..Default::default() };
        rank_and_mark(&mut r);
        assert_eq!(ranks(&r), vec![None, Some(2), Some(1)]);
    }

    #[test]
    fn baseline_and_rmse_direction() {
        let mut cells = vec![cell("baseline", 99.0, 0.0), cell("x", 5.0, 1.0), cell("y", 4.0, 1.0)];
        for c in &mut cells {
            c.metric = Metric::Rmse;
            c.task = Task::Phq9;
        }
        let mut r = AblationReport { cells, ..Default::default() };
        rank_and_mark(&mut r);
        assert_eq!(ranks(&r), vec![None, Some(2), Some(1)]);
    }

    #[test]
    fn locale_formatting() {
        assert_eq!(format_mean_std(60.8, Some(3.2), DecimalMark::Point), "60.8 ± 3.2");
        assert_eq!(format_mean_std(60.8, Some(3.2), DecimalMark::Comma), "60,8 ± 3,2");
        assert_eq!(format_mean_std(61.14, None, DecimalMark::Comma), "61,1");
    }

    #[test]
    fn empty_grid_is_header_only() {
        let r = AblationReport { fingerprint: "abc".into(), ..Default::default() };
        let csv = String::from_utf8(emit(&r, ReportFormat::Csv, DecimalMark::Point)).unwrap();
        assert_eq!(csv, format!("# fingerprint: abc\n{CSV_HEADER}\n"));
        let md = String::from_utf8(emit(&r, ReportFormat::Markdown, DecimalMark::Point)).unwrap();
        assert_eq!(md.lines().filter(|l| !l.starts_with("<!--")).count(), 2);
    }
}
