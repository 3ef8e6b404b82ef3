//! Feature-group ablation: every task and model trained on all features and
//! on each group alone, over seeded rounds, aggregated to mean ± std.
//!
//! Round `k` always uses seed `seed_base + k`, whatever the group, so the
//! all-features and single-group runs of a round share their random streams
//! where the shapes allow. Jobs run on the rayon pool and are merged by
//! index, so scheduling never changes the report.

mod report;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::fingerprint;
use crate::featurize::{ExtractOptions, FeatureGroup, FeatureRegistry};
use crate::ingest::Dataset;
use crate::neuralnet::{train, Hyper, ModelSpec, TrainedModel};
use crate::tasks::{
    evaluate_classification, rmse, Examples, F1Average, GroupSelection, MeanBaseline, Metric, MetricResult,
    ModelFamily, MostFrequentBaseline, Phq9Setup, Split, StressSetup, Task, TaskError,
};

pub use report::{
    emit, format_mean_std, rank_and_mark, AblationCell, AblationReport, DecimalMark, ReportFormat, BASELINE,
};
pub use stats::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub tasks: Vec<Task>,
    /// Models to run; each task keeps only the ones it supports.
    pub models: Vec<ModelFamily>,
    /// Column sets besides the baseline, in report order.
    pub selections: Vec<GroupSelection>,
    pub n_rounds: usize,
    pub seed_base: u64,
    pub hyper: Hyper,
    pub f1_average: F1Average,
    pub extract: ExtractOptions,
}

impl Default for AblationConfig {
    fn default() -> Self {
        let mut selections = vec![GroupSelection::All];
        selections.extend(FeatureGroup::ALL.iter().map(|&g| GroupSelection::single(g)));
        Self {
            tasks: Task::ALL.to_vec(),
            models: vec![ModelFamily::Fcn, ModelFamily::Lstm],
            selections,
            n_rounds: 50,
            seed_base: 0,
            hyper: Hyper::default(),
            f1_average: F1Average::Weighted,
            extract: ExtractOptions::default(),
        }
    }
}

impl AblationConfig {
    /// `(task, model)` pairs in report order.
    pub fn rows(&self) -> Vec<(Task, ModelFamily)> {
        self.tasks
            .iter()
            .flat_map(|&t| self.models.iter().filter(move |m| t.models().contains(m)).map(move |&m| (t, m)))
            .collect()
    }
}

/// What one `(task, model, columns)` unit trains on.
enum UnitData<'a> {
    Stress { ex: Examples, split: Split },
    Phq { setup: &'a Phq9Setup, columns: Vec<usize> },
    Failed { reason: String },
}

struct Unit<'a> {
    task: Task,
    model: ModelFamily,
    group: String,
    data: UnitData<'a>,
}

fn stress_round(
    task: Task,
    model: ModelFamily,
    ex: &Examples,
    split: &Split,
    seed: u64,
    cfg: &AblationConfig,
) -> Result<MetricResult, String> {
    let width = *ex.x.shape().last().expect("examples have a width");
    let spec = match model {
        ModelFamily::Fcn => ModelSpec::fcn_stress(width, task.n_classes(), seed),
        ModelFamily::Lstm => ModelSpec::lstm_stress(width, task.n_classes(), seed),
    };
    let x_train = ex.x.select_rows(&split.train_rows);
    let y_train: Vec<f64> = split.train_rows.iter().map(|&i| ex.y[i]).collect();
    let m = train(&spec, &x_train, &y_train, &cfg.hyper).map_err(|e| e.to_string())?;
    let pred = m.predict_classes(&ex.x.select_rows(&split.test_rows)).map_err(|e| e.to_string())?;
    let truth: Vec<usize> = split.test_rows.iter().map(|&i| ex.y[i] as usize).collect();
    Ok(evaluate_classification(&pred, &truth, task.n_classes(), cfg.f1_average))
}

fn phq_fold(setup: &Phq9Setup, columns: &[usize], fold: usize, seed: u64, hyper: &Hyper) -> Result<f64, String> {
    let (x, y, split) = setup.fold_data(fold, columns).map_err(|e| e.to_string())?;
    let spec = ModelSpec::fcn_phq9(x.row_width(), seed);
    let y_train: Vec<f64> = split.train_rows.iter().map(|&i| y[i]).collect();
    let m: TrainedModel = train(&spec, &x.select_rows(&split.train_rows), &y_train, hyper).map_err(|e| e.to_string())?;
    let pred = m.predict(&x.select_rows(&split.test_rows)).map_err(|e| e.to_string())?;
    let truth: Vec<f64> = split.test_rows.iter().map(|&i| y[i]).collect();
    Ok(rmse(pred.data(), &truth))
}

fn scale(metric: Metric) -> f64 {
    if metric == Metric::Rmse {
        1.0
    } else {
        100.0
    }
}

fn aggregate(unit: &Unit, metric: Metric, results: &[Result<MetricResult, String>]) -> AblationCell {
    let values: Vec<f64> =
        results.iter().filter_map(|r| r.as_ref().ok()).filter_map(|m| m.get(metric)).map(|v| v * scale(metric)).collect();
    let ms = mean_std(&values);
    AblationCell {
        task: unit.task,
        model: unit.model,
        group: unit.group.clone(),
        metric,
        mean: ms.map(|m| m.0),
        std: ms.and_then(|m| m.1),
        n_runs: values.len(),
        failed_runs: results.len() - values.len(),
        rank: None,
    }
}

fn baseline_cells(task: Task, model: ModelFamily, data: Result<&UnitData, &str>, cfg: &AblationConfig) -> Vec<AblationCell> {
    let cell = |metric: Metric, mean: Option<f64>, n_runs: usize, failed: usize| AblationCell {
        task,
        model,
        group: BASELINE.into(),
        metric,
        mean: mean.map(|m| m * scale(metric)),
        std: None,
        n_runs,
        failed_runs: failed,
        rank: None,
    };
    match data {
        Ok(UnitData::Stress { ex, split }) => {
            let train_users: Vec<_> = split.train_rows.iter().map(|&i| ex.users[i].clone()).collect();
            let train_y: Vec<usize> = split.train_rows.iter().map(|&i| ex.y[i] as usize).collect();
            let b = MostFrequentBaseline::fit(&train_users, &train_y, task.n_classes());
            let pred: Vec<usize> = split.test_rows.iter().map(|&i| b.predict(&ex.users[i])).collect();
            let truth: Vec<usize> = split.test_rows.iter().map(|&i| ex.y[i] as usize).collect();
            let r = evaluate_classification(&pred, &truth, task.n_classes(), cfg.f1_average);
            task.metrics().iter().map(|&m| cell(m, r.get(m), 1, 0)).collect()
        }
        Ok(UnitData::Phq { setup, .. }) => {
            let errs: Vec<f64> = setup
                .folds
                .iter()
                .map(|f| {
                    let train: Vec<f64> = f.split.train_rows.iter().map(|&i| setup.scores[i]).collect();
                    let b = MeanBaseline::fit(&train).expect("louo folds train on at least one user");
                    let truth: Vec<f64> = f.split.test_rows.iter().map(|&i| setup.scores[i]).collect();
                    rmse(&vec![b.predict(); truth.len()], &truth)
                })
                .collect();
            let mean = mean_std(&errs).map(|m| m.0);
            vec![cell(Metric::Rmse, mean, errs.len(), 0)]
        }
        _ => task.metrics().iter().map(|&m| cell(m, None, 0, 1)).collect(),
    }
}

/// Runs the whole grid. Setup or per-run failures mark cells instead of
/// aborting; only an invalid configuration is an error.
pub fn run_ablation(
    dataset: &Dataset,
    registry: &FeatureRegistry,
    cfg: &AblationConfig,
) -> Result<AblationReport, TaskError> {
    if cfg.n_rounds == 0 {
        return Err(TaskError::Config("n_rounds must be at least 1".into()));
    }
    let rows = cfg.rows();
    let needs_stress = rows.iter().any(|(t, _)| !t.is_regression());
    let needs_phq = rows.iter().any(|(t, _)| t.is_regression());
    let stress = needs_stress.then(|| StressSetup::prepare(dataset, registry, &cfg.extract));
    let phq = needs_phq.then(|| Phq9Setup::prepare(dataset, registry, &cfg.extract));

    let mut units: Vec<Unit> = Vec::new();
    let mut baselines: Vec<Vec<AblationCell>> = Vec::new();
    for &(task, model) in &rows {
        let make = |columns: Vec<usize>| -> UnitData {
            if task.is_regression() {
                match phq.as_ref().expect("prepared") {
                    Ok(setup) => UnitData::Phq { setup, columns },
                    Err(e) => UnitData::Failed { reason: e.to_string() },
                }
            } else {
                match stress.as_ref().expect("prepared") {
                    Ok(setup) => match setup.examples(task, model.layout(), &columns) {
                        Ok((ex, split)) => UnitData::Stress { ex, split },
                        Err(e) => UnitData::Failed { reason: e.to_string() },
                    },
                    Err(e) => UnitData::Failed { reason: e.to_string() },
                }
            }
        };
        let base = make(Vec::new());
        let base_ref = match &base {
            UnitData::Failed { reason } => Err(reason.as_str()),
            d => Ok(d),
        };
        baselines.push(baseline_cells(task, model, base_ref, cfg));
        for sel in &cfg.selections {
            units.push(Unit { task, model, group: sel.label(), data: make(sel.columns(registry)) });
        }
    }

    // (unit, round, fold) jobs; folds only for PHQ-9.
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for (u, unit) in units.iter().enumerate() {
        let folds = match &unit.data {
            UnitData::Phq { setup, .. } => setup.folds.len(),
            _ => 1,
        };
        for round in 0..cfg.n_rounds {
            for fold in 0..folds {
                jobs.push((u, round, fold));
            }
        }
    }
    let outcomes: Vec<Result<MetricResult, String>> = jobs
        .par_iter()
        .map(|&(u, round, fold)| {
            let unit = &units[u];
            let seed = cfg.seed_base.wrapping_add(round as u64);
            match &unit.data {
                UnitData::Stress { ex, split } => stress_round(unit.task, unit.model, ex, split, seed, cfg),
                UnitData::Phq { setup, columns } => {
                    phq_fold(setup, columns, fold, seed, &cfg.hyper).map(|rmse| MetricResult::Regression { rmse })
                }
                UnitData::Failed { reason } => Err(reason.clone()),
            }
        })
        .collect();

    let mut cells = Vec::new();
    let per_row = cfg.selections.len();
    let mut cursor = 0;
    for (r, base) in baselines.into_iter().enumerate() {
        let (task, _) = rows[r];
        let mut row_cells: Vec<AblationCell> = Vec::new();
        for u in r * per_row..(r + 1) * per_row {
            let start = cursor;
            while cursor < jobs.len() && jobs[cursor].0 == u {
                cursor += 1;
            }
            let results = &outcomes[start..cursor];
            let results: Vec<Result<MetricResult, String>> =
                if results.is_empty() { vec![Err("no runs".into())] } else { results.to_vec() };
            for &m in task.metrics() {
                row_cells.push(aggregate(&units[u], m, &results));
            }
        }
        // baseline first, then selections, metric-major within each group
        for &m in task.metrics() {
            cells.extend(base.iter().filter(|c| c.metric == m).cloned());
            cells.extend(row_cells.iter().filter(|c| c.metric == m).cloned());
        }
    }

    let mut provenance = vec![
        ("registry".to_string(), registry.fingerprint()),
        ("seed_base".to_string(), cfg.seed_base.to_string()),
        ("rounds".to_string(), cfg.n_rounds.to_string()),
        ("hyper".to_string(), serde_json::to_string(&cfg.hyper).expect("serializes")),
        ("f1".to_string(), cfg.f1_average.as_str().to_string()),
        ("std".to_string(), "sample (n-1)".to_string()),
        ("units".to_string(), "accuracy and f1 in percent; rmse in PHQ-9 points".to_string()),
        (
            "phq9".to_string(),
            "leave-one-user-out; one run per (round, fold); baseline is one deterministic pass over folds".to_string(),
        ),
    ];
    if let Some(Ok(s)) = &stress {
        provenance.push(("stress_cutoff".into(), s.cutoff.to_string()));
    }
    let mut report = AblationReport { cells, fingerprint: fingerprint(&(registry.fingerprint(), cfg)), provenance };
    rank_and_mark(&mut report);
    Ok(report)
}
