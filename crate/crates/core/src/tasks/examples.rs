use chrono::{Duration, NaiveDate};

use crate::featurize::{
    build_feature_matrix, ExtractOptions, FeatureMatrix, FeatureRegistry, FeatureVector, FitScope, LocationRanking,
    Standardizer,
};
use crate::ingest::{Dataset, UserId};
use crate::neuralnet::Tensor;

use super::labels::{stress_day_labels, DayLabels, StressDay};
use super::split::{chronological_cutoff, louo_splits, split_at, Split};
use super::{InputLayout, Task, TaskError};

/// Model-ready rows with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    /// `[n, width]`, or `[n, steps, width]` for windowed inputs.
    pub x: Tensor,
    /// Class index or score per row.
    pub y: Vec<f64>,
    pub users: Vec<UserId>,
    pub dates: Vec<NaiveDate>,
    /// Rows skipped for lack of history (windows) or window data (PHQ-9).
    pub dropped: usize,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.y.iter().map(|&v| v as usize).collect()
    }
}

/// Copy of `matrix` z-scored with statistics from rows where `fit` holds.
/// Masked entries become 0.
pub fn standardize_matrix(
    matrix: &FeatureMatrix,
    fit: impl Fn(&FeatureVector) -> bool,
) -> Result<FeatureMatrix, TaskError> {
    let values: Vec<Vec<f64>> = matrix.rows.iter().map(|r| r.values.clone()).collect();
    let masks: Vec<Vec<bool>> = matrix.rows.iter().map(|r| r.missing_mask.clone()).collect();
    let fit_rows: Vec<usize> = (0..matrix.rows.len()).filter(|&i| fit(&matrix.rows[i])).collect();
    let s = Standardizer::fit(&values, Some(&masks), &fit_rows)?;
    let rows = matrix
        .rows
        .iter()
        .map(|r| FeatureVector { values: s.transform_row(&r.values, Some(&r.missing_mask)), ..r.clone() })
        .collect();
    Ok(FeatureMatrix { registry: matrix.registry.clone(), rows })
}

fn one_hot(roster: &[UserId], user: &UserId) -> Vec<f64> {
    let mut v = vec![0.0; roster.len()];
    if let Ok(i) = roster.binary_search(user) {
        v[i] = 1.0;
    }
    v
}

/// Stress examples: one per labelled user-day the task keeps, with the
/// user one-hot (roster order) appended to every timestep.
pub fn make_examples(
    features: &FeatureMatrix,
    labels: &[StressDay],
    task: Task,
    layout: InputLayout,
    columns: &[usize],
    roster: &[UserId],
) -> Examples {
    let steps = match layout {
        InputLayout::Flat => 1,
        InputLayout::Window(n) => n,
    };
    let width = columns.len() + roster.len();
    let mut data = Vec::new();
    let (mut y, mut users, mut dates) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    for day in labels {
        let Some(target) = task.target(day.class) else { continue };
        let rows: Option<Vec<&FeatureVector>> = (0..steps)
            .rev()
            .map(|back| features.row(&day.user, day.date - Duration::days(back as i64)))
            .collect();
        let Some(rows) = rows else {
            dropped += 1;
            continue;
        };
        let hot = one_hot(roster, &day.user);
        for r in rows {
            data.extend(columns.iter().map(|&c| r.values[c]));
            data.extend_from_slice(&hot);
        }
        y.push(target as f64);
        users.push(day.user.clone());
        dates.push(day.date);
    }
    let shape = match layout {
        InputLayout::Flat => vec![y.len(), width],
        InputLayout::Window(n) => vec![y.len(), n, width],
    };
    Examples { x: Tensor::new(shape, data).expect("finite standardized features"), y, users, dates, dropped }
}

/// Column positions of the mean and std blocks for `columns` in a PHQ-9 row
/// built over all `n_features` registry columns.
pub fn phq9_columns(n_features: usize, columns: &[usize]) -> Vec<usize> {
    columns.iter().copied().chain(columns.iter().map(|c| n_features + c)).collect()
}

/// PHQ-9 examples: per scored user, the mean then the population std of each
/// column over the 14 days ending at `study_end`. Users with no observed
/// value in that window are dropped.
pub fn make_phq9_examples(
    features: &FeatureMatrix,
    scores: &[(UserId, f64)],
    study_end: NaiveDate,
    columns: &[usize],
) -> Examples {
    let start = study_end - Duration::days(13);
    let mut data = Vec::new();
    let (mut y, mut users, mut dates) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    for (user, score) in scores {
        let window: Vec<&FeatureVector> = (0..14)
            .filter_map(|k| features.row(user, start + Duration::days(k)))
            .collect();
        if !window.iter().any(|r| r.missing_mask.iter().any(|m| !m)) {
            dropped += 1;
            continue;
        }
        let n = window.len() as f64;
        let mut means = Vec::with_capacity(columns.len());
        let mut stds = Vec::with_capacity(columns.len());
        for &c in columns {
            let m = window.iter().map(|r| r.values[c]).sum::<f64>() / n;
            let v = window.iter().map(|r| (r.values[c] - m).powi(2)).sum::<f64>() / n;
            means.push(m);
            stds.push(v.sqrt());
        }
        data.extend(means);
        data.extend(stds);
        y.push(*score);
        users.push(user.clone());
        dates.push(study_end);
    }
    let x = Tensor::matrix(y.len(), 2 * columns.len(), data).expect("finite features");
    Examples { x, y, users, dates, dropped }
}

/// Everything the stress tasks share across groups, models and rounds.
///
/// The chronological cut is taken over the distinct days carrying a stress
/// response. Label medians, WiFi top-location lists and standardization use
/// days up to the cut only.
#[derive(Debug, Clone)]
pub struct StressSetup {
    pub features: FeatureMatrix,
    pub labels: DayLabels,
    pub cutoff: NaiveDate,
    pub roster: Vec<UserId>,
}

impl StressSetup {
    pub fn prepare(dataset: &Dataset, registry: &FeatureRegistry, opts: &ExtractOptions) -> Result<Self, TaskError> {
        let clock = dataset.clock();
        let dates: Vec<NaiveDate> = dataset
            .users
            .values()
            .flat_map(|s| s.ema_stress.iter().map(|e| clock.date_of(e.t)))
            .collect();
        let cutoff = chronological_cutoff(&dates).ok_or(TaskError::NoLabels("no stress responses".into()))?;
        let labels = stress_day_labels(dataset, Some(cutoff));
        let ranking = LocationRanking::fit(dataset, &FitScope::Through(cutoff), opts.max_carry_s);
        let raw = build_feature_matrix(dataset, registry, &ranking, opts)?;
        let features = standardize_matrix(&raw, |r| r.date <= cutoff)?;
        Ok(Self { features, labels, cutoff, roster: dataset.roster() })
    }

    pub fn examples(&self, task: Task, layout: InputLayout, columns: &[usize]) -> Result<(Examples, Split), TaskError> {
        if task == Task::Phq9 {
            return Err(TaskError::Config("PHQ-9 examples come from Phq9Setup".into()));
        }
        let ex = make_examples(&self.features, &self.labels.days, task, layout, columns, &self.roster);
        let split = split_at(&ex.dates, self.cutoff)?;
        Ok((ex, split))
    }
}

/// One leave-one-user-out fold: PHQ-9 rows over every registry column,
/// with WiFi top locations fitted without the held-out user.
#[derive(Debug, Clone)]
pub struct Phq9Fold {
    pub split: Split,
    /// Raw `[means | stds]` rows, one per user in [`Phq9Setup::users`].
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Phq9Setup {
    pub users: Vec<UserId>,
    pub scores: Vec<f64>,
    pub folds: Vec<Phq9Fold>,
    pub n_features: usize,
    pub study_end: NaiveDate,
    /// Scored users without window data.
    pub dropped: usize,
}

impl Phq9Setup {
    pub fn prepare(dataset: &Dataset, registry: &FeatureRegistry, opts: &ExtractOptions) -> Result<Self, TaskError> {
        let (_, study_end) = dataset.study_range().ok_or(TaskError::NoLabels("no study range".into()))?;
        let scored: Vec<(UserId, f64)> = dataset
            .users
            .iter()
            .filter_map(|(u, s)| s.phq9.map(|p| (u.clone(), p.0 as f64)))
            .collect();
        let all: Vec<usize> = (0..registry.len()).collect();
        // users with window data do not depend on the WiFi ranking
        let probe = build_feature_matrix(dataset, registry, &LocationRanking::default(), opts)?;
        let base = make_phq9_examples(&probe, &scored, study_end, &all);
        let splits = louo_splits(&base.users)?;
        let kept: Vec<(UserId, f64)> = base.users.iter().cloned().zip(base.y.iter().copied()).collect();
        let folds = splits
            .into_iter()
            .map(|split| {
                let held = split.held_out.clone().expect("louo split names its user");
                let ranking = LocationRanking::fit(dataset, &FitScope::ExcludeUser(held), opts.max_carry_s);
                let m = build_feature_matrix(dataset, registry, &ranking, opts)?;
                let ex = make_phq9_examples(&m, &kept, study_end, &all);
                let w = ex.x.row_width();
                let rows = ex.x.data().chunks(w.max(1)).map(<[f64]>::to_vec).collect();
                Ok(Phq9Fold { split, rows })
            })
            .collect::<Result<Vec<_>, TaskError>>()?;
        Ok(Self {
            users: base.users,
            scores: base.y,
            folds,
            n_features: registry.len(),
            study_end,
            dropped: base.dropped,
        })
    }

    /// Fold inputs restricted to `columns`, z-scored on the training users.
    pub fn fold_data(&self, fold: usize, columns: &[usize]) -> Result<(Tensor, Vec<f64>, &Split), TaskError> {
        let f = &self.folds[fold];
        let cols = phq9_columns(self.n_features, columns);
        let picked: Vec<Vec<f64>> = f.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let s = Standardizer::fit(&picked, None, &f.split.train_rows)?;
        let z: Vec<Vec<f64>> = picked.iter().map(|r| s.transform_row(r, None)).collect();
        let x = Tensor::matrix(z.len(), cols.len(), z.concat()).map_err(|e| TaskError::Config(e.to_string()))?;
        Ok((x, self.scores.clone(), &f.split))
    }
}
