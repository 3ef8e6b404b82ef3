//! Labelling, example construction, splits, baselines and metrics for the
//! three stress classification tasks and PHQ-9 regression.

mod baseline;
mod examples;
mod export;
mod labels;
mod metrics;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::{FeatureError, FeatureGroup, FeatureRegistry};

pub use baseline::{MeanBaseline, MostFrequentBaseline};
pub use examples::{
    make_examples, make_phq9_examples, phq9_columns, standardize_matrix, Examples, Phq9Fold, Phq9Setup, StressSetup,
};
pub use export::write_examples_csv;
pub use labels::{classify, day_label, label_stress, median, stress_day_labels, DayLabels, StressClass, StressDay, StressLabel};
pub use metrics::{evaluate_classification, per_class_f1, rmse, F1Average, Metric, MetricResult};
pub use split::{chronological_cutoff, chronological_split, louo_splits, split_at, Split, SplitPolicy};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("no labels: {0}")]
    NoLabels(String),
    #[error("invalid task configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Low vs High; Medium days are dropped.
    #[serde(rename = "l_h")]
    LH,
    /// Low or Medium vs High.
    #[serde(rename = "lm_h")]
    LmH,
    #[serde(rename = "multiclass")]
    Multiclass,
    #[serde(rename = "phq9")]
    Phq9,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::LH, Task::LmH, Task::Multiclass, Task::Phq9];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::LH => "l_h",
            Task::LmH => "lm_h",
            Task::Multiclass => "multiclass",
            Task::Phq9 => "phq9",
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            Task::LH | Task::LmH => 2,
            Task::Multiclass => 3,
            Task::Phq9 => 1,
        }
    }

    pub fn is_regression(self) -> bool {
        self == Task::Phq9
    }

    pub fn metrics(self) -> &'static [Metric] {
        if self.is_regression() {
            &[Metric::Rmse]
        } else {
            &[Metric::Accuracy, Metric::F1]
        }
    }

    /// Class index for a stress label, `None` if the task drops it.
    pub fn target(self, class: StressClass) -> Option<usize> {
        match (self, class) {
            (Task::LH, StressClass::Low) => Some(0),
            (Task::LH, StressClass::High) => Some(1),
            (Task::LH, StressClass::Medium) => None,
            (Task::LmH, StressClass::High) => Some(1),
            (Task::LmH, _) => Some(0),
            (Task::Multiclass, c) => Some(c.index()),
            (Task::Phq9, _) => None,
        }
    }

    pub fn models(self) -> &'static [ModelFamily] {
        if self.is_regression() {
            &[ModelFamily::Fcn]
        } else {
            &[ModelFamily::Fcn, ModelFamily::Lstm]
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l_h" | "lh" => Ok(Task::LH),
            "lm_h" | "lmh" => Ok(Task::LmH),
            "multiclass" | "multi" => Ok(Task::Multiclass),
            "phq9" | "phq_9" => Ok(Task::Phq9),
            _ => Err(format!("unknown task '{s}' (l_h|lm_h|multiclass|phq9)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Fcn,
    Lstm,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Fcn => "fcn",
            ModelFamily::Lstm => "lstm",
        }
    }

    pub fn layout(self) -> InputLayout {
        match self {
            ModelFamily::Fcn => InputLayout::Flat,
            ModelFamily::Lstm => InputLayout::Window(crate::neuralnet::ModelSpec::LSTM_WINDOW),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fcn" => Ok(ModelFamily::Fcn),
            "lstm" => Ok(ModelFamily::Lstm),
            _ => Err(format!("unknown model '{s}' (fcn|lstm)")),
        }
    }
}

/// One row per example, or a window of consecutive days ending on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    Flat,
    Window(usize),
}

/// Which registry columns a model sees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSelection {
    All,
    Groups(Vec<FeatureGroup>),
}

impl GroupSelection {
    pub fn single(g: FeatureGroup) -> Self {
        GroupSelection::Groups(vec![g])
    }

    pub fn columns(&self, registry: &FeatureRegistry) -> Vec<usize> {
        match self {
            GroupSelection::All => (0..registry.len()).collect(),
            GroupSelection::Groups(gs) => {
                let mut c: Vec<usize> = gs.iter().flat_map(|g| registry.group_columns(*g)).collect();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GroupSelection::All => "all".into(),
            GroupSelection::Groups(gs) => gs.iter().map(|g| g.as_str()).collect::<Vec<_>>().join("+"),
        }
    }
}

impl FromStr for GroupSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(GroupSelection::All);
        }
        s.split('+').map(str::parse).collect::<Result<Vec<FeatureGroup>, _>>().map(GroupSelection::Groups)
    }
}

/// A single (task, model, columns) training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: Task,
    pub model: ModelFamily,
    pub groups: GroupSelection,
    pub n_rounds: usize,
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if !self.task.models().contains(&self.model) {
            return Err(TaskError::Config(format!("{} does not pair with {}", self.task, self.model)));
        }
        if self.n_rounds == 0 {
            return Err(TaskError::Config("n_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phq9_is_fcn_only() {
        let c = TaskConfig { task: Task::Phq9, model: ModelFamily::Lstm, groups: GroupSelection::All, n_rounds: 50 };
        assert!(c.validate().is_err());
        assert!(TaskConfig { model: ModelFamily::Fcn, ..c }.validate().is_ok());
    }

    #[test]
    fn task_mappings() {
        use StressClass::*;
        assert_eq!([Low, Medium, High].map(|c| Task::LH.target(c)), [Some(0), None, Some(1)]);
        assert_eq!([Low, Medium, High].map(|c| Task::LmH.target(c)), [Some(0), Some(0), Some(1)]);
        assert_eq!([Low, Medium, High].map(|c| Task::Multiclass.target(c)), [Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn group_selection_parses() {
        assert_eq!("all".parse::<GroupSelection>().unwrap(), GroupSelection::All);
        assert_eq!(
            "wifi+gps".parse::<GroupSelection>().unwrap(),
            GroupSelection::Groups(vec![FeatureGroup::Wifi, FeatureGroup::Gps])
        );
        let reg = FeatureRegistry::default_registry();
        assert_eq!(GroupSelection::single(FeatureGroup::Audio).columns(&reg).len(), 9);
        assert_eq!(GroupSelection::All.columns(&reg).len(), 123);
    }
}
