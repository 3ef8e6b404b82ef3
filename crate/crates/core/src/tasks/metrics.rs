use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    F1,
    Rmse,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
            Metric::Rmse => "rmse",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Metric::Rmse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    /// Per-class F1 weighted by true-class support.
    #[default]
    Weighted,
    /// Unweighted mean over classes seen in truth or predictions.
    Macro,
}

impl F1Average {
    pub fn as_str(self) -> &'static str {
        match self {
            F1Average::Weighted => "weighted",
            F1Average::Macro => "macro",
        }
    }
}

impl std::str::FromStr for F1Average {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weighted" => Ok(F1Average::Weighted),
            "macro" => Ok(F1Average::Macro),
            _ => Err(format!("unknown F1 averaging '{s}' (weighted|macro)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricResult {
    Classification { accuracy: f64, f1: f64 },
    Regression { rmse: f64 },
}

impl MetricResult {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match (self, m) {
            (MetricResult::Classification { accuracy, .. }, Metric::Accuracy) => Some(*accuracy),
            (MetricResult::Classification { f1, .. }, Metric::F1) => Some(*f1),
            (MetricResult::Regression { rmse }, Metric::Rmse) => Some(*rmse),
            _ => None,
        }
    }
}

/// Per-class `(f1, support)`; an undefined precision or recall counts as 0.
pub fn per_class_f1(pred: &[usize], truth: &[usize], n_classes: usize) -> Vec<(f64, usize)> {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
            (f1, tp[c] + fn_[c])
        })
        .collect()
}

pub fn evaluate_classification(pred: &[usize], truth: &[usize], n_classes: usize, avg: F1Average) -> MetricResult {
    assert_eq!(pred.len(), truth.len(), "prediction/truth length mismatch");
    let n = truth.len();
    if n == 0 {
        return MetricResult::Classification { accuracy: 0.0, f1: 0.0 };
    }
    let accuracy = pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n as f64;
    let per = per_class_f1(pred, truth, n_classes);
    let f1 = match avg {
        F1Average::Weighted => per.iter().map(|(f, s)| f * *s as f64).sum::<f64>() / n as f64,
        F1Average::Macro => {
            let seen: Vec<f64> = (0..n_classes)
                .filter(|c| truth.contains(c) || pred.contains(c))
                .map(|c| per[c].0)
                .collect();
            seen.iter().sum::<f64>() / seen.len() as f64
        }
    };
    MetricResult::Classification { accuracy, f1 }
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction/truth length mismatch");
    if pred.is_empty() {
        return 0.0;
    }
    (pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let r = evaluate_classification(&[0, 1, 2, 1], &[0, 1, 2, 1], 3, F1Average::Weighted);
        assert_eq!(r, MetricResult::Classification { accuracy: 1.0, f1: 1.0 });
    }

    #[test]
    fn half_right_binary() {
        // each class: precision 1/2, recall 1/2
        let r = evaluate_classification(&[0, 1, 0, 1], &[0, 0, 1, 1], 2, F1Average::Weighted);
        assert_eq!(r, MetricResult::Classification { accuracy: 0.5, f1: 0.5 });
    }

    #[test]
    fn rmse_zero_and_five() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rmse(&[5.0, 5.0], &[0.0, 10.0]), 5.0);
    }
}
