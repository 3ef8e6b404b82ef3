use std::collections::BTreeMap;

use crate::ingest::UserId;

/// Predicts each user's most frequent training class. Ties go to the lower
/// class index; users absent from training get the global mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MostFrequentBaseline {
    per_user: BTreeMap<UserId, usize>,
    global: usize,
}

fn mode(counts: &[usize]) -> usize {
    counts.iter().enumerate().fold(0, |best, (c, n)| if *n > counts[best] { c } else { best })
}

impl MostFrequentBaseline {
    pub fn fit(users: &[UserId], labels: &[usize], n_classes: usize) -> Self {
        let mut per_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        let mut global = vec![0; n_classes];
        for (u, &y) in users.iter().zip(labels) {
            per_user.entry(u.clone()).or_insert_with(|| vec![0; n_classes])[y] += 1;
            global[y] += 1;
        }
        Self { per_user: per_user.into_iter().map(|(u, c)| (u, mode(&c))).collect(), global: mode(&global) }
    }

    pub fn predict(&self, user: &UserId) -> usize {
        self.per_user.get(user).copied().unwrap_or(self.global)
    }
}

/// Predicts the mean training score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanBaseline {
    pub mean: f64,
}

impl MeanBaseline {
    pub fn fit(scores: &[f64]) -> Option<Self> {
        (!scores.is_empty()).then(|| Self { mean: scores.iter().sum::<f64>() / scores.len() as f64 })
    }

    pub fn predict(&self) -> f64 {
        self.mean
    }
}
