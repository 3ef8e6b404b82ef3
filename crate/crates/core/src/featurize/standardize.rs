use super::FeatureError;

/// Per-column z-scoring fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean/std per column over `fit_rows`. Masked entries do
    /// not contribute, so after transformation a masked value equals the
    /// observed mean.
    pub fn fit(rows: &[Vec<f64>], masks: Option<&[Vec<bool>]>, fit_rows: &[usize]) -> Result<Self, FeatureError> {
        if fit_rows.is_empty() {
            return Err(FeatureError::EmptyFit);
        }
        let width = rows.first().map_or(0, Vec::len);
        let observed = |r: usize, c: usize| masks.map_or(true, |m| !m[r][c]);
        let mut mean = vec![0.0; width];
        let mut std = vec![0.0; width];
        for c in 0..width {
            let vals: Vec<f64> = fit_rows.iter().filter(|&&r| observed(r, c)).map(|&r| rows[r][c]).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            mean[c] = m;
            let s = v.sqrt();
            // Rounding leaves a tiny spread on constant columns.
            std[c] = if s > 1e-12 * (1.0 + m.abs()) { s } else { 0.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, values: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                if mask.is_some_and(|m| m[c]) || self.std[c] == 0.0 {
                    0.0
                } else {
                    (v - self.mean[c]) / self.std[c]
                }
            })
            .collect()
    }
}

/// Z-scores every row with statistics from `fit_rows` only.
pub fn standardize(
    rows: &[Vec<f64>],
    masks: Option<&[Vec<bool>]>,
    fit_rows: &[usize],
) -> Result<(Vec<Vec<f64>>, Standardizer), FeatureError> {
    let s = Standardizer::fit(rows, masks, fit_rows)?;
    let out = rows
        .iter()
        .enumerate()
        .map(|(i, r)| s.transform_row(r, masks.map(|m| m[i].as_slice())))
        .collect();
    Ok((out, s))
}
