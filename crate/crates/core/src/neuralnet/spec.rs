use serde::{Deserialize, Serialize};

use super::net::Loss;
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Dense(57) → Dense(35) → Dense(k), dropout after each.
    FcnStress,
    /// LSTM(50) over a window of days → Dense(15) → Dense(k).
    LstmStress,
    /// Three Dense(128) blocks → scalar.
    FcnPhq9,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::FcnStress => "fcn_stress",
            ModelKind::LstmStress => "lstm_stress",
            ModelKind::FcnPhq9 => "fcn_phq9",
        }
    }
}

/// Architecture plus initialization seed.
///
/// `layer_sizes` lists hidden widths; the output width is `n_outputs`.
/// For [`ModelKind::LstmStress`] the first size is the LSTM width and the
/// second the dense width, and `n_inputs` is the per-timestep width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_inputs: usize,
    pub timesteps: usize,
    pub layer_sizes: Vec<usize>,
    pub dropout_rates: Vec<f64>,
    pub n_outputs: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub const LSTM_WINDOW: usize = 5;

    pub fn fcn_stress(n_inputs: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::FcnStress,
            n_inputs,
            timesteps: 1,
            layer_sizes: vec![57, 35],
            dropout_rates: vec![0.35, 0.15, 0.15],
            n_outputs: n_classes,
            seed,
        }
    }

    pub fn lstm_stress(n_inputs: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::LstmStress,
            n_inputs,
            timesteps: Self::LSTM_WINDOW,
            layer_sizes: vec![50, 15],
            dropout_rates: vec![0.2],
            n_outputs: n_classes,
            seed,
        }
    }

    pub fn fcn_phq9(n_inputs: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::FcnPhq9,
            n_inputs,
            timesteps: 1,
            layer_sizes: vec![128, 128, 128],
            dropout_rates: vec![0.3, 0.3, 0.3],
            n_outputs: 1,
            seed,
        }
    }

    pub fn with_layer_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.layer_sizes = sizes;
        self
    }

    pub fn with_timesteps(mut self, steps: usize) -> Self {
        self.timesteps = steps;
        self
    }

    pub fn without_dropout(mut self) -> Self {
        self.dropout_rates.iter_mut().for_each(|r| *r = 0.0);
        self
    }

    pub fn loss(&self) -> Loss {
        match self.kind {
            ModelKind::FcnPhq9 => Loss::Rmse,
            _ => Loss::SoftmaxCe,
        }
    }

    /// Width of one input row after flattening timesteps.
    pub fn input_width(&self) -> usize {
        self.n_inputs * self.timesteps
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let (sizes, drops) = match self.kind {
            ModelKind::FcnStress => (2, 3),
            ModelKind::LstmStress => (2, 1),
            ModelKind::FcnPhq9 => (self.layer_sizes.len().max(1), self.layer_sizes.len().max(1)),
        };
        if self.layer_sizes.len() != sizes || self.dropout_rates.len() != drops {
            return Err(NetError::Spec(format!(
                "{} expects {sizes} layer sizes and {drops} dropout rates",
                self.kind.as_str()
            )));
        }
        if self.n_inputs == 0 || self.n_outputs == 0 || self.timesteps == 0 || self.layer_sizes.contains(&0) {
            return Err(NetError::Spec("all widths must be positive".into()));
        }
        if self.kind != ModelKind::LstmStress && self.timesteps != 1 {
            return Err(NetError::Spec("dense models take one timestep".into()));
        }
        if self.kind == ModelKind::FcnPhq9 && self.n_outputs != 1 {
            return Err(NetError::Spec("regression head must be scalar".into()));
        }
        if self.dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(NetError::Spec("dropout rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        match self.kind {
            ModelKind::LstmStress => {
                let (h, d) = (self.layer_sizes[0], self.layer_sizes[1]);
                4 * h * (self.n_inputs + h) + 4 * h + dense(h, d) + dense(d, self.n_outputs)
            }
            _ => {
                let mut widths = vec![self.n_inputs];
                widths.extend(&self.layer_sizes);
                widths.push(self.n_outputs);
                widths.windows(2).map(|w| dense(w[0], w[1])).sum()
            }
        }
    }
}
