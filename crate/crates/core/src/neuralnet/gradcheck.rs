use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::Network;
use super::spec::{ModelKind, ModelSpec};
use super::tensor::Tensor;
use super::NetError;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub n_trials: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    pub batch: usize,
    /// Sample a fresh dropout mask for every loss evaluation. The loss is
    /// then not a deterministic function of the parameters, so this is only
    /// useful to show how far the check degrades.
    pub dropout: bool,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { n_trials: 20, epsilon: 1e-5, tolerance: 1e-4, batch: 4, dropout: false, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: ModelKind,
    /// Worst relative error per trial.
    pub trial_errors: Vec<f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.trial_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.trial_errors.iter().all(|e| *e < self.tolerance)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps entries whose true
/// gradient is ~0 from dividing rounding noise by nothing.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares analytic gradients against central finite differences on
/// random parameters, inputs and targets.
pub fn gradient_check(spec: &ModelSpec, cfg: &GradCheckConfig) -> Result<GradCheckReport, NetError> {
    if !(cfg.epsilon > 0.0) {
        return Err(NetError::Spec("epsilon must be positive".into()));
    }
    let spec = if cfg.dropout { spec.clone() } else { spec.clone().without_dropout() };
    let net = Network::new(&spec)?;
    let loss = spec.loss();
    let mut trial_errors = Vec::with_capacity(cfg.n_trials);
    for trial in 0..cfg.n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial as u64));
        let params: Vec<f64> = net.init_params(&mut rng).iter().map(|p| p + rng.gen_range(-0.1..0.1)).collect();
        let mut shape = vec![cfg.batch];
        if spec.kind == ModelKind::LstmStress {
            shape.push(spec.timesteps);
        }
        shape.push(spec.n_inputs);
        let n: usize = shape.iter().product();
        let x = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let y: Vec<f64> = (0..cfg.batch)
            .map(|_| match spec.kind {
                ModelKind::FcnPhq9 => rng.gen_range(0.0..27.0),
                _ => rng.gen_range(0..spec.n_outputs) as f64,
            })
            .collect();
        let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed ^ trial as u64);
        let mask = |r: &ChaCha8Rng| if cfg.dropout { Some(r.clone()) } else { None };
        let (_, grad) = net.backward(&params, &x, &y, loss, mask(&drop_rng).as_mut())?;
        let mut worst: f64 = 0.0;
        let mut p = params.clone();
        for i in 0..p.len() {
            if cfg.dropout {
                // advance so each evaluation sees a different mask
                drop_rng.gen::<u64>();
            }
            p[i] = params[i] + cfg.epsilon;
            let up = net.loss(&p, &x, &y, loss, mask(&drop_rng).as_mut())?;
            if cfg.dropout {
                drop_rng.gen::<u64>();
            }
            p[i] = params[i] - cfg.epsilon;
            let down = net.loss(&p, &x, &y, loss, mask(&drop_rng).as_mut())?;
            p[i] = params[i];
            worst = worst.max(relative_error(grad[i], (up - down) / (2.0 * cfg.epsilon)));
        }
        trial_errors.push(worst);
    }
    Ok(GradCheckReport { kind: spec.kind, trial_errors, tolerance: cfg.tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_fcn() -> ModelSpec {
        ModelSpec::fcn_stress(4, 2, 0).with_layer_sizes(vec![5, 3])
    }

    #[test]
    fn reduced_architectures_pass() {
        let lstm = ModelSpec::lstm_stress(3, 2, 0).with_layer_sizes(vec![4, 3]).with_timesteps(3);
        let phq = ModelSpec::fcn_phq9(4, 0).with_layer_sizes(vec![6, 6, 6]);
        for spec in [small_fcn(), lstm, phq] {
            let r = gradient_check(&spec, &GradCheckConfig::default()).unwrap();
            assert!(r.passed(), "{:?}: {:?}", r.kind, r.trial_errors);
        }
    }

    #[test]
    fn resampled_dropout_breaks_agreement() {
        let cfg = GradCheckConfig { n_trials: 5, ..Default::default() };
        let off = gradient_check(&small_fcn(), &cfg).unwrap();
        let on = gradient_check(&small_fcn(), &GradCheckConfig { dropout: true, ..cfg }).unwrap();
        assert!(on.max_error() > off.max_error());
        assert!(!on.passed());
    }

    #[test]
    fn epsilon_must_be_positive() {
        let cfg = GradCheckConfig { epsilon: 0.0, ..Default::default() };
        assert!(gradient_check(&small_fcn(), &cfg).is_err());
    }
}
