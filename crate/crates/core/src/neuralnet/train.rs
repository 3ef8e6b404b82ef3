use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::Network;
use super::spec::ModelSpec;
use super::tensor::Tensor;
use super::NetError;

pub const MODEL_FORMAT: &str = "phenolab-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Training schedule. No early stopping: every run does `epochs` passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self { optimizer: Optimizer::default(), lr: 1e-3, batch_size: 32, epochs: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub parameters: Vec<f64>,
    /// Mean minibatch loss per epoch.
    pub train_log: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// The two generators a run uses: initialization and shuffling/dropout.
pub(crate) fn run_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(0);
    let mut sample = ChaCha8Rng::seed_from_u64(seed);
    sample.set_stream(1);
    (init, sample)
}

impl TrainedModel {
    pub fn network(&self) -> Result<Network, NetError> {
        Network::new(&self.spec)
    }

    /// Inference-mode outputs (dropout off).
    pub fn predict(&self, x: &Tensor) -> Result<Tensor, NetError> {
        self.network()?.forward(&self.parameters, x, None)
    }

    /// Arg-max class per row; ties go to the lower index.
    pub fn predict_classes(&self, x: &Tensor) -> Result<Vec<usize>, NetError> {
        let out = self.predict(x)?;
        let k = self.spec.n_outputs;
        Ok(out
            .data()
            .chunks_exact(k)
            .map(|row| {
                row.iter().enumerate().fold(0, |best, (j, v)| if *v > row[best] { j } else { best })
            })
            .collect())
    }

    /// JSON document: `{"format","version","spec","parameters","train_log"}`.
    pub fn to_json(&self) -> String {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_FORMAT_VERSION, model: self.clone() };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| NetError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
            return Err(NetError::Format(format!("unsupported model file {} v{}", file.format, file.version)));
        }
        if file.model.parameters.len() != file.model.spec.param_count() {
            return Err(NetError::Format("parameter count does not match spec".into()));
        }
        Ok(file.model)
    }
}

/// Minibatch training from `spec.seed`. Identical inputs give bit-identical
/// parameters.
pub fn train(spec: &ModelSpec, x: &Tensor, y: &[f64], hyper: &Hyper) -> Result<TrainedModel, NetError> {
    train_with(spec, x, y, hyper, |_, _| {})
}

/// [`train`] with a hook called after each epoch with the current parameters.
pub fn train_with(
    spec: &ModelSpec,
    x: &Tensor,
    y: &[f64],
    hyper: &Hyper,
    mut on_epoch: impl FnMut(usize, &[f64]),
) -> Result<TrainedModel, NetError> {
    let net = Network::new(spec)?;
    let n = x.rows();
    if n == 0 || y.len() != n {
        return Err(NetError::Shape(format!("{n} examples with {} targets", y.len())));
    }
    if hyper.batch_size == 0 {
        return Err(NetError::Spec("batch_size must be positive".into()));
    }
    let loss = spec.loss();
    let (mut init_rng, mut rng) = run_rngs(spec.seed);
    let mut params = net.init_params(&mut init_rng);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let xb = x.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let (l, g) = net.backward(&params, &xb, &yb, loss, Some(&mut rng))?;
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(NetError::Divergence { epoch });
            }
            total += l * chunk.len() as f64;
            step += 1;
            match hyper.optimizer {
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for i in 0..params.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        params[i] -= hyper.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
                Optimizer::Sgd => params.iter_mut().zip(&g).for_each(|(p, g)| *p -= hyper.lr * g),
            }
        }
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() {
            return Err(NetError::Divergence { epoch });
        }
        log.push(epoch_loss);
        on_epoch(epoch, &params);
    }
    Ok(TrainedModel { spec: spec.clone(), parameters: params, train_log: log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> (Tensor, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        while rows.len() < n {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = p[0] + 0.5 * p[1] - 0.25 * p[3];
            if s.abs() < 0.1 {
                continue;
            }
            y.push(if s > 0.0 { 1.0 } else { 0.0 });
            rows.push(p);
        }
        (Tensor::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_data_is_learned() {
        let (x, y) = separable(200, 4);
        // the generating hyperplane itself classifies every point
        let oracle = (0..200).filter(|&i| {
            let r = x.row(i);
            ((r[0] + 0.5 * r[1] - 0.25 * r[3] > 0.0) as u8 as f64) == y[i]
        });
        assert_eq!(oracle.count(), 200);

        let spec = ModelSpec::fcn_stress(4, 2, 17);
        let net = Network::new(&spec).unwrap();
        let mut full_loss = Vec::new();
        let model = train_with(&spec, &x, &y, &Hyper::default(), |_, p| {
            full_loss.push(net.loss(p, &x, &y, spec.loss(), None).unwrap())
        })
        .unwrap();
        let pred = model.predict_classes(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(p, t)| **p as f64 == **t).count() as f64 / 200.0;
        assert!(acc >= 0.95, "train accuracy {acc}");
        assert_eq!(model.train_log.len(), 100);
        let log = &full_loss;
        for e in 0..log.len() - 10 {
            assert!(log[e + 10] <= log[e], "loss rose between epoch {e} and {}", e + 10);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = separable(20, 1);
        let spec = ModelSpec::fcn_stress(4, 2, 3);
        let hyper = Hyper { epochs: 0, ..Hyper::default() };
        let model = train(&spec, &x, &y, &hyper).unwrap();
        let net = Network::new(&spec).unwrap();
        assert_eq!(model.parameters, net.init_params(&mut run_rngs(3).0));
        assert!(model.train_log.is_empty());
    }

    #[test]
    fn same_seed_same_bits_and_json_roundtrip() {
        let (x, y) = separable(40, 2);
        let spec = ModelSpec::fcn_stress(4, 2, 8);
        let hyper = Hyper { epochs: 5, ..Hyper::default() };
        let a = train(&spec, &x, &y, &hyper).unwrap();
        let b = train(&spec, &x, &y, &hyper).unwrap();
        assert_eq!(a, b);
        let c = train(&ModelSpec { seed: 9, ..spec }, &x, &y, &hyper).unwrap();
        assert_ne!(a.parameters, c.parameters);
        let back = TrainedModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Tensor::matrix(4, 1, vec![1e150, -1e150, 1e150, -1e150]).unwrap();
        let spec = ModelSpec::fcn_phq9(1, 0).with_layer_sizes(vec![2]);
        let mut spec = spec;
        spec.dropout_rates = vec![0.0];
        let hyper = Hyper { optimizer: Optimizer::Sgd, lr: 1e200, batch_size: 4, epochs: 3 };
        let err = train(&spec, &x, &[1e150, 0.0, 1.0, 0.0], &hyper).unwrap_err();
        assert!(matches!(err, NetError::Divergence { .. } | NetError::Shape(_)), "{err}");
    }
}
