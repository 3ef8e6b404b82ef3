use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::gemm;
use super::spec::{ModelKind, ModelSpec};
use super::tensor::Tensor;
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Mean softmax cross-entropy; targets are class indices.
    SoftmaxCe,
    /// Root of the mean squared error over the batch.
    Rmse,
}

#[derive(Debug, Clone)]
enum Layer {
    Dense { n_in: usize, n_out: usize, relu: bool, w: usize, b: usize },
    Dropout { rate: f64 },
    /// Gates packed as `[i | f | g | o]`, each `hidden` wide.
    Lstm { n_in: usize, hidden: usize, steps: usize, wx: usize, wh: usize, b: usize },
}

enum Cache {
    Dense { input: Vec<f64>, output: Vec<f64> },
    Dropout { scale: Option<Vec<f64>> },
    Lstm { input: Vec<f64>, gates: Vec<Vec<f64>>, h: Vec<Vec<f64>>, c: Vec<Vec<f64>> },
}

/// Layer plan for a [`ModelSpec`]; the parameters are passed in separately.
#[derive(Debug, Clone)]
pub struct Network {
    spec: ModelSpec,
    layers: Vec<Layer>,
    n_params: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Network {
    pub fn new(spec: &ModelSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut offset = 0;
        let dense = |layers: &mut Vec<Layer>, offset: &mut usize, n_in: usize, n_out: usize, relu: bool| {
            layers.push(Layer::Dense { n_in, n_out, relu, w: *offset, b: *offset + n_in * n_out });
            *offset += n_in * n_out + n_out;
        };
        let k = spec.n_outputs;
        match spec.kind {
            ModelKind::FcnStress | ModelKind::FcnPhq9 => {
                let mut n_in = spec.n_inputs;
                for (&h, &p) in spec.layer_sizes.iter().zip(&spec.dropout_rates) {
                    dense(&mut layers, &mut offset, n_in, h, true);
                    layers.push(Layer::Dropout { rate: p });
                    n_in = h;
                }
                dense(&mut layers, &mut offset, n_in, k, false);
                if let Some(&p) = spec.dropout_rates.get(spec.layer_sizes.len()) {
                    layers.push(Layer::Dropout { rate: p });
                }
            }
            ModelKind::LstmStress => {
                let (h, d) = (spec.layer_sizes[0], spec.layer_sizes[1]);
                let n_in = spec.n_inputs;
                let wx = 0;
                let wh = wx + n_in * 4 * h;
                let b = wh + h * 4 * h;
                layers.push(Layer::Lstm { n_in, hidden: h, steps: spec.timesteps, wx, wh, b });
                offset = b + 4 * h;
                layers.push(Layer::Dropout { rate: spec.dropout_rates[0] });
                dense(&mut layers, &mut offset, h, d, true);
                dense(&mut layers, &mut offset, d, k, false);
            }
        }
        Ok(Self { spec: spec.clone(), layers, n_params: offset })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    /// Uniform fan-in scaled weights: `sqrt(6/fan_in)` bound before a ReLU,
    /// `sqrt(3/fan_in)` otherwise. Biases start at zero except the LSTM
    /// forget gate, which starts at one.
    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params];
        for layer in &self.layers {
            match *layer {
                Layer::Dense { n_in, n_out, relu, w, .. } => {
                    let bound = ((if relu { 6.0 } else { 3.0 }) / n_in as f64).sqrt();
                    for v in &mut p[w..w + n_in * n_out] {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
                Layer::Lstm { n_in, hidden, wx, b, .. } => {
                    let bound = (3.0 / (n_in + hidden) as f64).sqrt();
                    for v in &mut p[wx..b] {
                        *v = rng.gen_range(-bound..bound);
                    }
                    for v in &mut p[b + hidden..b + 2 * hidden] {
                        *v = 1.0;
                    }
                }
                Layer::Dropout { .. } => {}
            }
        }
        p
    }

    fn check_input(&self, params: &[f64], x: &Tensor) -> Result<usize, NetError> {
        if params.len() != self.n_params {
            return Err(NetError::Shape(format!("expected {} parameters, got {}", self.n_params, params.len())));
        }
        let ok = match self.spec.kind {
            ModelKind::LstmStress => {
                x.shape().len() == 3 && x.shape()[1] == self.spec.timesteps && x.shape()[2] == self.spec.n_inputs
            }
            _ => x.shape().len() == 2 && x.shape()[1] == self.spec.n_inputs,
        };
        if !ok {
            return Err(NetError::Shape(format!(
                "{} input must be {}, got {:?}",
                self.spec.kind.as_str(),
                match self.spec.kind {
                    ModelKind::LstmStress =>
                        format!("[batch, {}, {}]", self.spec.timesteps, self.spec.n_inputs),
                    _ => format!("[batch, {}]", self.spec.n_inputs),
                },
                x.shape()
            )));
        }
        Ok(x.rows())
    }

    /// Logits (classification) or scalar predictions, shape `[batch, n_outputs]`.
    /// With `dropout = None` every dropout layer is the identity; with a
    /// generator, masks are drawn and kept units scaled by `1/(1-p)`.
    pub fn forward(&self, params: &[f64], x: &Tensor, dropout: Option<&mut ChaCha8Rng>) -> Result<Tensor, NetError> {
        let batch = self.check_input(params, x)?;
        let (out, _) = self.run(params, x.data().to_vec(), batch, dropout, false);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NetError::Shape("forward pass produced non-finite values".into()));
        }
        Tensor::matrix(batch, self.spec.n_outputs, out)
    }

    fn run(
        &self,
        params: &[f64],
        mut act: Vec<f64>,
        batch: usize,
        mut dropout: Option<&mut ChaCha8Rng>,
        keep: bool,
    ) -> (Vec<f64>, Vec<Cache>) {
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        for layer in &self.layers {
            match *layer {
                Layer::Dense { n_in, n_out, relu, w, b } => {
                    let mut out = vec![0.0; batch * n_out];
                    for row in out.chunks_exact_mut(n_out) {
                        row.copy_from_slice(&params[b..b + n_out]);
                    }
                    gemm(batch, n_in, n_out, (&act, n_in, 1), (&params[w..b], n_out, 1), 1.0, &mut out, n_out);
                    if relu {
                        out.iter_mut().for_each(|v| *v = v.max(0.0));
                    }
                    let input = std::mem::replace(&mut act, out);
                    if keep {
                        caches.push(Cache::Dense { input, output: act.clone() });
                    }
                }
                Layer::Dropout { rate } => {
                    let scale = match dropout.as_deref_mut() {
                        Some(rng) if rate > 0.0 => {
                            let keep_scale = 1.0 / (1.0 - rate);
                            // drop iff a uniform u32 falls below rate·2³²
                            let cut = (rate * 4_294_967_296.0) as u64;
                            let mask: Vec<f64> = act
                                .iter()
                                .map(|_| if (rng.next_u32() as u64) < cut { 0.0 } else { keep_scale })
                                .collect();
                            act.iter_mut().zip(&mask).for_each(|(a, m)| *a *= m);
                            Some(mask)
                        }
                        _ => None,
                    };
                    if keep {
                        caches.push(Cache::Dropout { scale });
                    }
                }
                Layer::Lstm { n_in, hidden, steps, wx, wh, b } => {
                    let g4 = 4 * hidden;
                    let stride = steps * n_in;
                    let mut hs = vec![vec![0.0; batch * hidden]];
                    let mut cs = vec![vec![0.0; batch * hidden]];
                    let mut gates_all = Vec::with_capacity(steps);
                    for t in 0..steps {
                        let mut z = vec![0.0; batch * g4];
                        for row in z.chunks_exact_mut(g4) {
                            row.copy_from_slice(&params[b..b + g4]);
                        }
                        gemm(batch, n_in, g4, (&act[t * n_in..], stride, 1), (&params[wx..wh], g4, 1), 1.0, &mut z, g4);
                        gemm(batch, hidden, g4, (&hs[t], hidden, 1), (&params[wh..b], g4, 1), 1.0, &mut z, g4);
                        let mut h = vec![0.0; batch * hidden];
                        let mut c = vec![0.0; batch * hidden];
                        for r in 0..batch {
                            let zr = &mut z[r * g4..(r + 1) * g4];
                            for j in 0..hidden {
                                let i = sigmoid(zr[j]);
                                let f = sigmoid(zr[hidden + j]);
                                let g = zr[2 * hidden + j].tanh();
                                let o = sigmoid(zr[3 * hidden + j]);
                                zr[j] = i;
                                zr[hidden + j] = f;
                                zr[2 * hidden + j] = g;
                                zr[3 * hidden + j] = o;
                                let cv = f * cs[t][r * hidden + j] + i * g;
                                c[r * hidden + j] = cv;
                                h[r * hidden + j] = o * cv.tanh();
                            }
                        }
                        gates_all.push(z);
                        hs.push(h);
                        cs.push(c);
                    }
                    let out = hs[steps].clone();
                    let input = std::mem::replace(&mut act, out);
                    if keep {
                        caches.push(Cache::Lstm { input, gates: gates_all, h: hs, c: cs });
                    }
                }
            }
        }
        (act, caches)
    }

    /// Loss value on `targets` (class indices as `f64`, or regression values).
    pub fn loss(&self, params: &[f64], x: &Tensor, targets: &[f64], loss: Loss, dropout: Option<&mut ChaCha8Rng>) -> Result<f64, NetError> {
        let out = self.forward(params, x, dropout)?;
        Ok(self.loss_head(out.data(), targets, loss)?.0)
    }

    fn loss_head(&self, out: &[f64], targets: &[f64], loss: Loss) -> Result<(f64, Vec<f64>), NetError> {
        let k = self.spec.n_outputs;
        let batch = out.len() / k;
        if targets.len() != batch {
            return Err(NetError::Shape(format!("{} targets for a batch of {batch}", targets.len())));
        }
        if batch == 0 {
            return Err(NetError::Shape("empty batch".into()));
        }
        let n = batch as f64;
        match loss {
            Loss::SoftmaxCe => {
                let mut total = 0.0;
                let mut grad = vec![0.0; out.len()];
                for (r, &y) in targets.iter().enumerate() {
                    let cls = y as usize;
                    if y < 0.0 || y.fract() != 0.0 || cls >= k {
                        return Err(NetError::Shape(format!("class target {y} outside 0..{k}")));
                    }
                    let row = &out[r * k..(r + 1) * k];
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    let lse = max + sum.ln();
                    total += lse - row[cls];
                    for j in 0..k {
                        let p = (row[j] - lse).exp();
                        grad[r * k + j] = (p - if j == cls { 1.0 } else { 0.0 }) / n;
                    }
                }
                Ok((total / n, grad))
            }
            Loss::Rmse => {
                if k != 1 {
                    return Err(NetError::Shape("rmse needs a scalar output".into()));
                }
                let mse = out.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n;
                let rmse = mse.sqrt();
                let grad = if rmse > 0.0 {
                    out.iter().zip(targets).map(|(p, y)| (p - y) / (n * rmse)).collect()
                } else {
                    vec![0.0; out.len()]
                };
                Ok((rmse, grad))
            }
        }
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backward(
        &self,
        params: &[f64],
        x: &Tensor,
        targets: &[f64],
        loss: Loss,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>), NetError> {
        let batch = self.check_input(params, x)?;
        let (out, caches) = self.run(params, x.data().to_vec(), batch, dropout, true);
        let (value, mut delta) = self.loss_head(&out, targets, loss)?;
        let mut grad = vec![0.0; self.n_params];
        for (layer, cache) in self.layers.iter().zip(&caches).rev() {
            match (layer, cache) {
                (&Layer::Dense { n_in, n_out, relu, w, b }, Cache::Dense { input, output }) => {
                    if relu {
                        delta.iter_mut().zip(output).for_each(|(d, o)| {
                            if *o <= 0.0 {
                                *d = 0.0
                            }
                        });
                    }
                    gemm(n_in, batch, n_out, (input, 1, n_in), (&delta, n_out, 1), 0.0, &mut grad[w..b], n_out);
                    let gb = &mut grad[b..b + n_out];
                    for row in delta.chunks_exact(n_out) {
                        gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                    }
                    let mut dx = vec![0.0; batch * n_in];
                    gemm(batch, n_out, n_in, (&delta, n_out, 1), (&params[w..b], 1, n_out), 0.0, &mut dx, n_in);
                    delta = dx;
                }
                (Layer::Dropout { .. }, Cache::Dropout { scale }) => {
                    if let Some(mask) = scale {
                        delta.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
                    }
                }
                (&Layer::Lstm { n_in, hidden, steps, wx, wh, b }, Cache::Lstm { input, gates, h, c }) => {
                    let g4 = 4 * hidden;
                    let stride = steps * n_in;
                    let mut dh = delta.clone();
                    let mut dc = vec![0.0; batch * hidden];
                    let mut dz = vec![0.0; batch * g4];
                    for t in (0..steps).rev() {
                        let gt = &gates[t];
                        for r in 0..batch {
                            for j in 0..hidden {
                                let q = r * hidden + j;
                                let base = r * g4;
                                let (i, f, g, o) = (
                                    gt[base + j],
                                    gt[base + hidden + j],
                                    gt[base + 2 * hidden + j],
                                    gt[base + 3 * hidden + j],
                                );
                                let tc = c[t + 1][q].tanh();
                                let d_o = dh[q] * tc;
                                let dct = dc[q] + dh[q] * o * (1.0 - tc * tc);
                                dz[base + j] = dct * g * i * (1.0 - i);
                                dz[base + hidden + j] = dct * c[t][q] * f * (1.0 - f);
                                dz[base + 2 * hidden + j] = dct * i * (1.0 - g * g);
                                dz[base + 3 * hidden + j] = d_o * o * (1.0 - o);
                                dc[q] = dct * f;
                            }
                        }
                        gemm(n_in, batch, g4, (&input[t * n_in..], 1, stride), (&dz, g4, 1), 1.0, &mut grad[wx..wh], g4);
                        gemm(hidden, batch, g4, (&h[t], 1, hidden), (&dz, g4, 1), 1.0, &mut grad[wh..b], g4);
                        let gb = &mut grad[b..b + g4];
                        for row in dz.chunks_exact(g4) {
                            gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                        }
                        gemm(batch, g4, hidden, (&dz, g4, 1), (&params[wh..b], 1, g4), 0.0, &mut dh, hidden);
                    }
                }
                _ => unreachable!("cache layout follows layer layout"),
            }
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn one_layer_phq() -> (Network, Vec<f64>) {
        // FcnPhq9 with no hidden layers is not expressible, so build the
        // smallest one and zero everything but the head by hand.
        let spec = ModelSpec::fcn_phq9(2, 0).with_layer_sizes(vec![2]).without_dropout();
        let mut s = spec.clone();
        s.dropout_rates = vec![0.0];
        let net = Network::new(&s).unwrap();
        (net, vec![0.0; s.param_count()])
    }

    #[test]
    fn dense_hand_computation() {
        // hidden layer is identity on positive inputs: W = I, b = 0; head w = [1,2], b = 3
        let (net, mut p) = one_layer_phq();
        p[..4].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        p[6..9].copy_from_slice(&[1.0, 2.0, 3.0]);
        let x = Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(net.forward(&p, &x, None).unwrap().data(), &[6.0]);
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let spec = ModelSpec::fcn_stress(4, 3, 1);
        let net = Network::new(&spec).unwrap();
        let p = vec![0.0; net.param_count()];
        let x = Tensor::matrix(2, 4, vec![1.0, -2.0, 3.0, 0.5, 9.0, 9.0, -9.0, 0.0]).unwrap();
        assert!(net.forward(&p, &x, None).unwrap().data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(net.forward(&p, &x, Some(&mut rng)).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_dropout_matches_inference() {
        let spec = ModelSpec::fcn_stress(3, 2, 1).without_dropout();
        let net = Network::new(&spec).unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(5));
        let x = Tensor::matrix(2, 3, vec![0.1, 0.2, -0.3, 1.0, 0.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(net.forward(&p, &x, None).unwrap(), net.forward(&p, &x, Some(&mut rng)).unwrap());
    }

    #[test]
    fn output_bias_gradient_at_zero_weights_is_mean_residual() {
        let spec = ModelSpec::fcn_stress(2, 2, 0).without_dropout();
        let net = Network::new(&spec).unwrap();
        let p = vec![0.0; net.param_count()];
        let x = Tensor::matrix(4, 2, vec![1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0]).unwrap();
        for targets in [vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 1.0]] {
            let (_, g) = net.backward(&p, &x, &targets, Loss::SoftmaxCe, None).unwrap();
            let head_b = &g[g.len() - 2..];
            // softmax of zero logits is uniform; residual is 1/2 minus class frequency
            for (c, gb) in head_b.iter().enumerate() {
                let freq = targets.iter().filter(|&&t| t as usize == c).count() as f64 / 4.0;
                assert!((gb - (0.5 - freq)).abs() < 1e-15);
            }
            // zero weights block every other path
            assert!(g[..g.len() - 2].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rmse_at_target_has_zero_gradient() {
        let spec = ModelSpec::fcn_phq9(3, 0).with_layer_sizes(vec![4]);
        let mut spec = spec;
        spec.dropout_rates = vec![0.0];
        let net = Network::new(&spec).unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let x = Tensor::matrix(2, 3, vec![0.3, 0.1, 0.2, -1.0, 0.5, 0.0]).unwrap();
        let pred = net.forward(&p, &x, None).unwrap().into_data();
        let (l, g) = net.backward(&p, &x, &pred, Loss::Rmse, None).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_counts_match_layout() {
        for spec in [
            ModelSpec::fcn_stress(84, 2, 0),
            ModelSpec::fcn_stress(171, 3, 0),
            ModelSpec::lstm_stress(36, 2, 0),
            ModelSpec::fcn_phq9(246, 0),
        ] {
            let net = Network::new(&spec).unwrap();
            assert_eq!(net.param_count(), spec.param_count());
            assert_eq!(net.init_params(&mut ChaCha8Rng::seed_from_u64(0)).len(), spec.param_count());
        }
        // written out by hand
        assert_eq!(ModelSpec::fcn_stress(84, 2, 0).param_count(), 84 * 57 + 57 + 57 * 35 + 35 + 35 * 2 + 2);
        assert_eq!(
            ModelSpec::lstm_stress(10, 3, 0).param_count(),
            4 * 50 * 10 + 4 * 50 * 50 + 4 * 50 + 50 * 15 + 15 + 15 * 3 + 3
        );
        assert_eq!(ModelSpec::fcn_phq9(20, 0).param_count(), 20 * 128 + 128 + 2 * (128 * 128 + 128) + 128 + 1);
    }

    #[test]
    fn dropout_is_unbiased_in_expectation() {
        let spec = ModelSpec::fcn_phq9(3, 0).with_layer_sizes(vec![6]);
        let mut spec = spec;
        spec.dropout_rates = vec![0.3];
        let net = Network::new(&spec).unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(2));
        let x = Tensor::matrix(1, 3, vec![0.4, -0.2, 0.9]).unwrap();
        let det = net.forward(&p, &x, None).unwrap().data()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mean = (0..n).map(|_| net.forward(&p, &x, Some(&mut rng)).unwrap().data()[0]).sum::<f64>() / n as f64;
        assert!((mean - det).abs() < 1e-2, "{mean} vs {det}");
    }

    #[test]
    fn shape_errors() {
        let net = Network::new(&ModelSpec::lstm_stress(3, 2, 0)).unwrap();
        let p = vec![0.0; net.param_count()];
        let flat = Tensor::matrix(1, 15, vec![0.0; 15]).unwrap();
        assert!(matches!(net.forward(&p, &flat, None), Err(NetError::Shape(_))));
        let x = Tensor::new(vec![1, 5, 3], vec![0.0; 15]).unwrap();
        assert!(net.forward(&p, &x, None).is_ok());
        assert!(matches!(net.backward(&p, &x, &[2.0], Loss::SoftmaxCe, None), Err(NetError::Shape(_))));
    }
}
