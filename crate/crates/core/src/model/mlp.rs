//! Fully connected ReLU network with a sigmoid output, trained with Adam on
//! mini-batch binary cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_xy, open_unit, sigmoid, FeatureMatrix, Predict};
use crate::rng::domain::{MLP_BATCH, MLP_INIT};
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Width of each hidden layer.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 32],
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "mlp needs at least one non-empty hidden layer".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("mlp learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "mlp epochs and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, a: &[f64], z: &mut [f64]) {
        for (j, zj) in z.iter_mut().enumerate() {
            let row = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            *zj = self.bias[j] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Hidden layers followed by the single-unit output layer.
    pub layers: Vec<DenseLayer>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

struct Workspace {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    input: Vec<f64>,
}

impl MlpModel {
    fn new_random(dims: &[usize], seed: u64, input_mean: Vec<f64>, input_scale: Vec<f64>) -> Self {
        let mut rng = stream(seed, MLP_INIT, 0);
        let layers = dims
            .windows(2)
            .map(|w| {
                let mut layer = DenseLayer::zeros(w[0], w[1]);
                let sd = (2.0 / w[0] as f64).sqrt();
                let normal = Normal::new(0.0, sd).expect("positive sd");
                for v in &mut layer.weights {
                    *v = normal.sample(&mut rng);
                }
                layer
            })
            .collect();
        MlpModel {
            layers,
            input_mean,
            input_scale,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.input_mean.len()
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            z: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            a: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            delta: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            input: vec![0.0; self.n_inputs()],
        }
    }

    fn standardize(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (x[k] - self.input_mean[k]) / self.input_scale[k];
        }
    }

    /// Output logit; fills the workspace activations.
    fn forward(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        self.standardize(x, &mut ws.input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = ws.a.split_at_mut(l);
            let input: &[f64] = if l == 0 { &ws.input } else { &prev[l - 1] };
            layer.forward(input, &mut ws.z[l]);
            for (a, &z) in rest[0].iter_mut().zip(&ws.z[l]) {
                *a = if l == last { z } else { z.max(0.0) };
            }
        }
        ws.z[last][0]
    }

    /// Accumulates `scale * dLoss/dParams` of one sample into `grads`;
    /// returns the sample's loss.
    fn backward(&self, x: &[f64], y: u8, scale: f64, ws: &mut Workspace, grads: &mut [DenseLayer]) -> f64 {
        let z = self.forward(x, ws);
        let yf = f64::from(y);
        let loss = softplus(z) - yf * z;
        let last = self.layers.len() - 1;
        ws.delta[last][0] = (sigmoid(z) - yf) * scale;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input: &[f64] = if l == 0 { &ws.input } else { &ws.a[l - 1] };
            let g = &mut grads[l];
            for j in 0..layer.outputs {
                let d = ws.delta[l][j];
                if d == 0.0 {
                    continue;
                }
                g.bias[j] += d;
                let row = &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += d * a;
                }
            }
            if l > 0 {
                let (lower, upper) = ws.delta.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.fill(0.0);
                for j in 0..layer.outputs {
                    let d = upper[0][j];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&ws.z[l - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        loss
    }

    fn zero_grads(&self) -> Vec<DenseLayer> {
        self.layers
            .iter()
            .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Mean cross-entropy over the rows of `x`.
    pub fn loss(&self, x: &FeatureMatrix, y: &[u8]) -> f64 {
        let mut ws = self.workspace();
        let total: f64 = (0..x.rows())
            .map(|i| {
                let z = self.forward(x.row(i), &mut ws);
                softplus(z) - f64::from(y[i]) * z
            })
            .sum();
        total / x.rows() as f64
    }

    /// Mean loss and its gradient with respect to every weight and bias,
    /// laid out like `layers`.
    pub fn gradient(&self, x: &FeatureMatrix, y: &[u8]) -> (f64, Vec<DenseLayer>) {
        let mut ws = self.workspace();
        let mut grads = self.zero_grads();
        let scale = 1.0 / x.rows() as f64;
        let mut loss = 0.0;
        for i in 0..x.rows() {
            loss += self.backward(x.row(i), y[i], scale, &mut ws, &mut grads);
        }
        (loss * scale, grads)
    }
}

impl Predict for MlpModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut ws = self.workspace();
        open_unit(sigmoid(self.forward(x, &mut ws)))
    }

    fn predict_rows(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut ws = self.workspace();
        (0..x.rows())
            .map(|i| open_unit(sigmoid(self.forward(x.row(i), &mut ws))))
            .collect()
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Fits the network. Inputs are standardized with training moments, which
/// are stored in the model; constant columns get unit scale.
pub fn fit_mlp(x: &FeatureMatrix, y: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    cfg.validate()?;
    check_xy(x, y)?;
    let n = x.rows();
    let d = x.cols();
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for i in 0..n {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += x.get(i, j);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        for (j, v) in var.iter_mut().enumerate() {
            let e = x.get(i, j) - mean[j];
            *v += e * e;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / n as f64).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let mut dims = vec![d];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(1);
    let mut model = MlpModel::new_random(&dims, cfg.seed, mean, scale);

    let mut m1 = model.zero_grads();
    let mut m2 = model.zero_grads();
    let mut ws = model.workspace();
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0i32;
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, MLP_BATCH, epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.params_mut().for_each(|v| *v = 0.0));
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                loss += model.backward(x.row(i), y[i], scale, &mut ws, &mut grads);
            }
            if !loss.is_finite() {
                return Err(Error::DivergenceDetected { epoch });
            }
            step += 1;
            let c1 = 1.0 - BETA1.powi(step);
            let c2 = 1.0 - BETA2.powi(step);
            for l in 0..model.layers.len() {
                let params = model.layers[l].params_mut();
                let g = grads[l].params();
                let a = m1[l].params_mut();
                let b = m2[l].params_mut();
                for (((p, g), m), v) in params.zip(g).zip(a).zip(b) {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
        if model.layers.iter().any(|l| l.params().any(|v| !v.is_finite())) {
            return Err(Error::DivergenceDetected { epoch });
        }
    }
    Ok(model)
}
