//! Default-probability model: gradient-boosted trees and a feed-forward
//! network, mixed with a weight chosen on validation AUC, fitted quarter by
//! quarter under an eight-quarter-ahead temporal split.

mod cv;
mod ensemble;
mod gbt;
mod mlp;

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cv::{fit_quarter, temporal_cv, CvOutcome, LabelIndex, QuarterDiagnostics, QuarterFit};
pub use ensemble::{select_ensemble_weight, HybridModel};
pub use gbt::{fit_gbt, GbtConfig, GbtModel, RegressionTree, TreeNode};
pub use mlp::{fit_mlp, DenseLayer, MlpConfig, MlpModel};

/// Anything that maps a feature row to a probability.
pub trait Predict {
    fn predict(&self, x: &[f64]) -> f64;

    fn predict_rows(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

impl<F: Fn(&[f64]) -> f64> Predict for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows<'a>(cols: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
            n += 1;
        }
        Ok(FeatureMatrix { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Hyperparameters of both components and the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gbt: GbtConfig,
    pub mlp: MlpConfig,
    pub val_fraction: f64,
    pub weight_grid_step: f64,
    /// Master seed for splits, initialization and batching.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gbt: GbtConfig::default(),
            mlp: MlpConfig::default(),
            val_fraction: 0.2,
            weight_grid_step: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.gbt.validate()?;
        self.mlp.validate()?;
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig("val_fraction must lie in (0, 1)".into()));
        }
        ensemble::grid_size(self.weight_grid_step)?;
        Ok(())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Probabilities are kept strictly inside (0, 1).
pub(crate) const PROB_EPS: f64 = 1e-15;

pub(crate) fn open_unit(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Mean binary cross-entropy of probabilities `p`.
pub fn log_loss(p: &[f64], y: &[u8]) -> f64 {
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = open_unit(p);
            if y != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / p.len() as f64
}

pub(crate) fn check_xy(x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::OutOfRange("labels must be 0 or 1".into()));
    }
    Ok(())
}
