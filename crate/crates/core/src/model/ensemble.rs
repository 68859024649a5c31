use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{open_unit, FeatureMatrix, GbtModel, MlpModel, Predict};
use crate::metrics::auc;
use crate::{Error, Result};

/// Convex mix `w * p_gbt + (1 - w) * p_mlp` of the two components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub gbt: GbtModel,
    pub mlp: MlpModel,
    pub weight_gbt: f64,
    /// Quarter whose labeled rows trained the model.
    pub trained_on: i32,
}

impl HybridModel {
    pub fn mix(&self, p_gbt: f64, p_mlp: f64) -> f64 {
        open_unit(self.weight_gbt * p_gbt + (1.0 - self.weight_gbt) * p_mlp)
    }
}

impl Predict for HybridModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.mix(self.gbt.predict(x), self.mlp.predict(x))
    }

    fn predict_rows(&self, x: &FeatureMatrix) -> Vec<f64> {
        let a = self.gbt.predict_rows(x);
        let b = self.mlp.predict_rows(x);
        a.iter().zip(&b).map(|(&a, &b)| self.mix(a, b)).collect()
    }
}

/// Number of grid intervals for a step that must divide 1.
pub(crate) fn grid_size(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig("weight grid step must lie in (0, 1]".into()));
    }
    let k = (1.0 / step).round();
    if (k * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("weight grid step must divide 1".into()));
    }
    Ok(k as usize)
}

/// Weight on the tree component that maximizes validation AUC over the grid
/// `0, step, ..., 1`. Equal AUCs prefer the weight closest to 0.5, then the
/// smaller weight.
pub fn select_ensemble_weight(p_gbt: &[f64], p_mlp: &[f64], labels: &[u8], step: f64) -> Result<f64> {
    if p_gbt.len() != p_mlp.len() {
        return Err(Error::LengthMismatch {
            expected: p_gbt.len(),
            got: p_mlp.len(),
        });
    }
    let k = grid_size(step)?;
    let mut best: Option<(f64, f64)> = None;
    let mut mixed = Vec::with_capacity(p_gbt.len());
    for i in 0..=k {
        let w = i as f64 / k as f64;
        mixed.clear();
        mixed.extend(p_gbt.iter().zip(p_mlp).map(|(&a, &b)| w * a + (1.0 - w) * b));
        let score = auc(&mixed, labels)?;
        let better = match best {
            None => true,
            Some((bw, bs)) => score > bs || (score == bs && (w - 0.5).abs() < (bw - 0.5).abs()),
        };
        if better {
            best = Some((w, score));
        }
    }
    Ok(best.expect("grid is non-empty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_tree_component_takes_full_weight() {
        // The tree scores separate the classes by a margin too thin to
        // survive any mixing with the uninformative network scores.
        let y = [0u8, 1, 0, 1, 0, 1];
        let p_gbt = [0.5, 0.5001, 0.5, 0.5001, 0.5, 0.5001];
        let p_mlp = [0.9, 0.1, 0.8, 0.2, 0.7, 0.3];
        assert_eq!(select_ensemble_weight(&p_gbt, &p_mlp, &y, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn flat_auc_prefers_half() {
        let y = [0u8, 1, 0, 1];
        let p = [0.2, 0.8, 0.3, 0.9];
        assert_eq!(select_ensemble_weight(&p, &p, &y, 0.05).unwrap(), 0.5);
    }

    #[test]
    fn step_must_divide_one() {
        let y = vec![0u8, 1];
        assert!(select_ensemble_weight(&[0.1, 0.9], &[0.1, 0.9], &y, 0.3).is_err());
    }
}
