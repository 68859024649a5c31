//! Shapley attribution of a prediction function relative to a background
//! sample, with interventional (marginal) replacement of absent features.
//!
//! The value of a coalition `S` at `x` is the background average of `f`
//! evaluated with the features in `S` taken from `x` and the rest from the
//! background row. Features outside the `active` set of [`shapley_exact`]
//! are held at `x` throughout.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureGroup, N_FEATURES};
use crate::model::{FeatureMatrix, Predict};
use crate::rng::domain::SHAP_PERMUTATION;
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ShapConfig {
    /// Reference distribution for absent features.
    pub background: FeatureMatrix,
    /// Permutations per observation for the sampled estimator.
    pub n_permutations: usize,
    pub seed: u64,
    /// Largest dimension handled by exact enumeration.
    pub exact_dim_limit: usize,
}

impl ShapConfig {
    pub fn new(background: FeatureMatrix) -> Self {
        ShapConfig {
            background,
            n_permutations: 16,
            seed: 0,
            exact_dim_limit: 15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.background.rows() == 0 {
            return Err(Error::EmptyInput);
        }
        if self.n_permutations == 0 {
            return Err(Error::InvalidConfig("n_permutations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seeded subsample of `n` rows without replacement, kept in row order.
/// Returns every row when `n` exceeds the row count.
pub fn subsample(x: &FeatureMatrix, n: usize, seed: u64, domain: u64) -> FeatureMatrix {
    if n >= x.rows() {
        return x.clone();
    }
    let mut idx = index::sample(&mut stream(seed, domain, 0), x.rows(), n).into_vec();
    idx.sort_unstable();
    x.select(&idx)
}

fn check_dims(x: &[f64], cfg: &ShapConfig) -> Result<()> {
    cfg.validate()?;
    if x.len() != cfg.background.cols() {
        return Err(Error::LengthMismatch {
            expected: cfg.background.cols(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Exact Shapley values by enumerating all `2^|active|` coalitions. The
/// result has one entry per feature; inactive features get 0.
pub fn shapley_exact<M: Predict + ?Sized>(
    model: &M,
    x: &[f64],
    active: &[usize],
    cfg: &ShapConfig,
) -> Result<Vec<f64>> {
    check_dims(x, cfg)?;
    let k = active.len();
    if k > cfg.exact_dim_limit {
        return Err(Error::DimTooLarge {
            dim: k,
            limit: cfg.exact_dim_limit,
        });
    }
    if active.iter().any(|&j| j >= x.len()) {
        return Err(Error::OutOfRange("active feature index".into()));
    }
    let bg = &cfg.background;
    let mut value = vec![0.0; 1usize << k];
    let mut z = vec![0.0; x.len()];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut total = 0.0;
        for b in 0..bg.rows() {
            z.copy_from_slice(x);
            for (bit, &j) in active.iter().enumerate() {
                if mask & (1 << bit) == 0 {
                    z[j] = bg.get(b, j);
                }
            }
            total += model.predict(&z);
        }
        *v = total / bg.rows() as f64;
    }

    // weight[s] = s! (k - s - 1)! / k!
    let mut weight = vec![0.0; k.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(k) {
        let mut c = 1.0;
        for i in 0..s {
            c *= (s - i) as f64 / (k - i) as f64;
        }
        *w = c / (k - s) as f64;
    }
    let mut phi = vec![0.0; x.len()];
    for (bit, &j) in active.iter().enumerate() {
        let mut acc = 0.0;
        for mask in 0..value.len() {
            if mask & (1 << bit) == 0 {
                let s = (mask as u32).count_ones() as usize;
                acc += weight[s] * (value[mask | (1 << bit)] - value[mask]);
            }
        }
        phi[j] = acc;
    }
    Ok(phi)
}

/// Monte Carlo Shapley values with their standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Permutation-sampling estimator: each draw pairs a random feature order
/// with a random background row and switches features from the background
/// value to `x` one at a time, crediting each feature with the change in
/// `f`. Every draw's increments sum to `f(x) - f(background row)`.
pub fn shapley_sampled<M: Predict + ?Sized>(model: &M, x: &[f64], cfg: &ShapConfig) -> Result<ShapleyEstimate> {
    check_dims(x, cfg)?;
    let d = x.len();
    let bg = &cfg.background;
    let mut rng = stream(cfg.seed, SHAP_PERMUTATION, 0);
    let mut order: Vec<usize> = (0..d).collect();
    let mut z = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..cfg.n_permutations {
        order.shuffle(&mut rng);
        let b = rng.random_range(0..bg.rows());
        z.copy_from_slice(bg.row(b));
        let mut prev = model.predict(&z);
        for &j in &order {
            z[j] = x[j];
            let next = model.predict(&z);
            let delta = next - prev;
            sum[j] += delta;
            sum_sq[j] += delta * delta;
            prev = next;
        }
    }
    let m = cfg.n_permutations as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_errors = if cfg.n_permutations < 2 {
        vec![f64::NAN; d]
    } else {
        sum_sq
            .iter()
            .zip(&values)
            .map(|(sq, mean)| ((sq - m * mean * mean).max(0.0) / (m - 1.0) / m).sqrt())
            .collect()
    };
    Ok(ShapleyEstimate { values, std_errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMethod {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    /// Mean of `|phi_j|` over the sample, per feature.
    pub per_feature_mean_abs: Vec<f64>,
    /// Normalized absolute attribution of each feature group.
    pub group_shares: [f64; 5],
    pub n_samples: usize,
    pub method: ShapMethod,
    pub n_permutations: usize,
    pub background_rows: usize,
}

impl AttributionReport {
    /// Builds the report from per-feature sums of `|phi|`.
    pub fn from_abs_totals(abs_totals: &[f64], n_samples: usize, method: ShapMethod, cfg: &ShapConfig) -> Result<Self> {
        if abs_totals.len() != N_FEATURES {
            return Err(Error::LengthMismatch {
                expected: N_FEATURES,
                got: abs_totals.len(),
            });
        }
        if n_samples == 0 {
            return Err(Error::EmptyInput);
        }
        let mut groups = [0.0; 5];
        for g in FeatureGroup::ALL {
            groups[g.position()] = abs_totals[g.range()].iter().sum();
        }
        let total: f64 = groups.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroVariance);
        }
        let group_shares = groups.map(|v| v / total);
        Ok(AttributionReport {
            per_feature_mean_abs: abs_totals.iter().map(|v| v / n_samples as f64).collect(),
            group_shares,
            n_samples,
            method,
            n_permutations: if method == ShapMethod::Sampled {
                cfg.n_permutations
            } else {
                0
            },
            background_rows: cfg.background.rows(),
        })
    }
}

/// Which estimator [`group_attribution`] uses for this configuration.
pub fn method_for(dim: usize, cfg: &ShapConfig) -> ShapMethod {
    if dim <= cfg.exact_dim_limit {
        ShapMethod::Exact
    } else {
        ShapMethod::Sampled
    }
}

/// Shapley values for row `i` of `sample`, using exact enumeration over all
/// features when the dimension allows and the sampled estimator otherwise.
/// The sampled estimator draws from a stream tied to `i`, so observations
/// can be processed in any order.
pub fn attribute_row<M: Predict + ?Sized>(
    model: &M,
    sample: &FeatureMatrix,
    i: usize,
    cfg: &ShapConfig,
) -> Result<Vec<f64>> {
    let x = sample.row(i);
    match method_for(x.len(), cfg) {
        ShapMethod::Exact => {
            let all: Vec<usize> = (0..x.len()).collect();
            shapley_exact(model, x, &all, cfg)
        }
        ShapMethod::Sampled => {
            let local = ShapConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            Ok(shapley_sampled(model, x, &local)?.values)
        }
    }
}

/// Attributes every row of `sample` and aggregates absolute values into the
/// five group shares.
pub fn group_attribution<M: Predict + ?Sized>(
    model: &M,
    sample: &FeatureMatrix,
    cfg: &ShapConfig,
) -> Result<AttributionReport> {
    cfg.validate()?;
    if sample.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut totals = vec![0.0; sample.cols()];
    for i in 0..sample.rows() {
        let phi = attribute_row(model, sample, i, cfg)?;
        for (t, p) in totals.iter_mut().zip(&phi) {
            *t += p.abs();
        }
    }
    AttributionReport::from_abs_totals(&totals, sample.rows(), method_for(sample.cols(), cfg), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg(rows: &[&[f64]]) -> ShapConfig {
        let cols = rows[0].len();
        ShapConfig::new(FeatureMatrix::from_rows(cols, rows.iter().copied()).unwrap())
    }

    #[test]
    fn additive_model_gets_its_terms() {
        let cfg = bg(&[&[1.0, -2.0], &[-1.0, 2.0]]);
        let f = |x: &[f64]| x[0] + x[1];
        let phi = shapley_exact(&f, &[3.0, 5.0], &[0, 1], &cfg).unwrap();
        assert!((phi[0] - 3.0).abs() < 1e-12 && (phi[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn one_player_gets_everything() {
        let cfg = bg(&[&[0.5], &[2.0]]);
        let f = |x: &[f64]| x[0] * x[0];
        let phi = shapley_exact(&f, &[3.0], &[0], &cfg).unwrap();
        assert!((phi[0] - (9.0 - (0.25 + 4.0) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dimension_limit_enforced() {
        let mut cfg = bg(&[&[0.0; 4]]);
        cfg.exact_dim_limit = 3;
        let f = |x: &[f64]| x[0];
        assert!(matches!(
            shapley_exact(&f, &[1.0; 4], &[0, 1, 2, 3], &cfg),
            Err(Error::DimTooLarge { dim: 4, limit: 3 })
        ));
    }

    #[test]
    fn sampled_is_seed_stable_and_zero_for_constants() {
        let cfg = bg(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]]);
        let f = |x: &[f64]| x[0] * x[1] + x[2];
        let a = shapley_sampled(&f, &[1.0, 2.0, 3.0], &cfg).unwrap();
        let b = shapley_sampled(&f, &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert_eq!(a, b);
        let c = shapley_sampled(&|_: &[f64]| 0.7, &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }
}
