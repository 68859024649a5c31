use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{fit_gbt, fit_mlp, select_ensemble_weight, FeatureMatrix, HybridModel, Predict, TrainConfig};
use crate::features::N_FEATURES;
use crate::metrics::{auc, PredictionRow};
use crate::panel::{Panel, LABEL_HORIZON};
use crate::rng::domain::CV_SPLIT;
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

/// Labeled records grouped by quarter.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    by_quarter: BTreeMap<i32, Vec<(usize, u8)>>,
}

impl LabelIndex {
    pub fn new(panel: &Panel) -> Self {
        let mut by_quarter: BTreeMap<i32, Vec<(usize, u8)>> = BTreeMap::new();
        for (i, y) in panel.labels() {
            by_quarter.entry(panel.records()[i].quarter).or_default().push((i, y));
        }
        LabelIndex { by_quarter }
    }

    pub fn at(&self, quarter: i32) -> &[(usize, u8)] {
        self.by_quarter.get(&quarter).map_or(&[], Vec::as_slice)
    }

    /// Quarters that have labeled rows both at `q` and at `q - 8`.
    pub fn eligible_quarters(&self) -> Vec<i32> {
        self.by_quarter
            .keys()
            .copied()
            .filter(|q| self.by_quarter.contains_key(&(q - LABEL_HORIZON)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterDiagnostics {
    pub quarter: i32,
    pub train_quarter: i32,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub weight_gbt: f64,
    pub validation_auc_gbt: f64,
    pub validation_auc_mlp: f64,
    pub validation_auc_hybrid: f64,
    pub trees_fitted: usize,
}

#[derive(Debug, Clone)]
pub struct QuarterFit {
    pub model: HybridModel,
    pub predictions: Vec<PredictionRow>,
    pub diagnostics: QuarterDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct CvOutcome {
    pub fits: Vec<QuarterFit>,
    /// Quarters that could not be fitted, with the reason.
    pub skipped: Vec<(i32, Error)>,
}

fn matrix(panel: &Panel, rows: &[(usize, u8)]) -> FeatureMatrix {
    let mut data = Vec::with_capacity(rows.len() * N_FEATURES);
    for &(i, _) in rows {
        data.extend_from_slice(panel.records()[i].features.as_slice());
    }
    FeatureMatrix::new(rows.len(), N_FEATURES, data).expect("rows have full width")
}

/// Trains on the labeled rows of `quarter - 8` and predicts the labeled rows
/// of `quarter`. Training labels only use outcomes before `quarter`.
pub fn fit_quarter(panel: &Panel, labels: &LabelIndex, quarter: i32, cfg: &TrainConfig) -> Result<QuarterFit> {
    cfg.validate()?;
    let train_quarter = quarter - LABEL_HORIZON;
    let train = labels.at(train_quarter);
    let test = labels.at(quarter);
    if train.len() < 2 || test.is_empty() {
        return Err(Error::InsufficientHistory { quarter });
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut stream(cfg.seed, CV_SPLIT, quarter as i64 as u64));
    let n_val = ((train.len() as f64 * cfg.val_fraction).round() as usize).clamp(1, train.len() - 1);
    let (val_idx, fit_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| -> Vec<(usize, u8)> {
        let mut v: Vec<(usize, u8)> = idx.iter().map(|&k| train[k]).collect();
        v.sort_unstable();
        v
    };
    let fit_rows = pick(fit_idx);
    let val_rows = pick(val_idx);
    let y_fit: Vec<u8> = fit_rows.iter().map(|r| r.1).collect();
    let y_val: Vec<u8> = val_rows.iter().map(|r| r.1).collect();
    let x_fit = matrix(panel, &fit_rows);
    let x_val = matrix(panel, &val_rows);

    let gbt = fit_gbt(&x_fit, &y_fit, &cfg.gbt)?;
    let mut mlp_cfg = cfg.mlp.clone();
    mlp_cfg.seed = derive_seed(cfg.seed, quarter as i64 as u64);
    let mlp = fit_mlp(&x_fit, &y_fit, &mlp_cfg)?;

    let p_gbt = gbt.predict_rows(&x_val);
    let p_mlp = mlp.predict_rows(&x_val);
    let weight_gbt = select_ensemble_weight(&p_gbt, &p_mlp, &y_val, cfg.weight_grid_step)?;
    let trees_fitted = gbt.trees.len();
    let model = HybridModel {
        gbt,
        mlp,
        weight_gbt,
        trained_on: train_quarter,
    };
    let p_hybrid: Vec<f64> = p_gbt.iter().zip(&p_mlp).map(|(&a, &b)| model.mix(a, b)).collect();

    let x_test = matrix(panel, test);
    let p_test = model.predict_rows(&x_test);
    let predictions = test
        .iter()
        .zip(p_test)
        .map(|(&(i, y), p_hat)| {
            let r = &panel.records()[i];
            PredictionRow {
                consumer_id: r.consumer_id.clone(),
                quarter,
                p_hat,
                label: y,
                credit_score: r.credit_score,
            }
        })
        .collect();
    let diagnostics = QuarterDiagnostics {
        quarter,
        train_quarter,
        n_train: fit_rows.len(),
        n_validation: val_rows.len(),
        n_test: test.len(),
        weight_gbt,
        validation_auc_gbt: auc(&p_gbt, &y_val)?,
        validation_auc_mlp: auc(&p_mlp, &y_val)?,
        validation_auc_hybrid: auc(&p_hybrid, &y_val)?,
        trees_fitted,
    };
    Ok(QuarterFit {
        model,
        predictions,
        diagnostics,
    })
}

/// Fits every requested quarter in turn. Quarters without enough history
/// are reported in `skipped` rather than aborting the run.
pub fn temporal_cv(panel: &Panel, quarters: &[i32], cfg: &TrainConfig) -> Result<CvOutcome> {
    cfg.validate()?;
    let labels = LabelIndex::new(panel);
    let mut out = CvOutcome::default();
    for &q in quarters {
        match fit_quarter(panel, &labels, q, cfg) {
            Ok(fit) => out.fits.push(fit),
            Err(e @ Error::InsufficientHistory { .. }) => out.skipped.push((q, e)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
