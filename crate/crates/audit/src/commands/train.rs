use credit_audit_core::model::{fit_quarter, LabelIndex, QuarterDiagnostics};
use credit_audit_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use super::load_panel;
use crate::config::{RunConfig, MODELS_DIR};
use crate::error::{CliError, Result};
use crate::formats::{write_predictions, ModelFile};
use crate::output::{num, Outputs, Table, FORMAT_VERSION};

#[derive(Serialize)]
struct Skipped {
    quarter: i32,
    reason: String,
}

#[derive(Serialize)]
struct CvReport<'a> {
    fits: &'a [QuarterDiagnostics],
    skipped: Vec<Skipped>,
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let panel = load_panel(&cfg.panel_path(), out)?;
    let train_cfg = cfg.train_config();
    let labels = LabelIndex::new(&panel);
    let quarters = if cfg.train.quarters.is_empty() {
        labels.eligible_quarters()
    } else {
        cfg.train.quarters.clone()
    };
    let results: Vec<_> = quarters
        .par_iter()
        .map(|&q| (q, fit_quarter(&panel, &labels, q, &train_cfg)))
        .collect();

    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (q, r) in results {
        match r {
            Ok(fit) => fits.push(fit),
            Err(e @ CoreError::InsufficientHistory { .. }) => skipped.push(Skipped {
                quarter: q,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    if fits.is_empty() {
        return Err(CliError::Validation(
            "no quarter has enough labeled history to train".into(),
        ));
    }

    for fit in &fits {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            quarter: fit.diagnostics.quarter,
            seed: cfg.seed(),
            config: train_cfg.clone(),
            diagnostics: fit.diagnostics.clone(),
            model: fit.model.clone(),
        };
        out.json(&format!("{MODELS_DIR}/{}", ModelFile::file_name(file.quarter)), &file)?;
    }

    let predictions: Vec<_> = fits.iter().flat_map(|f| f.predictions.iter().cloned()).collect();
    out.write_with("predictions.csv", |w| write_predictions(w, &predictions))?;

    let diagnostics: Vec<QuarterDiagnostics> = fits.iter().map(|f| f.diagnostics.clone()).collect();
    let mut table = Table::new([
        "quarter",
        "train_quarter",
        "n_train",
        "n_validation",
        "n_test",
        "weight_gbt",
        "validation_auc_gbt",
        "validation_auc_mlp",
        "validation_auc_hybrid",
        "trees_fitted",
    ]);
    for d in &diagnostics {
        table.push([
            d.quarter.to_string(),
            d.train_quarter.to_string(),
            d.n_train.to_string(),
            d.n_validation.to_string(),
            d.n_test.to_string(),
            num(d.weight_gbt),
            num(d.validation_auc_gbt),
            num(d.validation_auc_mlp),
            num(d.validation_auc_hybrid),
            d.trees_fitted.to_string(),
        ]);
    }
    out.report(
        "cv_diagnostics",
        &table,
        &CvReport {
            fits: &diagnostics,
            skipped,
        },
    )
}
