use std::fs;

use credit_audit_core::attribution::{attribute_row, method_for, subsample, AttributionReport, ShapConfig};
use credit_audit_core::features::feature_name;
use credit_audit_core::model::FeatureMatrix;
use credit_audit_core::rng::domain::{SHAP_BACKGROUND, SHAP_SAMPLE};
use credit_audit_core::{FeatureGroup, Panel, N_FEATURES};
use rayon::prelude::*;
use serde::Serialize;

use super::load_panel;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::ModelFile;
use crate::output::{num, Outputs, Table};

#[derive(Serialize)]
struct AttributionOutput<'a> {
    model_quarter: i32,
    train_quarter: i32,
    #[serde(flatten)]
    report: &'a AttributionReport,
}

fn quarter_rows(panel: &Panel, quarter: i32) -> Result<FeatureMatrix> {
    let rows = panel
        .records()
        .iter()
        .filter(|r| r.quarter == quarter)
        .map(|r| r.features.as_slice());
    Ok(FeatureMatrix::from_rows(N_FEATURES, rows)?)
}

/// Quarter of the newest model file in the model directory.
fn latest_model_quarter(cfg: &RunConfig) -> Result<i32> {
    let dir = cfg.models_dir();
    let entries = fs::read_dir(&dir).map_err(|e| CliError::open(&dir, e))?;
    let mut quarters = Vec::new();
    for e in entries {
        let e = e.map_err(|e| CliError::io(format!("listing {}", dir.display()), e))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(q) = name.strip_prefix("model_q").and_then(|s| s.strip_suffix(".json")) {
            if let Ok(q) = q.parse::<i32>() {
                quarters.push(q);
            }
        }
    }
    quarters.into_iter().max().ok_or_else(|| CliError::MissingInput {
        path: dir,
        detail: "no model files; run `train` first".into(),
    })
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let quarter = match cfg.attribution.quarter {
        Some(q) => q,
        None => latest_model_quarter(cfg)?,
    };
    let model_path = cfg.models_dir().join(ModelFile::file_name(quarter));
    let file = ModelFile::read(&model_path)?;
    out.record_input(&model_path)?;
    let panel = load_panel(&cfg.panel_path(), out)?;

    let a = &cfg.attribution;
    let seed = cfg.seed();
    let background = subsample(
        &quarter_rows(&panel, file.model.trained_on)?,
        a.background_rows,
        seed,
        SHAP_BACKGROUND,
    );
    let sample = subsample(&quarter_rows(&panel, quarter)?, a.sample_rows, seed, SHAP_SAMPLE);
    if background.rows() == 0 || sample.rows() == 0 {
        return Err(CliError::Validation(format!(
            "panel has no rows at quarters {} and {quarter}",
            file.model.trained_on
        )));
    }
    let shap = ShapConfig {
        n_permutations: a.n_permutations,
        seed,
        exact_dim_limit: a.exact_dim_limit,
        ..ShapConfig::new(background)
    };
    shap.validate()?;

    let phis: Vec<Vec<f64>> = (0..sample.rows())
        .into_par_iter()
        .map(|i| attribute_row(&file.model, &sample, i, &shap))
        .collect::<credit_audit_core::Result<_>>()?;
    let mut totals = vec![0.0; N_FEATURES];
    for phi in &phis {
        for (t, p) in totals.iter_mut().zip(phi) {
            *t += p.abs();
        }
    }
    let report = AttributionReport::from_abs_totals(&totals, sample.rows(), method_for(N_FEATURES, &shap), &shap)?;

    out.json(
        "attribution.json",
        &AttributionOutput {
            model_quarter: quarter,
            train_quarter: file.model.trained_on,
            report: &report,
        },
    )?;
    let mut groups = Table::new(["group", "share", "published_score_weight"]);
    for g in FeatureGroup::ALL {
        groups.push([
            g.label().to_string(),
            num(report.group_shares[g.position()]),
            num(g.published_score_weight()),
        ]);
    }
    out.csv("attribution_groups.csv", &groups)?;
    let mut features = Table::new(["feature", "group", "mean_abs_shap"]);
    for (j, v) in report.per_feature_mean_abs.iter().enumerate() {
        let g = FeatureGroup::of_feature(j).expect("feature index in range");
        features.push([feature_name(j), g.label().to_string(), num(*v)]);
    }
    out.csv("attribution_features.csv", &features)
}
