use std::collections::BTreeMap;

use credit_audit_core::equity::model_vs_score_auc;
use credit_audit_core::metrics::{calibration_table, kendall, spearman, CalibrationRow, PredictionRow};
use credit_audit_core::profiles::{
    assign_profiles, default_by_cell, disagreement_matrix, CellDefaultRate, DisagreementMatrix, ProfiledRow,
    RiskProfile, RiskProfileTable,
};
use serde::Serialize;

use super::load_predictions;
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{num, Outputs, Table};

/// One evaluation quarter's headline metrics. AUCs are over scored rows so
/// that the model and the score are compared on the same borrowers.
#[derive(Debug, Clone, Serialize)]
pub struct QuarterMetrics {
    pub quarter: i32,
    pub n: usize,
    pub n_scored: usize,
    pub defaults: usize,
    pub default_rate: f64,
    pub auc_model: f64,
    pub auc_score: f64,
    pub gini_model: f64,
    pub gini_score: f64,
    /// Rank correlation of model PD and credit score (negative when both
    /// order risk the same way).
    pub spearman: f64,
    pub kendall: f64,
}

pub const METRIC_NAMES: [&str; 10] = [
    "n",
    "n_scored",
    "defaults",
    "default_rate",
    "auc_model",
    "auc_score",
    "gini_model",
    "gini_score",
    "spearman",
    "kendall",
];

impl QuarterMetrics {
    fn values(&self) -> [String; 10] {
        [
            self.n.to_string(),
            self.n_scored.to_string(),
            self.defaults.to_string(),
            num(self.default_rate),
            num(self.auc_model),
            num(self.auc_score),
            num(self.gini_model),
            num(self.gini_score),
            num(self.spearman),
            num(self.kendall),
        ]
    }
}

fn quarter_metrics(quarter: i32, rows: &[&PredictionRow]) -> Result<QuarterMetrics> {
    let g = model_vs_score_auc(rows)?;
    let scored: Vec<&&PredictionRow> = rows.iter().filter(|r| r.credit_score.is_some()).collect();
    let p: Vec<f64> = scored.iter().map(|r| r.p_hat).collect();
    let s: Vec<f64> = scored.iter().map(|r| f64::from(r.credit_score.unwrap())).collect();
    let defaults = rows.iter().filter(|r| r.label != 0).count();
    Ok(QuarterMetrics {
        quarter,
        n: rows.len(),
        n_scored: g.n,
        defaults,
        default_rate: defaults as f64 / rows.len() as f64,
        auc_model: g.auc_model,
        auc_score: g.auc_score,
        gini_model: 2.0 * g.auc_model - 1.0,
        gini_score: 2.0 * g.auc_score - 1.0,
        spearman: spearman(&p, &s)?,
        kendall: kendall(&p, &s)?,
    })
}

#[derive(Serialize)]
struct MetricsSummary<'a> {
    quarters: &'a [QuarterMetrics],
    mean_auc_model: f64,
    mean_auc_score: f64,
    model_beats_score_every_quarter: bool,
}

#[derive(Serialize)]
struct CalibrationEntry {
    grouping: &'static str,
    #[serde(flatten)]
    row: CalibrationRow<RiskProfile>,
    gap_pp: f64,
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let rows = load_predictions(&cfg.predictions_path(), out)?;
    let set = credit_audit_core::metrics::PredictionSet { rows };
    let mut metrics = Vec::new();
    for q in set.quarters() {
        metrics.push(quarter_metrics(q, &set.quarter(q))?);
    }

    let mut long = Table::new(["quarter", "metric", "value"]);
    let mut wide = Table::new(std::iter::once("quarter").chain(METRIC_NAMES));
    for m in &metrics {
        let values = m.values();
        for (name, v) in METRIC_NAMES.iter().zip(&values) {
            long.push([m.quarter.to_string(), name.to_string(), v.clone()]);
        }
        wide.push(std::iter::once(m.quarter.to_string()).chain(values));
    }
    let k = metrics.len() as f64;
    let summary = MetricsSummary {
        quarters: &metrics,
        mean_auc_model: metrics.iter().map(|m| m.auc_model).sum::<f64>() / k,
        mean_auc_score: metrics.iter().map(|m| m.auc_score).sum::<f64>() / k,
        model_beats_score_every_quarter: metrics.iter().all(|m| m.auc_model > m.auc_score),
    };
    out.csv("metrics.csv", &long)?;
    out.csv("metrics_timeseries.csv", &wide)?;
    out.json("metrics.json", &summary)?;

    let profiled = assign_profiles(&set.rows, &RiskProfileTable::default())?;
    let matrix = disagreement_matrix(profiled.iter().map(|r| (r.score_profile, r.model_profile)));
    out.report("disagreement", &disagreement_table(&matrix), &matrix)?;

    let cells = default_by_cell(&profiled);
    out.report("default_by_cell", &cell_table(&cells), &cells)?;

    let by_key: BTreeMap<(&str, i32), &ProfiledRow> = profiled
        .iter()
        .map(|r| ((r.consumer_id.as_str(), r.quarter), r))
        .collect();
    let mut calibration = Vec::new();
    for (grouping, pick) in [
        (
            "model_profile",
            (|r: &ProfiledRow| r.model_profile) as fn(&ProfiledRow) -> RiskProfile,
        ),
        ("score_profile", |r: &ProfiledRow| r.score_profile),
    ] {
        let table = calibration_table(&set.rows, |r| {
            by_key.get(&(r.consumer_id.as_str(), r.quarter)).map(|p| pick(p))
        });
        for row in table {
            let gap_pp = 100.0 * (row.realized_rate - row.mean_p_hat);
            calibration.push(CalibrationEntry { grouping, row, gap_pp });
        }
    }
    let mut table = Table::new(["grouping", "profile", "n", "realized_rate", "mean_p_hat", "gap_pp"]);
    for c in &calibration {
        table.push([
            c.grouping.to_string(),
            c.row.group.label().to_string(),
            c.row.n.to_string(),
            num(c.row.realized_rate),
            num(c.row.mean_p_hat),
            num(c.gap_pp),
        ]);
    }
    out.report("calibration", &table, &calibration)?;
    Ok(())
}

pub fn disagreement_table(m: &DisagreementMatrix) -> Table {
    let mut t = Table::new(
        std::iter::once("score_profile".to_string())
            .chain(RiskProfile::ALL.iter().map(|p| p.label().to_string()))
            .chain(["disagreement".to_string(), "n".to_string()]),
    );
    for s in RiskProfile::ALL {
        let i = s.index();
        let n: u64 = m.counts[i].iter().sum();
        t.push(
            std::iter::once(s.label().to_string())
                .chain(m.m[i].iter().map(|&v| num(v)))
                .chain([num(m.disagreement[i]), n.to_string()]),
        );
    }
    t
}

fn cell_table(cells: &[CellDefaultRate]) -> Table {
    let mut t = Table::new([
        "score_profile",
        "model_profile",
        "n",
        "realized_rate",
        "predicted_rate",
        "sparse",
    ]);
    for c in cells {
        t.push([
            c.score_profile.label().to_string(),
            c.model_profile.label().to_string(),
            c.n.to_string(),
            num(c.realized_rate),
            num(c.predicted_rate),
            c.sparse.to_string(),
        ]);
    }
    t
}
