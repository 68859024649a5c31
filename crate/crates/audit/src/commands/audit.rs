use std::collections::BTreeMap;

use credit_audit_core::equity::{
    access_regression, composition_shares, counterfactual_auc, demographics, fit_fe_ols, group_auc,
    vulnerability_frame, vulnerability_specs, AccessOutcome, AccessResult, AccessSpec, CompositionCell,
    CompositionDims, CompositionShares, CounterfactualAuc, GroupAuc, RegressionResult, RegressionSpec,
};
use credit_audit_core::profiles::{assign_profiles, RiskProfileTable};
use serde::Serialize;

use super::{load_panel, load_predictions};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{num, Outputs, Table};

#[derive(Serialize)]
struct SpecResult<'a> {
    spec: usize,
    specification: &'a RegressionSpec,
    result: &'a RegressionResult,
}

#[derive(Serialize)]
struct GroupAucRow {
    dimension: &'static str,
    group: bool,
    #[serde(flatten)]
    auc: GroupAuc,
}

#[derive(Serialize)]
struct CompositionRow {
    minority: bool,
    #[serde(flatten)]
    shares: CompositionShares,
}

#[derive(Serialize)]
struct CounterfactualRow {
    ranking: &'static str,
    aligned: &'static str,
    #[serde(flatten)]
    result: CounterfactualAuc,
}

const ALIGNMENTS: [(&str, CompositionDims); 4] = [
    ("all", CompositionDims::ALL),
    ("default_history", CompositionDims::DEFAULT_HISTORY),
    ("credit_history", CompositionDims::CREDIT_HISTORY),
    ("mortgage", CompositionDims::MORTGAGE),
];

const ACCESS_OUTCOMES: [(&str, AccessOutcome); 5] = [
    ("credit_limit", AccessOutcome::CreditLimit),
    ("mortgage_balance", AccessOutcome::MortgageBalance),
    ("inquiry", AccessOutcome::Inquiry),
    ("origination", AccessOutcome::Origination),
    ("origination_given_inquiry", AccessOutcome::OriginationGivenInquiry),
];

/// One row per slope plus a `constant` row, whose inference is not
/// reported.
fn coefficient_rows(table: &mut Table, lead: &[String], r: &RegressionResult) {
    table.push(lead.iter().cloned().chain([
        "constant".to_string(),
        num(r.intercept),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        r.n_obs.to_string(),
        num(r.r_squared),
    ]));
    for c in &r.coefficients {
        table.push(lead.iter().cloned().chain([
            c.name.clone(),
            num(c.estimate),
            num(c.std_error),
            num(c.t_stat),
            num(c.p_value),
            c.stars().to_string(),
            r.n_obs.to_string(),
            num(r.r_squared),
        ]));
    }
}

const COEF_COLUMNS: [&str; 8] = [
    "term",
    "estimate",
    "std_error",
    "t_stat",
    "p_value",
    "stars",
    "n_obs",
    "r_squared",
];

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let predictions = load_predictions(&cfg.predictions_path(), out)?;
    let panel = load_panel(&cfg.panel_path(), out)?;
    let a = &cfg.audit;
    let table = RiskProfileTable::default();

    // Ranking-difference regressions.
    let profiled = assign_profiles(&predictions, &table)?;
    let frame = vulnerability_frame(&panel, &profiled, a.minority_rule)?;
    let specs = vulnerability_specs(a.cluster_mode);
    let results = specs
        .iter()
        .map(|s| fit_fe_ols(&frame, s))
        .collect::<credit_audit_core::Result<Vec<_>>>()?;
    let mut t = Table::new(std::iter::once("spec").chain(COEF_COLUMNS));
    for (i, r) in results.iter().enumerate() {
        coefficient_rows(&mut t, &[(i + 1).to_string()], r);
    }
    let json: Vec<SpecResult> = specs
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (s, r))| SpecResult {
            spec: i + 1,
            specification: s,
            result: r,
        })
        .collect();
    out.report("vulnerability", &t, &json)?;

    // AUC by demographic group.
    let keys: Vec<(&str, i32)> = predictions
        .iter()
        .map(|r| (r.consumer_id.as_str(), r.quarter))
        .collect();
    let demo = demographics(&panel, &keys, a.minority_rule)?;
    let mut auc_rows = Vec::new();
    for (dimension, flag) in [
        (
            "young",
            (|d: &credit_audit_core::equity::Demographics| Some(d.young)) as fn(&_) -> Option<bool>,
        ),
        ("income_p20", |d| Some(d.income_p20)),
        ("minority", |d| d.minority),
    ] {
        let (rows, groups): (Vec<_>, Vec<bool>) = predictions
            .iter()
            .zip(&demo)
            .filter_map(|(r, d)| flag(d).map(|g| (r.clone(), g)))
            .unzip();
        for (group, auc) in group_auc(&rows, &groups)? {
            auc_rows.push(GroupAucRow { dimension, group, auc });
        }
    }
    let mut t = Table::new(["dimension", "group", "n", "defaults", "auc_model", "auc_score"]);
    for r in &auc_rows {
        t.push([
            r.dimension.to_string(),
            r.group.to_string(),
            r.auc.n.to_string(),
            r.auc.defaults.to_string(),
            num(r.auc.auc_model),
            num(r.auc.auc_score),
        ]);
    }
    out.report("group_auc", &t, &auc_rows)?;

    // Feature composition and counterfactual AUCs, minority versus the rest.
    let known: Vec<usize> = (0..predictions.len()).filter(|&i| demo[i].minority.is_some()).collect();
    let cells: Vec<CompositionCell> = known
        .iter()
        .map(|&i| {
            let r = &predictions[i];
            let rec = panel
                .get(&r.consumer_id, r.quarter)
                .expect("demographics found every key");
            CompositionCell::from_features(rec.features.as_slice(), &a.semantics)
        })
        .collect();
    let minority: Vec<bool> = known.iter().map(|&i| demo[i].minority == Some(true)).collect();
    let shares = composition_shares(&cells, &minority)?;
    let mut t = Table::new([
        "minority",
        "n",
        "current",
        "delinquent",
        "thick_file",
        "thin_file",
        "no_mortgage",
        "mortgage",
    ]);
    let mut composition = Vec::new();
    for (g, s) in shares {
        t.push([
            g.to_string(),
            s.n.to_string(),
            num(s.current),
            num(s.delinquent),
            num(s.thick_file),
            num(s.thin_file),
            num(s.no_mortgage),
            num(s.mortgage),
        ]);
        composition.push(CompositionRow { minority: g, shares: s });
    }
    out.report("composition", &t, &composition)?;

    let labels: Vec<u8> = known.iter().map(|&i| predictions[i].label).collect();
    let model_scores: Vec<f64> = known.iter().map(|&i| predictions[i].p_hat).collect();
    let scored: Vec<usize> = (0..known.len())
        .filter(|&k| predictions[known[k]].credit_score.is_some())
        .collect();
    let pick = |idx: &[usize]| -> (Vec<u8>, Vec<bool>, Vec<CompositionCell>) {
        (
            idx.iter().map(|&k| labels[k]).collect(),
            idx.iter().map(|&k| minority[k]).collect(),
            idx.iter().map(|&k| cells[k]).collect(),
        )
    };
    let (s_labels, s_minority, s_cells) = pick(&scored);
    let score_risk: Vec<f64> = scored
        .iter()
        .map(|&k| -f64::from(predictions[known[k]].credit_score.unwrap()))
        .collect();
    let mut counterfactual = Vec::new();
    for (aligned, dims) in ALIGNMENTS {
        counterfactual.push(CounterfactualRow {
            ranking: "model",
            aligned,
            result: counterfactual_auc(&model_scores, &labels, &minority, &cells, dims)?,
        });
        counterfactual.push(CounterfactualRow {
            ranking: "score",
            aligned,
            result: counterfactual_auc(&score_risk, &s_labels, &s_minority, &s_cells, dims)?,
        });
    }
    let mut t = Table::new(["ranking", "aligned", "actual", "counterfactual", "gap", "flagged_cells"]);
    for c in &counterfactual {
        t.push([
            c.ranking.to_string(),
            c.aligned.to_string(),
            num(c.result.actual),
            num(c.result.counterfactual),
            num(c.result.gap),
            c.result.flagged_cells.join(";"),
        ]);
    }
    out.report("counterfactual_auc", &t, &counterfactual)?;

    // Access to credit by lagged score profile.
    let mut access: BTreeMap<&str, AccessResult> = BTreeMap::new();
    let mut coef = Table::new(std::iter::once("outcome").chain(COEF_COLUMNS));
    let mut effects = Table::new(["outcome", "profile", "quarter", "effect"]);
    for (name, outcome) in ACCESS_OUTCOMES {
        let spec = AccessSpec {
            age_shares: a.age_shares,
            cluster_keys: a.access_cluster_keys.clone(),
            ..AccessSpec::new(outcome)
        };
        let r = access_regression(&panel, &table, &a.semantics, &spec)?;
        coefficient_rows(&mut coef, &[name.to_string()], &r.regression);
        for e in &r.age_adjusted {
            effects.push([
                name.to_string(),
                e.profile.label().to_string(),
                e.quarter.map(|q| q.to_string()).unwrap_or_else(|| "pooled".into()),
                num(e.effect),
            ]);
        }
        access.insert(name, r);
    }
    if cfg.output.format.csv() {
        out.csv("access_coefficients.csv", &coef)?;
        out.csv("access_effects.csv", &effects)?;
    }
    if cfg.output.format.json() {
        out.json("access.json", &access)?;
    }
    Ok(())
}
