use std::path::Path;

use credit_audit_core::costs::{misclassification_cost_matrix, CostReport, CostRow, Product};
use credit_audit_core::profiles::{assign_profiles, RiskProfileTable};
use credit_audit_core::Error as CoreError;
use serde::Serialize;

use super::{load_panel, load_predictions};
use crate::config::{required, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::read_rate_table;
use crate::output::{num, Outputs, Table};

#[derive(Serialize)]
struct CostOutput<'a> {
    credit_card: &'a CostReport,
    mortgage: &'a CostReport,
}

/// A rate missing from a table is reported against the file it should be in.
fn name_file(path: &Path) -> impl Fn(CoreError) -> CliError + '_ {
    move |e| match e {
        CoreError::MissingRate(detail) => CliError::MissingRate {
            path: path.to_path_buf(),
            detail,
        },
        other => other.into(),
    }
}

fn cost_table(r: &CostReport) -> Table {
    let mut t = Table::new([
        "score_profile",
        "model_profile",
        "n",
        "annual_delta",
        "cumulative",
        "share_of_balance",
    ]);
    for c in &r.cells {
        t.push([
            c.score_profile.label().to_string(),
            c.model_profile.label().to_string(),
            c.n.to_string(),
            num(c.annual_delta),
            num(c.cumulative),
            num(c.share_of_balance),
        ]);
    }
    t
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let card_path = required(&cfg.paths.card_rates, "card_rates")?;
    let mortgage_path = required(&cfg.paths.mortgage_rates, "mortgage_rates")?;
    let rates = read_rate_table(card_path, mortgage_path)?;
    out.record_input(card_path)?;
    out.record_input(mortgage_path)?;
    let predictions = load_predictions(&cfg.predictions_path(), out)?;
    let panel = load_panel(&cfg.panel_path(), out)?;
    let table = RiskProfileTable::default();
    let sem = cfg.audit.semantics;
    let profiled = assign_profiles(&predictions, &table)?;

    let rows_with = |column: usize| -> Vec<CostRow> {
        profiled
            .iter()
            .filter_map(|r| {
                let balance =
                    cfg.cost.balance_scale * panel.get(&r.consumer_id, r.quarter)?.features.as_slice()[column];
                (balance > 0.0).then_some(CostRow {
                    score_profile: r.score_profile,
                    model_profile: r.model_profile,
                    balance,
                })
            })
            .collect()
    };
    let card = misclassification_cost_matrix(&rows_with(sem.card_balance), &rates, Product::CreditCard, &table)
        .map_err(name_file(card_path))?;
    let mortgage = misclassification_cost_matrix(
        &rows_with(sem.mortgage_balance),
        &rates,
        Product::Mortgage {
            n_months: cfg.cost.mortgage_term_months,
        },
        &table,
    )
    .map_err(name_file(mortgage_path))?;

    if cfg.output.format.csv() {
        out.csv("cost_card.csv", &cost_table(&card))?;
        out.csv("cost_mortgage.csv", &cost_table(&mortgage))?;
    }
    if cfg.output.format.json() {
        out.json(
            "cost.json",
            &CostOutput {
                credit_card: &card,
                mortgage: &mortgage,
            },
        )?;
    }
    Ok(())
}
