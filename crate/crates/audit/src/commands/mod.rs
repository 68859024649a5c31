//! One module per subcommand. Each reads its inputs, writes its outputs
//! through [`Outputs`] and finishes with a manifest.

mod attribute;
mod audit;
mod cost;
mod evaluate;
mod generate;
mod link;
mod train;

use std::path::Path;
use std::time::Instant;

use credit_audit_core::metrics::PredictionRow;
use credit_audit_core::panel::validate_records;
use credit_audit_core::Panel;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{read_panel, read_predictions};
use crate::output::{Manifest, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Write a synthetic credit panel.
    Generate,
    /// Fit quarter models under the temporal split and write predictions.
    Train,
    /// Metric time series, disagreement matrix and calibration tables.
    Evaluate,
    /// Shapley feature-group shares of a fitted model.
    Attribute,
    /// Fairness regressions, group AUCs and counterfactual AUCs.
    Audit,
    /// Interest-cost matrices of profile misclassification.
    Cost,
    /// Bureau/HMDA exact-match linkage and BISG race proxies.
    Link,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Generate,
        Command::Train,
        Command::Evaluate,
        Command::Attribute,
        Command::Audit,
        Command::Cost,
        Command::Link,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Attribute => "attribute",
            Command::Audit => "audit",
            Command::Cost => "cost",
            Command::Link => "link",
        }
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    let started = Instant::now();
    let mut out = Outputs::new(&cfg.out_dir(), cfg.output.format)?;
    match command {
        Command::Generate => generate::run(cfg, &mut out)?,
        Command::Train => train::run(cfg, &mut out)?,
        Command::Evaluate => evaluate::run(cfg, &mut out)?,
        Command::Attribute => attribute::run(cfg, &mut out)?,
        Command::Audit => audit::run(cfg, &mut out)?,
        Command::Cost => cost::run(cfg, &mut out)?,
        Command::Link => link::run(cfg, &mut out)?,
    }
    out.finish(command.name(), cfg, started)
}

/// Reads and validates a panel, recording it as an input.
fn load_panel(path: &Path, out: &mut Outputs) -> Result<Panel> {
    let records = read_panel(path)?;
    let violations = validate_records(&records);
    if let Some(first) = violations.first() {
        return Err(CliError::Validation(format!(
            "{}: {} invariant violation(s); first at data row {}: {}",
            path.display(),
            violations.len(),
            first.row + 1,
            first.message
        )));
    }
    out.record_input(path)?;
    Ok(Panel::from_records(records))
}

fn load_predictions(path: &Path, out: &mut Outputs) -> Result<Vec<PredictionRow>> {
    let rows = read_predictions(path)?;
    let set = credit_audit_core::metrics::PredictionSet::new(rows)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    out.record_input(path)?;
    Ok(set.rows)
}
