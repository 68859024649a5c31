use credit_audit_core::panel::{generate_synthetic, validate_panel};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::write_panel;
use crate::output::Outputs;

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let (panel, summary) = generate_synthetic(&cfg.generate, cfg.seed())?;
    let violations = validate_panel(&panel);
    out.write_with("panel.csv", |w| write_panel(w, panel.records()))?;
    out.json("generate_summary.json", &summary)?;
    out.write_with("validation.jsonl", |w| {
        for v in &violations {
            serde_json::to_writer(&mut *w, v)?;
            w.write_all(b"\n")
                .map_err(|e| CliError::io("writing validation report", e))?;
        }
        Ok(())
    })?;
    if !violations.is_empty() {
        return Err(CliError::Validation(format!(
            "generated panel has {} invariant violation(s)",
            violations.len()
        )));
    }
    Ok(())
}
