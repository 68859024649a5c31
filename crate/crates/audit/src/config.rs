//! Run configuration: a TOML file with one table per command, overridden by
//! command-line flags. Relative paths in the file resolve against the file's
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use credit_audit_core::equity::{ClusterMode, MinorityRule};
use credit_audit_core::model::{GbtConfig, MlpConfig, TrainConfig};
use credit_audit_core::panel::GenConfig;
use credit_audit_core::FeatureSemantics;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Model files live here, inside the output directory.
pub const MODELS_DIR: &str = "models";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Panel CSV; `<out>/panel.csv` when unset.
    pub panel: Option<PathBuf>,
    /// Predictions CSV; `<out>/predictions.csv` when unset.
    pub predictions: Option<PathBuf>,
    pub card_rates: Option<PathBuf>,
    pub mortgage_rates: Option<PathBuf>,
    pub bureau: Option<PathBuf>,
    pub hmda: Option<PathBuf>,
    pub crosswalk: Option<PathBuf>,
    pub surname_prior: Option<PathBuf>,
    pub geo_likelihood: Option<PathBuf>,
    /// `id,surname,geo` rows to score with BISG.
    pub bisg_people: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Evaluation quarters; every quarter with labeled history when empty.
    pub quarters: Vec<i32>,
    pub val_fraction: f64,
    pub weight_grid_step: f64,
    pub gbt: GbtConfig,
    pub mlp: MlpConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            quarters: Vec::new(),
            val_fraction: t.val_fraction,
            weight_grid_step: t.weight_grid_step,
            gbt: t.gbt,
            mlp: t.mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSection {
    /// Model to explain; the latest model when unset.
    pub quarter: Option<i32>,
    pub background_rows: usize,
    pub sample_rows: usize,
    pub n_permutations: usize,
    pub exact_dim_limit: usize,
}

impl Default for AttributionSection {
    fn default() -> Self {
        AttributionSection {
            quarter: None,
            background_rows: 1000,
            sample_rows: 2000,
            n_permutations: 16,
            exact_dim_limit: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub minority_rule: MinorityRule,
    pub cluster_mode: ClusterMode,
    /// Age-bin shares for the access adjustment; pooled sample shares when
    /// unset.
    pub age_shares: Option<[f64; 6]>,
    pub access_cluster_keys: Vec<String>,
    pub semantics: FeatureSemantics,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            minority_rule: MinorityRule::default(),
            cluster_mode: ClusterMode::default(),
            age_shares: None,
            access_cluster_keys: vec!["zip".into()],
            semantics: FeatureSemantics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub mortgage_term_months: u32,
    /// Currency units per unit of the panel's balance features.
    pub balance_scale: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection {
            mortgage_term_months: 360,
            balance_scale: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    /// Share of bureau mortgages expected to appear in HMDA at all.
    pub coverage: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection { coverage: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub generate: GenConfig,
    pub train: TrainSection,
    pub attribution: AttributionSection,
    pub audit: AuditSection,
    pub cost: CostSection,
    pub link: LinkSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::parse(origin, None, e.message().to_string()))
    }

    /// Reads `path` (or starts from defaults), resolves relative paths
    /// against the file's directory, and applies the overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::open(p, e))?;
                let mut cfg = RunConfig::parse(&text, p)?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.paths.resolve_against(base);
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = Some(seed);
        }
        if let Some(out) = &overrides.out {
            cfg.paths.out = Some(out.clone());
        }
        if let Some(f) = overrides.format {
            cfg.output.format = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(CliError::Config(
                "seed is required (config key `seed` or --seed)".into(),
            ));
        }
        if self.attribution.background_rows == 0 || self.attribution.sample_rows == 0 {
            return Err(CliError::Config("attribution row counts must be positive".into()));
        }
        if !(self.cost.balance_scale > 0.0 && self.cost.balance_scale.is_finite()) {
            return Err(CliError::Config("cost.balance_scale must be positive".into()));
        }
        if !(self.link.coverage > 0.0 && self.link.coverage <= 1.0) {
            return Err(CliError::Config("link.coverage must lie in (0, 1]".into()));
        }
        self.generate.validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn panel_path(&self) -> PathBuf {
        self.paths
            .panel
            .clone()
            .unwrap_or_else(|| self.out_dir().join("panel.csv"))
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.paths
            .predictions
            .clone()
            .unwrap_or_else(|| self.out_dir().join("predictions.csv"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir().join(MODELS_DIR)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            gbt: self.train.gbt.clone(),
            mlp: self.train.mlp.clone(),
            val_fraction: self.train.val_fraction,
            weight_grid_step: self.train.weight_grid_step,
            seed: self.seed.unwrap_or(0),
        }
    }
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.out,
            &mut self.panel,
            &mut self.predictions,
            &mut self.card_rates,
            &mut self.mortgage_rates,
            &mut self.bureau,
            &mut self.hmda,
            &mut self.crosswalk,
            &mut self.surname_prior,
            &mut self.geo_likelihood,
            &mut self.bisg_people,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// A configured input path, or a missing-input error naming the key.
pub fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::MissingInput {
        path: PathBuf::from(format!("paths.{key}")),
        detail: "not set in the configuration".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let mut cfg = RunConfig::parse("seed = 1\n[output]\nformat = \"json\"\n", Path::new("x.toml")).unwrap();
        cfg.paths.resolve_against(Path::new("/data"));
        assert_eq!(cfg.output.format, Format::Json);
        let over = Overrides {
            seed: Some(9),
            out: None,
            format: Some(Format::Both),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 1\n[paths]\nout = \"res\"\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &over).unwrap();
        assert_eq!(cfg.seed(), 9);
        assert_eq!(cfg.output.format, Format::Both);
        assert_eq!(cfg.out_dir(), dir.path().join("res"));
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        assert!(RunConfig::parse("sed = 1\n", Path::new("x")).is_err());
        let err = RunConfig::load(None, &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
