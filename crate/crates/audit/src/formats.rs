//! On-disk formats: panel and prediction CSVs, model files, rate tables and
//! linkage inputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use credit_audit_core::costs::{MortgageRateBand, RateTable};
use credit_audit_core::features::feature_name;
use credit_audit_core::linkage::{BisgTables, CrosswalkEntry, LoanType, MortgageRecord, Purpose, Source};
use credit_audit_core::metrics::PredictionRow;
use credit_audit_core::model::{HybridModel, QuarterDiagnostics, TrainConfig};
use credit_audit_core::profiles::RiskProfile;
use credit_audit_core::{ConsumerQuarter, FeatureVector, Race, N_FEATURES};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{num, FORMAT_VERSION};

/// Named access to the fields of one CSV record.
pub struct Row<'a> {
    path: &'a Path,
    line: u64,
    columns: &'a BTreeMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn err(&self, message: impl Into<String>) -> CliError {
        CliError::parse(self.path, Some(self.line), message)
    }

    pub fn str(&self, name: &str) -> &str {
        self.record.get(self.columns[name]).unwrap_or("")
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<T> {
        let s = self.str(name);
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("{name}: cannot parse {s:?}")))
    }

    /// Empty fields are `None`.
    pub fn optional<T: FromStr>(&self, name: &str) -> Result<Option<T>> {
        if self.str(name).trim().is_empty() {
            Ok(None)
        } else {
            self.parse(name).map(Some)
        }
    }
}

/// Reads every record of a headed CSV file, requiring the named columns.
pub fn read_csv<T>(path: &Path, required: &[&str], mut f: impl FnMut(&Row) -> Result<T>) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::open(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(path, Some(1), e.to_string()))?
        .clone();
    let columns: BTreeMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
        return Err(CliError::parse(path, Some(1), format!("missing column {missing}")));
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line());
                return Err(CliError::parse(path, line, e.to_string()));
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        out.push(f(&Row {
            path,
            line,
            columns: &columns,
            record: &record,
        })?);
    }
    Ok(out)
}

pub const PANEL_FIXED_COLUMNS: [&str; 9] = [
    "consumer_id",
    "quarter",
    "d_state",
    "credit_score",
    "age",
    "income_est",
    "zip",
    "race",
    "true_pd",
];

pub fn panel_header() -> Vec<String> {
    PANEL_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..N_FEATURES).map(feature_name))
        .collect()
}

pub fn write_panel(w: &mut dyn Write, records: &[ConsumerQuarter]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(panel_header())?;
    let mut fields: Vec<String> = Vec::with_capacity(PANEL_FIXED_COLUMNS.len() + N_FEATURES);
    for r in records {
        fields.clear();
        fields.push(r.consumer_id.clone());
        fields.push(r.quarter.to_string());
        fields.push(r.d_state.to_string());
        fields.push(r.credit_score.map(|s| s.to_string()).unwrap_or_default());
        fields.push(num(r.age));
        fields.push(num(r.income_est));
        fields.push(r.zip.clone());
        fields.push(r.race.map(|x| x.code().to_string()).unwrap_or_default());
        fields.push(r.true_pd.map(num).unwrap_or_default());
        fields.extend(r.features.as_slice().iter().map(|&v| num(v)));
        out.write_record(&fields)?;
    }
    out.flush().map_err(|e| CliError::io("writing panel", e))?;
    Ok(())
}

/// Records in file order. Invariants are checked separately.
pub fn read_panel(path: &Path) -> Result<Vec<ConsumerQuarter>> {
    let header = panel_header();
    let required: Vec<&str> = header.iter().map(String::as_str).collect();
    let first_feature = PANEL_FIXED_COLUMNS.len();
    read_csv(path, &required, |row| {
        let race = match row.str("race").trim() {
            "" => None,
            code => Some(Race::from_code(code).ok_or_else(|| row.err(format!("race: unknown code {code:?}")))?),
        };
        let mut values = [0.0; N_FEATURES];
        for (j, v) in values.iter_mut().enumerate() {
            let name = &header[first_feature + j];
            *v = row.parse(name)?;
        }
        Ok(ConsumerQuarter {
            consumer_id: row.str("consumer_id").to_string(),
            quarter: row.parse("quarter")?,
            d_state: row.parse("d_state")?,
            credit_score: row.optional("credit_score")?,
            features: FeatureVector::new(values).map_err(|e| row.err(e.to_string()))?,
            age: row.parse("age")?,
            income_est: row.parse("income_est")?,
            zip: row.str("zip").to_string(),
            race,
            true_pd: row.optional("true_pd")?,
        })
    })
}

pub const PREDICTION_COLUMNS: [&str; 5] = ["consumer_id", "quarter", "p_hat", "label", "credit_score"];

pub fn write_predictions(w: &mut dyn Write, rows: &[PredictionRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PREDICTION_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.consumer_id.clone(),
            r.quarter.to_string(),
            num(r.p_hat),
            r.label.to_string(),
            r.credit_score.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(|e| CliError::io("writing predictions", e))?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    read_csv(path, &PREDICTION_COLUMNS, |row| {
        Ok(PredictionRow {
            consumer_id: row.str("consumer_id").to_string(),
            quarter: row.parse("quarter")?,
            p_hat: row.parse("p_hat")?,
            label: row.parse("label")?,
            credit_score: row.optional("credit_score")?,
        })
    })
}

/// A fitted quarter model with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub quarter: i32,
    pub seed: u64,
    pub config: TrainConfig,
    pub diagnostics: QuarterDiagnostics,
    pub model: HybridModel,
}

impl ModelFile {
    pub fn file_name(quarter: i32) -> String {
        format!("model_q{quarter}.json")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CliError::open(path, e))?;
        let m: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| CliError::parse(path, Some(e.line() as u64), e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::parse(
                path,
                None,
                format!("model format version {} (expected {FORMAT_VERSION})", m.format_version),
            ));
        }
        Ok(m)
    }
}

fn rate_file_error(e: CliError) -> CliError {
    match e {
        CliError::MissingInput { path, .. } => CliError::MissingRate {
            path,
            detail: "rate table not found".into(),
        },
        other => other,
    }
}

/// Card APRs, `profile,apr`; profiles by label or key.
pub fn read_card_rates(path: &Path) -> Result<BTreeMap<RiskProfile, f64>> {
    let rows = read_csv(path, &["profile", "apr"], |row| {
        let p = RiskProfile::from_label(row.str("profile").trim())
            .ok_or_else(|| row.err(format!("profile: unknown {:?}", row.str("profile"))))?;
        Ok((p, row.parse::<f64>("apr")?))
    })
    .map_err(rate_file_error)?;
    let mut out = BTreeMap::new();
    for (p, r) in rows {
        if out.insert(p, r).is_some() {
            return Err(CliError::parse(path, None, format!("duplicate rate for {p}")));
        }
    }
    Ok(out)
}

pub const MORTGAGE_RATE_COLUMNS: [&str; 5] = ["percentile_lo", "percentile_hi", "balance_lo", "balance_hi", "rate"];

pub fn read_mortgage_rates(path: &Path) -> Result<Vec<MortgageRateBand>> {
    read_csv(path, &MORTGAGE_RATE_COLUMNS, |row| {
        Ok(MortgageRateBand {
            percentile_lo: row.parse("percentile_lo")?,
            percentile_hi: row.parse("percentile_hi")?,
            balance_lo: row.parse("balance_lo")?,
            balance_hi: row.parse("balance_hi")?,
            rate: row.parse("rate")?,
        })
    })
    .map_err(rate_file_error)
}

pub fn read_rate_table(card: &Path, mortgage: &Path) -> Result<RateTable> {
    Ok(RateTable {
        card_apr: read_card_rates(card)?,
        mortgage: read_mortgage_rates(mortgage)?,
    })
}

fn purpose(row: &Row) -> Result<Purpose> {
    match row.str("purpose").trim() {
        "purchase" => Ok(Purpose::Purchase),
        "refinance" => Ok(Purpose::Refinance),
        other => Err(row.err(format!("purpose: unknown {other:?}"))),
    }
}

fn loan_type(row: &Row) -> Result<LoanType> {
    match row.str("loan_type").trim() {
        "conventional" => Ok(LoanType::Conventional),
        "fha" => Ok(LoanType::Fha),
        "va" => Ok(LoanType::Va),
        other => Err(row.err(format!("loan_type: unknown {other:?}"))),
    }
}

pub const BUREAU_COLUMNS: [&str; 7] = [
    "id",
    "origination_year",
    "zcta5",
    "loan_amount",
    "purpose",
    "loan_type",
    "purchaser_type",
];

/// Bureau mortgages: balances in currency units, geography at ZCTA.
pub fn read_bureau(path: &Path) -> Result<Vec<MortgageRecord>> {
    read_csv(path, &BUREAU_COLUMNS, |row| {
        Ok(MortgageRecord {
            id: row.str("id").to_string(),
            source: Source::Bureau,
            origination_year: row.parse("origination_year")?,
            geo: row.str("zcta5").to_string(),
            loan_amount: row.parse("loan_amount")?,
            purpose: purpose(row)?,
            loan_type: loan_type(row)?,
            purchaser_type: row.str("purchaser_type").to_string(),
            race: None,
            income: None,
        })
    })
}

pub const HMDA_COLUMNS: [&str; 9] = [
    "id",
    "origination_year",
    "tract",
    "loan_amount_thousands",
    "purpose",
    "loan_type",
    "purchaser_type",
    "race",
    "income",
];

/// HMDA applications: amounts in thousands, geography at census tract.
pub fn read_hmda(path: &Path) -> Result<Vec<MortgageRecord>> {
    read_csv(path, &HMDA_COLUMNS, |row| {
        let race = match row.str("race").trim() {
            "" => None,
            code => Some(Race::from_code(code).ok_or_else(|| row.err(format!("race: unknown code {code:?}")))?),
        };
        Ok(MortgageRecord {
            id: row.str("id").to_string(),
            source: Source::Hmda,
            origination_year: row.parse("origination_year")?,
            geo: row.str("tract").to_string(),
            loan_amount: row.parse("loan_amount_thousands")?,
            purpose: purpose(row)?,
            loan_type: loan_type(row)?,
            purchaser_type: row.str("purchaser_type").to_string(),
            race,
            income: row.optional("income")?,
        })
    })
}

pub fn read_crosswalk(path: &Path) -> Result<Vec<CrosswalkEntry>> {
    read_csv(path, &["tract", "zcta5", "allocation_weight"], |row| {
        Ok(CrosswalkEntry {
            tract: row.str("tract").to_string(),
            zcta5: row.str("zcta5").to_string(),
            allocation_weight: row.parse("allocation_weight")?,
        })
    })
}

fn race_columns() -> [&'static str; 6] {
    Race::ALL.map(Race::code)
}

/// `key_column` followed by one probability column per race.
fn read_race_rows(path: &Path, key_column: &str) -> Result<BTreeMap<String, [f64; 6]>> {
    let mut required = vec![key_column];
    required.extend(race_columns());
    let rows = read_csv(path, &required, |row| {
        let mut v = [0.0; 6];
        for (x, c) in v.iter_mut().zip(race_columns()) {
            *x = row.parse(c)?;
        }
        Ok((row.str(key_column).trim().to_string(), v))
    })?;
    let mut out = BTreeMap::new();
    for (k, v) in rows {
        if out.insert(k.clone(), v).is_some() {
            return Err(CliError::parse(path, None, format!("duplicate key {k}")));
        }
    }
    Ok(out)
}

/// Surname priors (`surname,...`) and geography likelihoods (`geo,...`),
/// race columns named by their codes.
pub fn read_bisg_tables(surnames: &Path, geos: &Path) -> Result<BisgTables> {
    Ok(BisgTables {
        surname_prior: read_race_rows(surnames, "surname")?,
        geo_likelihood: read_race_rows(geos, "geo")?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisgPerson {
    pub id: String,
    pub surname: String,
    pub geo: String,
}

pub fn read_bisg_people(path: &Path) -> Result<Vec<BisgPerson>> {
    read_csv(path, &["id", "surname", "geo"], |row| {
        Ok(BisgPerson {
            id: row.str("id").to_string(),
            surname: row.str("surname").trim().to_string(),
            geo: row.str("geo").trim().to_string(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use credit_audit_core::panel::{generate_synthetic, GenConfig};

    #[test]
    fn panel_round_trips_exactly() {
        let cfg = GenConfig {
            n_consumers: 30,
            n_quarters: 10,
            ..GenConfig::default()
        };
        let (panel, _) = generate_synthetic(&cfg, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut f = File::create(&path).unwrap();
        write_panel(&mut f, panel.records()).unwrap();
        drop(f);
        assert_eq!(read_panel(&path).unwrap(), panel.records());
    }

    #[test]
    fn bad_fields_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(
            &path,
            "consumer_id,quarter,p_hat,label,credit_score\na,1,0.5,0,700\nb,x,0.5,0,\n",
        )
        .unwrap();
        match read_predictions(&path) {
            Err(CliError::Parse {
                line: Some(3), message, ..
            }) => assert!(message.contains("quarter")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_rate_file_is_a_missing_rate() {
        let e = read_card_rates(Path::new("/nonexistent/card.csv")).unwrap_err();
        assert_eq!((e.kind(), e.exit_code()), ("MissingRate", 2));
        assert!(e.to_string().contains("/nonexistent/card.csv"));
    }
}
