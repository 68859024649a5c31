//! Exact-match linkage of credit-bureau mortgages to HMDA applications, and
//! the BISG surname-geography race posterior.
//!
//! Pipeline: drop every duplicated key group on both sides, expand HMDA
//! tracts to ZCTAs through the crosswalk, drop duplicates again at the ZCTA
//! level, then pair records that are each other's unique candidate on the
//! six match keys with loan amounts within one thousand.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::panel::Race;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Balances in currency units, geography at ZCTA.
    Bureau,
    /// Amounts in integer thousands, geography at census tract.
    Hmda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Purchase,
    Refinance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LoanType {
    #[serde(rename = "conventional")]
    Conventional,
    #[serde(rename = "fha")]
    Fha,
    #[serde(rename = "va")]
    Va,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortgageRecord {
    pub id: String,
    pub source: Source,
    pub origination_year: i32,
    /// ZCTA5 for bureau records; census tract, then ZCTA after expansion,
    /// for HMDA records.
    pub geo: String,
    pub loan_amount: f64,
    pub purpose: Purpose,
    pub loan_type: LoanType,
    pub purchaser_type: String,
    pub race: Option<Race>,
    pub income: Option<f64>,
}

/// The five keys joined exactly.
pub type BlockKey = (i32, String, Purpose, LoanType, String);

impl MortgageRecord {
    /// Loan amount in whole thousands.
    pub fn amount_thousands(&self) -> i64 {
        match self.source {
            Source::Hmda => self.loan_amount.round() as i64,
            Source::Bureau => (self.loan_amount / 1000.0).round() as i64,
        }
    }

    pub fn block_key(&self) -> BlockKey {
        (
            self.origination_year,
            self.geo.clone(),
            self.purpose,
            self.loan_type,
            self.purchaser_type.clone(),
        )
    }

    /// All six match keys.
    pub fn match_key(&self) -> (BlockKey, i64) {
        (self.block_key(), self.amount_thousands())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loan_amount > 0.0 && self.loan_amount.is_finite()) {
            return Err(Error::OutOfRange(format!("loan amount of {}", self.id)));
        }
        if self.geo.is_empty() || self.purchaser_type.is_empty() {
            return Err(Error::OutOfRange(format!("missing match key on {}", self.id)));
        }
        Ok(())
    }
}

/// Removes every record whose key is shared with another record.
pub fn dedup_exact<T, K: Ord>(records: Vec<T>, key: impl Fn(&T) -> K) -> (Vec<T>, usize) {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for r in &records {
        *counts.entry(key(r)).or_default() += 1;
    }
    let before = records.len();
    let kept: Vec<T> = records.into_iter().filter(|r| counts[&key(r)] == 1).collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkEntry {
    pub tract: String,
    pub zcta5: String,
    pub allocation_weight: f64,
}

pub fn validate_crosswalk(crosswalk: &[CrosswalkEntry]) -> Result<()> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for e in crosswalk {
        if !(e.allocation_weight > 0.0 && e.allocation_weight <= 1.0) {
            return Err(Error::OutOfRange(format!("allocation weight for tract {}", e.tract)));
        }
        *totals.entry(e.tract.as_str()).or_default() += e.allocation_weight;
    }
    match totals.into_iter().find(|(_, w)| *w > 1.0 + 1e-6) {
        Some((t, w)) => Err(Error::OutOfRange(format!("tract {t} weights sum to {w}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionStats {
    pub input: usize,
    pub output: usize,
    /// Records whose tract is absent from the crosswalk.
    pub unmapped: usize,
    /// Number of input records by how many ZCTAs their tract maps to.
    pub multiplicity: BTreeMap<usize, usize>,
}

/// One copy of each HMDA record per ZCTA its tract maps to.
pub fn expand_crosswalk(
    hmda: &[MortgageRecord],
    crosswalk: &[CrosswalkEntry],
) -> Result<(Vec<MortgageRecord>, ExpansionStats)> {
    validate_crosswalk(crosswalk)?;
    let mut zctas: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in crosswalk {
        zctas.entry(e.tract.as_str()).or_default().push(e.zcta5.as_str());
    }
    for v in zctas.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mut out = Vec::new();
    let mut stats = ExpansionStats {
        input: hmda.len(),
        ..ExpansionStats::default()
    };
    for r in hmda {
        match zctas.get(r.geo.as_str()) {
            Some(zs) => {
                *stats.multiplicity.entry(zs.len()).or_default() += 1;
                for z in zs {
                    out.push(MortgageRecord {
                        geo: String::from(*z),
                        ..r.clone()
                    });
                }
            }
            None => stats.unmapped += 1,
        }
    }
    stats.output = out.len();
    Ok((out, stats))
}

/// The four factors whose product bounds the achievable match rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFactors {
    pub coverage: f64,
    pub uniqueness: f64,
    pub crosswalk_coverage: f64,
    pub conflict_survival: f64,
}

pub fn match_rate_bound(f: &BoundFactors) -> f64 {
    f.coverage * f.uniqueness * f.crosswalk_coverage * f.conflict_survival
}

/// Achieved match rate relative to the bound.
pub fn match_efficiency(match_rate: f64, bound: f64) -> f64 {
    match_rate / bound
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingOutcome {
    /// `(left id, right id)`, sorted.
    pub pairs: Vec<(String, String)>,
    /// Left records with more than one candidate.
    pub ambiguous_left: usize,
    /// Right records with more than one candidate.
    pub ambiguous_right: usize,
}

/// Pairs `left[i]` with `right[j]` when they agree on the block keys, their
/// amounts in thousands differ by at most one, and each is the other's only
/// candidate. Swapping the arguments swaps the pairs.
pub fn exact_match(left: &[MortgageRecord], right: &[MortgageRecord]) -> PairingOutcome {
    let mut blocks: BTreeMap<BlockKey, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, r) in left.iter().enumerate() {
        blocks.entry(r.block_key()).or_default().0.push(i);
    }
    for (j, r) in right.iter().enumerate() {
        if let Some(b) = blocks.get_mut(&r.block_key()) {
            b.1.push(j);
        }
    }
    let mut left_cands: Vec<Vec<usize>> = alloc::vec![Vec::new(); left.len()];
    let mut right_cands: Vec<Vec<usize>> = alloc::vec![Vec::new(); right.len()];
    for (ls, rs) in blocks.values() {
        let mut sorted: Vec<(i64, usize)> = rs.iter().map(|&j| (right[j].amount_thousands(), j)).collect();
        sorted.sort_unstable();
        for &i in ls {
            let a = left[i].amount_thousands();
            let start = sorted.partition_point(|&(v, _)| v < a - 1);
            for &(v, j) in &sorted[start..] {
                if v > a + 1 {
                    break;
                }
                left_cands[i].push(j);
                right_cands[j].push(i);
            }
        }
    }
    let mut out = PairingOutcome::default();
    for (i, c) in left_cands.iter().enumerate() {
        match c.as_slice() {
            [j] if right_cands[*j].len() == 1 => out.pairs.push((left[i].id.clone(), right[*j].id.clone())),
            [] | [_] => {}
            _ => out.ambiguous_left += 1,
        }
    }
    out.ambiguous_right = right_cands.iter().filter(|c| c.len() > 1).count();
    out.pairs.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupCounts {
    pub bureau_input: usize,
    pub bureau_removed: usize,
    pub hmda_input: usize,
    pub hmda_stage1_removed: usize,
    pub expansion: ExpansionStats,
    pub hmda_stage2_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(bureau id, hmda id)`, one-to-one.
    pub pairs: Vec<(String, String)>,
    /// Pairs over deduplicated bureau records.
    pub match_rate: f64,
    pub dedup: DedupCounts,
    pub ambiguous_bureau: usize,
    pub ambiguous_hmda: usize,
    pub bound_factors: BoundFactors,
    pub bound: f64,
    pub efficiency: f64,
}

/// Runs the full pipeline. `coverage` is the external share of bureau
/// mortgages that appear in HMDA at all; the other bound factors are
/// measured on the inputs.
pub fn link(
    bureau: Vec<MortgageRecord>,
    hmda: Vec<MortgageRecord>,
    crosswalk: &[CrosswalkEntry],
    coverage: f64,
) -> Result<MatchResult> {
    for r in bureau.iter().chain(&hmda) {
        r.validate()?;
    }
    if bureau.iter().any(|r| r.source != Source::Bureau) || hmda.iter().any(|r| r.source != Source::Hmda) {
        return Err(Error::InvalidConfig("record source does not match its input".into()));
    }
    let (bureau_input, hmda_input) = (bureau.len(), hmda.len());
    let (bureau, bureau_removed) = dedup_exact(bureau, MortgageRecord::match_key);
    let (hmda, hmda_stage1_removed) = dedup_exact(hmda, MortgageRecord::match_key);
    let hmda_after_stage1 = hmda.len();
    let (expanded, expansion) = expand_crosswalk(&hmda, crosswalk)?;
    let expanded_len = expanded.len();
    let (hmda_zcta, hmda_stage2_removed) = dedup_exact(expanded, MortgageRecord::match_key);
    if bureau.is_empty() {
        return Err(Error::EmptyAfterDrops);
    }
    let outcome = exact_match(&bureau, &hmda_zcta);
    let match_rate = outcome.pairs.len() as f64 / bureau.len() as f64;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let bound_factors = BoundFactors {
        coverage,
        uniqueness: ratio(hmda_after_stage1, hmda_input),
        crosswalk_coverage: ratio(hmda_after_stage1 - expansion.unmapped, hmda_after_stage1),
        conflict_survival: ratio(hmda_zcta.len(), expanded_len),
    };
    let bound = match_rate_bound(&bound_factors);
    Ok(MatchResult {
        pairs: outcome.pairs,
        match_rate,
        dedup: DedupCounts {
            bureau_input,
            bureau_removed,
            hmda_input,
            hmda_stage1_removed,
            expansion,
            hmda_stage2_removed,
        },
        ambiguous_bureau: outcome.ambiguous_left,
        ambiguous_hmda: outcome.ambiguous_right,
        bound_factors,
        bound,
        efficiency: if bound > 0.0 {
            match_efficiency(match_rate, bound)
        } else {
            0.0
        },
    })
}

/// BISG posterior over the six races (in [`Race::ALL`] order) from a
/// surname prior `p(race | surname)` and a geography likelihood
/// `r(geography | race)`.
pub fn bisg_posterior(prior: &[f64; 6], geo: &[f64; 6]) -> Result<[f64; 6]> {
    if prior.iter().any(|p| !(*p >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::OutOfRange("surname prior must be a distribution".into()));
    }
    if geo.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::OutOfRange("geography likelihood must be non-negative".into()));
    }
    let mut u = [0.0; 6];
    for i in 0..6 {
        u[i] = prior[i] * geo[i];
    }
    let total: f64 = u.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroLikelihood);
    }
    Ok(u.map(|v| v / total))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BisgTables {
    pub surname_prior: BTreeMap<String, [f64; 6]>,
    /// Share of each race's population living in each geography.
    pub geo_likelihood: BTreeMap<String, [f64; 6]>,
}

impl BisgTables {
    pub fn validate(&self) -> Result<()> {
        for (name, row) in &self.surname_prior {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-6 || row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::OutOfRange(format!("surname prior for {name}")));
            }
        }
        let mut columns = [0.0; 6];
        for row in self.geo_likelihood.values() {
            for (c, v) in columns.iter_mut().zip(row) {
                *c += v;
            }
        }
        if !self.geo_likelihood.is_empty() {
            if let Some(i) = columns.iter().position(|c| (c - 1.0).abs() > 1e-4) {
                return Err(Error::OutOfRange(format!(
                    "{} geography column sums to {}",
                    Race::ALL[i],
                    columns[i]
                )));
            }
        }
        Ok(())
    }

    pub fn posterior(&self, surname: &str, geo: &str) -> Result<[f64; 6]> {
        let prior = self
            .surname_prior
            .get(surname)
            .ok_or_else(|| Error::KeyMismatch(format!("unknown surname {surname}")))?;
        let like = self
            .geo_likelihood
            .get(geo)
            .ok_or_else(|| Error::KeyMismatch(format!("unknown geography {geo}")))?;
        bisg_posterior(prior, like)
    }
}
