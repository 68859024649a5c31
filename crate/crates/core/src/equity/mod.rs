//! Fairness analysis: ranking-difference regressions, AUC by demographic
//! group, feature-composition shares and counterfactual AUCs, and
//! access-to-credit regressions.

mod access;
mod ols;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSemantics;
use crate::metrics::{auc, percentile_rank, weighted_auc, Direction, PredictionRow};
use crate::panel::Panel;
use crate::profiles::ProfiledRow;
use crate::{Error, Result};

pub use access::{access_regression, AccessOutcome, AccessResult, AccessSpec, AgeAdjustedEffect, AGE_BIN_LABELS};
pub use ols::{
    clustered_covariance, encode_keys, fit_fe_ols, ClusterMode, Coefficient, Frame, OlsDesign, RegressionResult,
    RegressionSpec, DEMEAN_MAX_ITER, DEMEAN_TOL,
};

/// Percentile points per credit-score point, for reading ranking gaps.
pub const SCORE_POINTS_PER_PERCENTILE: f64 = 5.5;

/// `model - score` percentile per key, in the order of `model`. Positive
/// values mean the model ranks the borrower as less risky.
pub fn ranking_difference<K: Ord + Clone>(model: &[(K, f64)], score: &[(K, f64)]) -> Result<Vec<(K, f64)>> {
    if model.len() != score.len() {
        return Err(Error::KeyMismatch(format!(
            "{} model rows vs {} score rows",
            model.len(),
            score.len()
        )));
    }
    let lookup: BTreeMap<&K, f64> = score.iter().map(|(k, v)| (k, *v)).collect();
    if lookup.len() != score.len() {
        return Err(Error::KeyMismatch("duplicate score key".into()));
    }
    model
        .iter()
        .map(|(k, m)| match lookup.get(k) {
            Some(s) => Ok((k.clone(), m - s)),
            None => Err(Error::KeyMismatch("model key without a score ranking".into())),
        })
        .collect()
}

/// Model and score AUC over the scored rows; the score ranks as `-score`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAuc {
    pub n: usize,
    pub defaults: usize,
    pub auc_model: f64,
    pub auc_score: f64,
}

pub fn model_vs_score_auc(rows: &[&PredictionRow]) -> Result<GroupAuc> {
    let scored: Vec<&&PredictionRow> = rows.iter().filter(|r| r.credit_score.is_some()).collect();
    let y: Vec<u8> = scored.iter().map(|r| r.label).collect();
    let p: Vec<f64> = scored.iter().map(|r| r.p_hat).collect();
    let s: Vec<f64> = scored.iter().map(|r| -f64::from(r.credit_score.unwrap())).collect();
    Ok(GroupAuc {
        n: scored.len(),
        defaults: y.iter().filter(|&&v| v == 1).count(),
        auc_model: auc(&p, &y)?,
        auc_score: auc(&s, &y)?,
    })
}

/// Model and score AUC within each group. Groups whose labels are all one
/// class are omitted.
pub fn group_auc<K: Ord + Clone>(rows: &[PredictionRow], groups: &[K]) -> Result<BTreeMap<K, GroupAuc>> {
    if rows.len() != groups.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: groups.len(),
        });
    }
    let mut members: BTreeMap<K, Vec<&PredictionRow>> = BTreeMap::new();
    for (r, g) in rows.iter().zip(groups) {
        members.entry(g.clone()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (g, rs) in members {
        match model_vs_score_auc(&rs) {
            Ok(a) => {
                out.insert(g, a);
            }
            Err(Error::DegenerateLabels) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub const THIN_FILE_YEARS: f64 = 10.0;
pub const THIN_FILE_PRODUCTS: f64 = 3.0;

/// Position of an observation on the three binary feature categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompositionCell {
    /// Any 90+ quarter among the previous eight.
    pub delinquent: bool,
    /// Under ten years of history or fewer than three product types.
    pub thin_file: bool,
    pub mortgage: bool,
}

impl CompositionCell {
    pub fn from_features(x: &[f64], sem: &FeatureSemantics) -> Self {
        CompositionCell {
            delinquent: x[sem.delinquent_quarters] > 0.0,
            thin_file: x[sem.history_years] < THIN_FILE_YEARS || x[sem.product_types] < THIN_FILE_PRODUCTS,
            mortgage: x[sem.mortgage_balance] > 0.0,
        }
    }

    fn project(self, dims: CompositionDims) -> (Option<bool>, Option<bool>, Option<bool>) {
        (
            dims.default_history.then_some(self.delinquent),
            dims.credit_history.then_some(self.thin_file),
            dims.mortgage.then_some(self.mortgage),
        )
    }
}

/// Which categories a counterfactual aligns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionDims {
    pub default_history: bool,
    pub credit_history: bool,
    pub mortgage: bool,
}

impl CompositionDims {
    pub const ALL: CompositionDims = CompositionDims {
        default_history: true,
        credit_history: true,
        mortgage: true,
    };
    pub const DEFAULT_HISTORY: CompositionDims = CompositionDims {
        default_history: true,
        credit_history: false,
        mortgage: false,
    };
    pub const CREDIT_HISTORY: CompositionDims = CompositionDims {
        default_history: false,
        credit_history: true,
        mortgage: false,
    };
    pub const MORTGAGE: CompositionDims = CompositionDims {
        default_history: false,
        credit_history: false,
        mortgage: true,
    };
}

fn describe(cell: (Option<bool>, Option<bool>, Option<bool>)) -> String {
    let mut parts = Vec::new();
    if let Some(d) = cell.0 {
        parts.push(if d { "delinquent" } else { "current" });
    }
    if let Some(t) = cell.1 {
        parts.push(if t { "thin_file" } else { "thick_file" });
    }
    if let Some(m) = cell.2 {
        parts.push(if m { "mortgage" } else { "no_mortgage" });
    }
    parts.join("/")
}

/// Shares of one group's observations in each category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionShares {
    pub n: usize,
    pub current: f64,
    pub delinquent: f64,
    pub thick_file: f64,
    pub thin_file: f64,
    pub no_mortgage: f64,
    pub mortgage: f64,
}

pub fn composition_shares<K: Ord + Clone>(
    cells: &[CompositionCell],
    groups: &[K],
) -> Result<BTreeMap<K, CompositionShares>> {
    if cells.len() != groups.len() {
        return Err(Error::LengthMismatch {
            expected: cells.len(),
            got: groups.len(),
        });
    }
    let mut tally: BTreeMap<K, [usize; 4]> = BTreeMap::new();
    for (c, g) in cells.iter().zip(groups) {
        let t = tally.entry(g.clone()).or_default();
        t[0] += 1;
        t[1] += usize::from(c.delinquent);
        t[2] += usize::from(c.thin_file);
        t[3] += usize::from(c.mortgage);
    }
    Ok(tally
        .into_iter()
        .map(|(g, [n, d, t, m])| {
            let share = |k: usize| k as f64 / n as f64;
            let s = CompositionShares {
                n,
                current: share(n - d),
                delinquent: share(d),
                thick_file: share(n - t),
                thin_file: share(t),
                no_mortgage: share(n - m),
                mortgage: share(m),
            };
            (g, s)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualAuc {
    pub actual: f64,
    pub counterfactual: f64,
    /// `counterfactual - actual`.
    pub gap: f64,
    /// Reference cells with no marginalized observations; the remaining
    /// reference shares were renormalized.
    pub flagged_cells: Vec<String>,
}

/// AUC of the marginalized group (`marginalized[i]`) before and after
/// reweighting its observations to the reference group's composition on the
/// chosen categories. Each marginalized observation in cell `c` gets weight
/// `ref_share(c) / own_share(c)`; `scores` are risk scores (higher means
/// more likely to default).
pub fn counterfactual_auc(
    scores: &[f64],
    labels: &[u8],
    marginalized: &[bool],
    cells: &[CompositionCell],
    dims: CompositionDims,
) -> Result<CounterfactualAuc> {
    let n = scores.len();
    for len in [labels.len(), marginalized.len(), cells.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let mut own: BTreeMap<_, f64> = BTreeMap::new();
    let mut reference: BTreeMap<_, f64> = BTreeMap::new();
    let (mut n_own, mut n_ref) = (0.0, 0.0);
    for i in 0..n {
        let key = cells[i].project(dims);
        if marginalized[i] {
            *own.entry(key).or_default() += 1.0;
            n_own += 1.0;
        } else {
            *reference.entry(key).or_default() += 1.0;
            n_ref += 1.0;
        }
    }
    if n_own == 0.0 || n_ref == 0.0 {
        return Err(Error::EmptyInput);
    }
    let flagged: Vec<_> = reference.keys().filter(|k| !own.contains_key(*k)).copied().collect();
    let supported: f64 = reference
        .iter()
        .filter(|(k, _)| own.contains_key(*k))
        .map(|(_, v)| v)
        .sum();
    if supported == 0.0 {
        return Err(Error::EmptyCellUnsupported(
            flagged.iter().map(|k| describe(*k)).collect::<Vec<_>>().join(","),
        ));
    }

    let idx: Vec<usize> = (0..n).filter(|&i| marginalized[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
    let w: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let key = cells[i].project(dims);
            let ref_share = reference.get(&key).copied().unwrap_or(0.0) / supported;
            let own_share = own[&key] / n_own;
            ref_share / own_share
        })
        .collect();
    let actual = auc(&s, &y)?;
    let counterfactual = weighted_auc(&s, &y, Some(&w))?;
    Ok(CounterfactualAuc {
        actual,
        counterfactual,
        gap: counterfactual - actual,
        flagged_cells: flagged.into_iter().map(describe).collect(),
    })
}

/// How the minority indicator is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorityRule {
    /// The consumer's own race is Black or Hispanic.
    #[default]
    Individual,
    /// More than half of the consumers with known race in the ZIP code are
    /// Black or Hispanic.
    ZipShare,
}

pub const YOUNG_AGE: f64 = 30.0;

/// Demographic indicators of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub young: bool,
    /// Bottom income quintile within the quarter.
    pub income_p20: bool,
    /// `None` when race is unknown.
    pub minority: Option<bool>,
}

/// Two-digit state prefix of a ZIP code.
pub fn state_of_zip(zip: &str) -> &str {
    zip.get(..2).unwrap_or(zip)
}

/// Demographic indicators for each `(consumer, quarter)` key; income
/// quintiles are formed among the given keys of each quarter.
pub fn demographics(panel: &Panel, keys: &[(&str, i32)], rule: MinorityRule) -> Result<Vec<Demographics>> {
    let records: Vec<_> = keys
        .iter()
        .map(|&(id, q)| {
            panel
                .get(id, q)
                .ok_or_else(|| Error::KeyMismatch(format!("no panel record for {id} at quarter {q}")))
        })
        .collect::<Result<_>>()?;

    let zip_minority: BTreeMap<&str, bool> = if rule == MinorityRule::ZipShare {
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for rows in panel.consumers() {
            if let Some(race) = rows[0].race {
                let t = tally.entry(rows[0].zip.as_str()).or_default();
                t.0 += 1;
                t.1 += usize::from(race.is_minority());
            }
        }
        tally.into_iter().map(|(z, (n, m))| (z, 2 * m > n)).collect()
    } else {
        BTreeMap::new()
    };

    let mut income_p20 = vec![false; keys.len()];
    let mut by_quarter: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_quarter.entry(r.quarter).or_default().push(i);
    }
    for idx in by_quarter.values() {
        let income: Vec<f64> = idx.iter().map(|&i| records[i].income_est).collect();
        let ranks = percentile_rank(&income, Direction::Ascending)?;
        for (k, &i) in idx.iter().enumerate() {
            income_p20[i] = ranks.percentiles[k] <= 20.0;
        }
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| Demographics {
            young: r.age < YOUNG_AGE,
            income_p20: income_p20[i],
            minority: match rule {
                MinorityRule::Individual => r.race.map(|x| x.is_minority()),
                MinorityRule::ZipShare => zip_minority.get(r.zip.as_str()).copied(),
            },
        })
        .collect())
}

/// Regression frame for the ranking-difference analysis. Numeric columns:
/// `rank_diff`, `default`, `income_p20`, `young`, `minority` (NaN when
/// unknown); categorical: `state`, `quarter`, `zip`.
pub fn vulnerability_frame(panel: &Panel, rows: &[ProfiledRow], rule: MinorityRule) -> Result<Frame> {
    let keys: Vec<(&str, i32)> = rows.iter().map(|r| (r.consumer_id.as_str(), r.quarter)).collect();
    let demo = demographics(panel, &keys, rule)?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut f = Frame::new(rows.len());
    f.push_numeric(
        "rank_diff",
        rows.iter().map(|r| r.model_percentile - r.score_percentile).collect(),
    )?;
    f.push_numeric("default", rows.iter().map(|r| f64::from(r.label)).collect())?;
    f.push_numeric("income_p20", demo.iter().map(|d| flag(d.income_p20)).collect())?;
    f.push_numeric("young", demo.iter().map(|d| flag(d.young)).collect())?;
    f.push_numeric(
        "minority",
        demo.iter().map(|d| d.minority.map_or(f64::NAN, flag)).collect(),
    )?;
    let zips: Vec<&str> = keys
        .iter()
        .map(|&(id, q)| panel.get(id, q).map(|r| r.zip.as_str()).unwrap_or(""))
        .collect();
    let states: Vec<&str> = zips.iter().map(|z| state_of_zip(z)).collect();
    f.push_keys("zip", &zips)?;
    f.push_keys("state", &states)?;
    f.push_keys("quarter", &rows.iter().map(|r| r.quarter).collect::<Vec<_>>())?;
    Ok(f)
}

/// The eight ranking-difference specifications: constant only, default,
/// then each group indicator alone and with its default interaction, all
/// with state-by-quarter effects and errors clustered by state and quarter.
pub fn vulnerability_specs(mode: ClusterMode) -> Vec<RegressionSpec> {
    let base = RegressionSpec {
        dependent: "rank_diff".into(),
        regressors: Vec::new(),
        fixed_effects: vec!["state:quarter".into()],
        cluster_keys: vec!["state".into(), "quarter".into()],
        cluster_mode: mode,
        weights: None,
    };
    let with = |terms: &[&str]| RegressionSpec {
        regressors: terms.iter().map(|t| String::from(*t)).collect(),
        ..base.clone()
    };
    vec![
        with(&[]),
        with(&["default"]),
        with(&["income_p20"]),
        with(&["default", "income_p20", "income_p20:default"]),
        with(&["young"]),
        with(&["default", "young", "young:default"]),
        with(&["minority"]),
        with(&["default", "minority", "minority:default"]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_difference_by_key() {
        let model = [("a", 10.0), ("b", 50.0), ("c", 90.0)];
        let score = [("c", 80.0), ("a", 20.0), ("b", 50.0)];
        let d = ranking_difference(&model, &score).unwrap();
        assert_eq!(d, vec![("a", -10.0), ("b", 0.0), ("c", 10.0)]);
        assert!(ranking_difference(&model, &score[..2]).is_err());
        let other = [("a", 1.0), ("b", 1.0), ("d", 1.0)];
        assert!(matches!(ranking_difference(&model, &other), Err(Error::KeyMismatch(_))));
    }

    #[test]
    fn identical_compositions_leave_auc_unchanged() {
        let cell = |d, t| CompositionCell {
            delinquent: d,
            thin_file: t,
            mortgage: false,
        };
        let cells = [
            cell(true, false),
            cell(false, true),
            cell(true, false),
            cell(false, true),
        ];
        let cells: Vec<_> = cells.iter().chain(cells.iter()).copied().collect();
        let marg = [true, true, true, true, false, false, false, false];
        let scores = [0.9, 0.2, 0.4, 0.6, 0.1, 0.2, 0.3, 0.4];
        let labels = [1, 0, 0, 1, 0, 1, 0, 1];
        let r = counterfactual_auc(&scores, &labels, &marg, &cells, CompositionDims::ALL).unwrap();
        assert!(r.gap.abs() <= 1e-12);
        assert!(r.flagged_cells.is_empty());
    }

    #[test]
    fn unsupported_reference_cells_are_flagged() {
        let c = |d| CompositionCell {
            delinquent: d,
            thin_file: false,
            mortgage: false,
        };
        let cells = [c(false), c(false), c(true), c(false)];
        let marg = [true, true, false, false];
        let r = counterfactual_auc(
            &[0.1, 0.9, 0.5, 0.5],
            &[0, 1, 1, 0],
            &marg,
            &cells,
            CompositionDims::DEFAULT_HISTORY,
        )
        .unwrap();
        assert_eq!(r.flagged_cells, vec![String::from("delinquent")]);
        assert_eq!(r.counterfactual, r.actual);
        let only_missing = [c(false), c(false), c(true), c(true)];
        assert!(matches!(
            counterfactual_auc(
                &[0.1, 0.9, 0.5, 0.5],
                &[0, 1, 1, 0],
                &marg,
                &only_missing,
                CompositionDims::DEFAULT_HISTORY
            ),
            Err(Error::EmptyCellUnsupported(_))
        ));
    }

    #[test]
    fn composition_pairs_sum_to_one() {
        let cells = [
            CompositionCell {
                delinquent: true,
                thin_file: true,
                mortgage: false,
            },
            CompositionCell {
                delinquent: false,
                thin_file: true,
                mortgage: true,
            },
            CompositionCell {
                delinquent: false,
                thin_file: false,
                mortgage: true,
            },
        ];
        let s = composition_shares(&cells, &[0, 0, 1]).unwrap();
        assert_eq!(s[&0].thin_file, 1.0);
        assert_eq!(s[&0].current + s[&0].delinquent, 1.0);
        assert_eq!(s[&1].mortgage, 1.0);
    }
}
