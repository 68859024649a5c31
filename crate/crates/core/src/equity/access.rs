use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ols::{fit_fe_ols, Frame, RegressionResult, RegressionSpec};
use super::state_of_zip;
use crate::features::FeatureSemantics;
use crate::panel::Panel;
use crate::profiles::{RiskProfile, RiskProfileTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessOutcome {
    CreditLimit,
    MortgageBalance,
    Inquiry,
    Origination,
    /// Origination at `t` among consumers with an inquiry at `t - 1` or `t`.
    OriginationGivenInquiry,
}

/// Lower edges of the age bins; the last bin is open-ended.
pub const AGE_BIN_EDGES: [f64; 6] = [18.0, 30.0, 40.0, 50.0, 60.0, 70.0];
pub const AGE_BIN_LABELS: [&str; 6] = ["18_29", "30_39", "40_49", "50_59", "60_69", "70_plus"];

fn age_bin(age: f64) -> Option<usize> {
    if !(age >= AGE_BIN_EDGES[0]) {
        return None;
    }
    Some(
        AGE_BIN_EDGES
            .iter()
            .rposition(|&e| age >= e)
            .expect("age above first edge"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessSpec {
    pub outcome: AccessOutcome,
    /// Aggregate age-bin distribution for the adjustment; the pooled sample
    /// distribution when absent.
    pub age_shares: Option<[f64; 6]>,
    /// Categorical keys among `zip`, `state`, `quarter`.
    pub cluster_keys: Vec<String>,
}

impl AccessSpec {
    pub fn new(outcome: AccessOutcome) -> Self {
        AccessSpec {
            outcome,
            age_shares: None,
            cluster_keys: vec!["zip".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeAdjustedEffect {
    pub profile: RiskProfile,
    /// `None` for the pooled profile effect.
    pub quarter: Option<i32>,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessResult {
    pub outcome: AccessOutcome,
    pub regression: RegressionResult,
    pub base_profile: RiskProfile,
    pub base_quarter: i32,
    pub age_shares: [f64; 6],
    /// Profile coefficient plus the share-weighted age-bin coefficients,
    /// pooled and per quarter (adding the quarter-by-profile effect).
    pub age_adjusted: Vec<AgeAdjustedEffect>,
    /// Mean outcome per lagged profile.
    pub outcome_means: Vec<(RiskProfile, f64)>,
}

fn profile_column(p: RiskProfile) -> String {
    format!("crp_{}", p.key())
}

fn age_column(b: usize) -> String {
    format!("age_{}", AGE_BIN_LABELS[b])
}

fn interaction_column(q: i32, p: RiskProfile) -> String {
    format!("q{q}_x_{}", p.key())
}

/// Regresses an access outcome at `t` on the score profile at `t - 1`,
/// age-bin indicators and quarter-by-profile indicators, absorbing ZIP
/// effects. The lowest present profile, age bin and quarter are the
/// omitted categories.
pub fn access_regression(
    panel: &Panel,
    table: &RiskProfileTable,
    sem: &FeatureSemantics,
    spec: &AccessSpec,
) -> Result<AccessResult> {
    struct Obs {
        y: f64,
        profile: RiskProfile,
        bin: usize,
        quarter: i32,
        zip: String,
    }
    let mut obs = Vec::new();
    for rows in panel.consumers() {
        for pair in rows.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.quarter != prev.quarter + 1 {
                continue;
            }
            let (Some(score), Some(bin)) = (prev.credit_score, age_bin(cur.age)) else {
                continue;
            };
            let x = cur.features.as_slice();
            let y = match spec.outcome {
                AccessOutcome::CreditLimit => x[sem.card_limit],
                AccessOutcome::MortgageBalance => x[sem.mortgage_balance],
                AccessOutcome::Inquiry => f64::from(u8::from(x[sem.inquiries] > 0.0)),
                AccessOutcome::Origination => f64::from(u8::from(x[sem.originations] > 0.0)),
                AccessOutcome::OriginationGivenInquiry => {
                    let inquired = x[sem.inquiries] > 0.0 || prev.features.as_slice()[sem.inquiries] > 0.0;
                    if !inquired {
                        continue;
                    }
                    f64::from(u8::from(x[sem.originations] > 0.0))
                }
            };
            obs.push(Obs {
                y,
                profile: table.score_to_profile(score)?,
                bin,
                quarter: cur.quarter,
                zip: cur.zip.clone(),
            });
        }
    }
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut profiles: Vec<RiskProfile> = obs.iter().map(|o| o.profile).collect();
    profiles.sort();
    profiles.dedup();
    let mut bins: Vec<usize> = obs.iter().map(|o| o.bin).collect();
    bins.sort_unstable();
    bins.dedup();
    let mut quarters: Vec<i32> = obs.iter().map(|o| o.quarter).collect();
    quarters.sort_unstable();
    quarters.dedup();
    let (base_profile, base_bin, base_quarter) = (profiles[0], bins[0], quarters[0]);

    let n = obs.len();
    let mut frame = Frame::new(n);
    let indicator =
        |f: &dyn Fn(&Obs) -> bool| -> Vec<f64> { obs.iter().map(|o| if f(o) { 1.0 } else { 0.0 }).collect() };
    frame.push_numeric("y", obs.iter().map(|o| o.y).collect())?;
    let mut regressors = Vec::new();
    for &p in &profiles[1..] {
        let name = profile_column(p);
        frame.push_numeric(&name, indicator(&|o| o.profile == p))?;
        regressors.push(name);
    }
    for &b in &bins[1..] {
        let name = age_column(b);
        frame.push_numeric(&name, indicator(&|o| o.bin == b))?;
        regressors.push(name);
    }
    let mut cells: BTreeMap<(i32, RiskProfile), usize> = BTreeMap::new();
    for o in &obs {
        *cells.entry((o.quarter, o.profile)).or_default() += 1;
    }
    for (&(q, p), _) in cells.iter().filter(|((q, _), _)| *q != base_quarter) {
        let name = interaction_column(q, p);
        frame.push_numeric(&name, indicator(&|o| o.quarter == q && o.profile == p))?;
        regressors.push(name);
    }
    let zips: Vec<&str> = obs.iter().map(|o| o.zip.as_str()).collect();
    frame.push_keys("zip", &zips)?;
    frame.push_keys("state", &zips.iter().map(|z| state_of_zip(z)).collect::<Vec<_>>())?;
    frame.push_keys("quarter", &obs.iter().map(|o| o.quarter).collect::<Vec<_>>())?;

    let regression = fit_fe_ols(
        &frame,
        &RegressionSpec {
            dependent: "y".into(),
            regressors,
            fixed_effects: vec!["zip".into()],
            cluster_keys: spec.cluster_keys.clone(),
            ..RegressionSpec::default()
        },
    )?;

    let age_shares = match spec.age_shares {
        Some(s) => {
            let total: f64 = s.iter().sum();
            if s.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(
                    "age shares must be non-negative and sum to 1".into(),
                ));
            }
            s
        }
        None => {
            let mut s = [0.0; 6];
            for o in &obs {
                s[o.bin] += 1.0 / n as f64;
            }
            s
        }
    };
    let coef = |name: &str| regression.estimate(name).unwrap_or(0.0);
    let age_term: f64 = (0..6)
        .filter(|&b| b != base_bin)
        .map(|b| age_shares[b] * coef(&age_column(b)))
        .sum();
    let mut age_adjusted = Vec::new();
    for &p in &profiles {
        let profile_effect = if p == base_profile {
            0.0
        } else {
            coef(&profile_column(p))
        };
        age_adjusted.push(AgeAdjustedEffect {
            profile: p,
            quarter: None,
            effect: profile_effect + age_term,
        });
        for &q in &quarters {
            if q != base_quarter && !cells.contains_key(&(q, p)) {
                continue;
            }
            let time = if q == base_quarter {
                0.0
            } else {
                coef(&interaction_column(q, p))
            };
            age_adjusted.push(AgeAdjustedEffect {
                profile: p,
                quarter: Some(q),
                effect: profile_effect + time + age_term,
            });
        }
    }
    let outcome_means = profiles
        .iter()
        .map(|&p| {
            let ys: Vec<f64> = obs.iter().filter(|o| o.profile == p).map(|o| o.y).collect();
            (p, ys.iter().sum::<f64>() / ys.len() as f64)
        })
        .collect();
    Ok(AccessResult {
        outcome: spec.outcome,
        regression,
        base_profile,
        base_quarter,
        age_shares,
        age_adjusted,
        outcome_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_bins_partition_from_eighteen() {
        assert_eq!(age_bin(17.9), None);
        assert_eq!(age_bin(18.0), Some(0));
        assert_eq!(age_bin(29.99), Some(0));
        assert_eq!(age_bin(30.0), Some(1));
        assert_eq!(age_bin(69.5), Some(4));
        assert_eq!(age_bin(95.0), Some(5));
    }
}
