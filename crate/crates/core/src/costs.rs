//! Interest-cost consequences of profile misclassification.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::profiles::{RiskProfile, RiskProfileTable};
use crate::{Error, Result};

/// Annual interest cost of a revolving balance.
pub fn card_annual_cost(balance: f64, apr: f64) -> Result<f64> {
    if balance < 0.0 {
        return Err(Error::NegativeBalance);
    }
    Ok(balance * apr)
}

/// Level monthly payment of a fully amortizing loan.
pub fn mortgage_payment(principal: f64, annual_rate: f64, n_months: u32) -> Result<f64> {
    if n_months == 0 {
        return Err(Error::InvalidTerm);
    }
    if principal < 0.0 {
        return Err(Error::NegativeBalance);
    }
    let n = f64::from(n_months);
    let r = annual_rate / 12.0;
    if r == 0.0 {
        return Ok(principal / n);
    }
    // (1+r)^n - 1 via expm1 keeps precision for tiny rates.
    let growth_minus_one = (n * r.ln_1p()).exp_m1();
    Ok(principal * r * (growth_minus_one + 1.0) / growth_minus_one)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MortgageDelta {
    /// `12 * (payment_a - payment_b)`.
    pub annual_delta: f64,
    /// `n_months * (payment_a - payment_b)`, undiscounted.
    pub cumulative: f64,
    pub share_of_balance: f64,
}

pub fn mortgage_delta(principal: f64, rate_a: f64, rate_b: f64, n_months: u32) -> Result<MortgageDelta> {
    let diff = mortgage_payment(principal, rate_a, n_months)? - mortgage_payment(principal, rate_b, n_months)?;
    let cumulative = f64::from(n_months) * diff;
    Ok(MortgageDelta {
        annual_delta: 12.0 * diff,
        cumulative,
        share_of_balance: if principal > 0.0 { cumulative / principal } else { 0.0 },
    })
}

/// Mortgage rate for risk percentiles in `[percentile_lo, percentile_hi]`
/// and balances in `[balance_lo, balance_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MortgageRateBand {
    pub percentile_lo: f64,
    pub percentile_hi: f64,
    pub balance_lo: f64,
    pub balance_hi: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub card_apr: BTreeMap<RiskProfile, f64>,
    /// Searched in order; the first band containing the point applies.
    pub mortgage: Vec<MortgageRateBand>,
}

impl RateTable {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| (0.0..1.0).contains(&r);
        if let Some((p, r)) = self.card_apr.iter().find(|(_, r)| !ok(**r)) {
            return Err(Error::OutOfRange(format!("card apr {r} for {p}")));
        }
        for b in &self.mortgage {
            if !ok(b.rate) || !(b.percentile_lo <= b.percentile_hi) || !(b.balance_lo <= b.balance_hi) {
                return Err(Error::OutOfRange(format!("mortgage band {b:?}")));
            }
        }
        Ok(())
    }

    pub fn card_rate(&self, profile: RiskProfile) -> Result<f64> {
        self.card_apr
            .get(&profile)
            .copied()
            .ok_or_else(|| Error::MissingRate(format!("card apr for {profile}")))
    }

    pub fn mortgage_rate(&self, percentile: f64, balance: f64) -> Result<f64> {
        self.mortgage
            .iter()
            .find(|b| {
                (b.percentile_lo..=b.percentile_hi).contains(&percentile)
                    && (b.balance_lo..=b.balance_hi).contains(&balance)
            })
            .map(|b| b.rate)
            .ok_or_else(|| Error::MissingRate(format!("mortgage rate at percentile {percentile}, balance {balance}")))
    }
}

/// Percentile at which a profile's mortgage rate is read: the midpoint of
/// the profile's rank interval.
pub fn representative_percentile(profile: RiskProfile, table: &RiskProfileTable) -> f64 {
    let i = profile.index();
    let lo = if i == 0 { 0.0 } else { table.percentile_cutoffs[i - 1] };
    let hi = if i == 4 { 100.0 } else { table.percentile_cutoffs[i] };
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Product {
    CreditCard,
    Mortgage { n_months: u32 },
}

/// One borrower's two profile assignments and balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub score_profile: RiskProfile,
    pub model_profile: RiskProfile,
    pub balance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCell {
    pub score_profile: RiskProfile,
    pub model_profile: RiskProfile,
    pub n: usize,
    /// Mean yearly saving under the model-based profile.
    pub annual_delta: f64,
    /// Mean saving over the loan term (one year for cards).
    pub cumulative: f64,
    /// Total cumulative saving over total balance.
    pub share_of_balance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub product: Product,
    /// Populated cells in (score profile, model profile) order.
    pub cells: Vec<CostCell>,
}

impl CostReport {
    pub fn cell(&self, score: RiskProfile, model: RiskProfile) -> Option<&CostCell> {
        self.cells
            .iter()
            .find(|c| c.score_profile == score && c.model_profile == model)
    }
}

/// Mean cost difference per (score profile, model profile) cell; positive
/// values are savings when priced by the model-based profile. Card costs use
/// the profile APRs; mortgage costs read the rate table at each profile's
/// representative percentile and the row's balance.
pub fn misclassification_cost_matrix(
    rows: &[CostRow],
    rates: &RateTable,
    product: Product,
    profiles: &RiskProfileTable,
) -> Result<CostReport> {
    rates.validate()?;
    // (n, annual, cumulative, balance)
    let mut acc: BTreeMap<(RiskProfile, RiskProfile), (usize, f64, f64, f64)> = BTreeMap::new();
    for r in rows {
        if r.balance < 0.0 {
            return Err(Error::NegativeBalance);
        }
        let (annual, cumulative) = match product {
            Product::CreditCard => {
                let d = card_annual_cost(r.balance, rates.card_rate(r.score_profile)?)?
                    - card_annual_cost(r.balance, rates.card_rate(r.model_profile)?)?;
                (d, d)
            }
            Product::Mortgage { n_months } => {
                let rate = |p| rates.mortgage_rate(representative_percentile(p, profiles), r.balance);
                let d = mortgage_delta(r.balance, rate(r.score_profile)?, rate(r.model_profile)?, n_months)?;
                (d.annual_delta, d.cumulative)
            }
        };
        let e = acc.entry((r.score_profile, r.model_profile)).or_default();
        e.0 += 1;
        e.1 += annual;
        e.2 += cumulative;
        e.3 += r.balance;
    }
    let cells = acc
        .into_iter()
        .map(|((s, m), (n, annual, cumulative, balance))| CostCell {
            score_profile: s,
            model_profile: m,
            n,
            annual_delta: annual / n as f64,
            cumulative: cumulative / n as f64,
            share_of_balance: if balance > 0.0 { cumulative / balance } else { 0.0 },
        })
        .collect();
    Ok(CostReport { product, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn card_cost_arithmetic() {
        assert_eq!(card_annual_cost(10_000.0, 0.18).unwrap(), 1_800.0);
        assert_eq!(card_annual_cost(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(card_annual_cost(-1.0, 0.3), Err(Error::NegativeBalance));
    }

    #[test]
    fn zero_rate_payment_is_exact() {
        assert_eq!(mortgage_payment(120_000.0, 0.0, 120).unwrap(), 1_000.0);
        assert_eq!(mortgage_payment(1.0, 0.05, 0), Err(Error::InvalidTerm));
        let tiny = mortgage_payment(120_000.0, 1e-9, 120).unwrap();
        assert!((tiny / 1_000.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn equal_rates_give_zero_delta() {
        let d = mortgage_delta(200_000.0, 0.04, 0.04, 360).unwrap();
        assert_eq!((d.annual_delta, d.cumulative, d.share_of_balance), (0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_card_rate_reported() {
        let rows = [CostRow {
            score_profile: RiskProfile::Subprime,
            model_profile: RiskProfile::Prime,
            balance: 100.0,
        }];
        let r = misclassification_cost_matrix(
            &rows,
            &RateTable::default(),
            Product::CreditCard,
            &RiskProfileTable::default(),
        );
        assert!(matches!(r, Err(Error::MissingRate(_))));
    }
}
