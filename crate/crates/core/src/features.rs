//! The 79-entry credit-report feature vector and its five attribution groups.
//!
//! Features are anonymous (`f001`..`f079`) and assigned to groups by index
//! range. A handful of indices carry a fixed meaning so that composition
//! cells and access-to-credit outcomes can be derived from the vector; see
//! [`FeatureSemantics`].

use core::fmt;
use core::ops::{Index, Range};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const N_FEATURES: usize = 79;

/// Feature groups used for attribution, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    PaymentHistory,
    AmountsOwed,
    LengthOfHistory,
    CreditMix,
    NewCredit,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::PaymentHistory,
        FeatureGroup::AmountsOwed,
        FeatureGroup::LengthOfHistory,
        FeatureGroup::CreditMix,
        FeatureGroup::NewCredit,
    ];

    /// Zero-based feature index range of the group.
    pub const fn range(self) -> Range<usize> {
        match self {
            FeatureGroup::PaymentHistory => 0..21,
            FeatureGroup::AmountsOwed => 21..64,
            FeatureGroup::LengthOfHistory => 64..70,
            FeatureGroup::CreditMix => 70..75,
            FeatureGroup::NewCredit => 75..79,
        }
    }

    pub const fn size(self) -> usize {
        let r = self.range();
        r.end - r.start
    }

    pub const fn position(self) -> usize {
        self as usize
    }

    pub fn of_feature(index: usize) -> Option<FeatureGroup> {
        FeatureGroup::ALL.into_iter().find(|g| g.range().contains(&index))
    }

    pub const fn label(self) -> &'static str {
        match self {
            FeatureGroup::PaymentHistory => "Payment History",
            FeatureGroup::AmountsOwed => "Amounts Owed",
            FeatureGroup::LengthOfHistory => "Length of Credit History",
            FeatureGroup::CreditMix => "Credit Mix",
            FeatureGroup::NewCredit => "New Credit",
        }
    }

    /// Weights the score vendors publish for the same five factors.
    pub const fn published_score_weight(self) -> f64 {
        match self {
            FeatureGroup::PaymentHistory => 0.35,
            FeatureGroup::AmountsOwed => 0.30,
            FeatureGroup::LengthOfHistory => 0.15,
            FeatureGroup::CreditMix => 0.10,
            FeatureGroup::NewCredit => 0.10,
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Column name `f001`..`f079` for a zero-based index.
pub fn feature_name(index: usize) -> alloc::string::String {
    alloc::format!("f{:03}", index + 1)
}

/// Fixed-length, finite feature vector.
#[derive(Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; N_FEATURES]);

impl FeatureVector {
    pub fn new(values: [f64; N_FEATURES]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfRange(alloc::format!("{} is not finite", feature_name(i))));
        }
        Ok(FeatureVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_FEATURES] = values.try_into().map_err(|_| Error::LengthMismatch {
            expected: N_FEATURES,
            got: values.len(),
        })?;
        FeatureVector::new(arr)
    }

    pub fn zeros() -> Self {
        FeatureVector([0.0; N_FEATURES])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_array(&self) -> &[f64; N_FEATURES] {
        &self.0
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Indices of the features that carry a fixed meaning.
///
/// The synthetic generator writes these columns with the stated meaning;
/// composition cells, access outcomes and balances read them back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSemantics {
    /// 1 if the consumer was 90+ days past due in the previous quarter.
    pub prior_delinquency: usize,
    /// Number of 90+ quarters among the previous eight.
    pub delinquent_quarters: usize,
    /// Total credit-card limit, in thousands.
    pub card_limit: usize,
    /// First-mortgage balance in thousands (0 without a mortgage).
    pub mortgage_balance: usize,
    /// Revolving credit-card balance, in thousands.
    pub card_balance: usize,
    /// Years since the oldest trade was opened.
    pub history_years: usize,
    /// Number of distinct product types held.
    pub product_types: usize,
    /// Credit inquiries in the quarter.
    pub inquiries: usize,
    /// New trades originated in the quarter.
    pub originations: usize,
}

impl Default for FeatureSemantics {
    fn default() -> Self {
        FeatureSemantics {
            prior_delinquency: 0,
            delinquent_quarters: 1,
            card_limit: 21,
            mortgage_balance: 22,
            card_balance: 23,
            history_years: 64,
            product_types: 70,
            inquiries: 75,
            originations: 76,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_partition_the_index_set() {
        let sizes: alloc::vec::Vec<usize> = FeatureGroup::ALL.iter().map(|g| g.size()).collect();
        assert_eq!(sizes, [21, 43, 6, 5, 4]);
        for i in 0..N_FEATURES {
            let owners = FeatureGroup::ALL.iter().filter(|g| g.range().contains(&i)).count();
            assert_eq!(owners, 1, "feature {i}");
        }
        assert_eq!(FeatureGroup::of_feature(79), None);
    }

    #[test]
    fn semantic_columns_sit_in_their_groups() {
        let s = FeatureSemantics::default();
        assert_eq!(
            FeatureGroup::of_feature(s.prior_delinquency),
            Some(FeatureGroup::PaymentHistory)
        );
        assert_eq!(FeatureGroup::of_feature(s.card_limit), Some(FeatureGroup::AmountsOwed));
        assert_eq!(
            FeatureGroup::of_feature(s.history_years),
            Some(FeatureGroup::LengthOfHistory)
        );
        assert_eq!(FeatureGroup::of_feature(s.product_types), Some(FeatureGroup::CreditMix));
        assert_eq!(FeatureGroup::of_feature(s.inquiries), Some(FeatureGroup::NewCredit));
    }

    #[test]
    fn rejects_non_finite() {
        let mut v = [0.0; N_FEATURES];
        v[5] = f64::NAN;
        assert!(FeatureVector::new(v).is_err());
        assert!(FeatureVector::from_slice(&[0.0; 3]).is_err());
        assert_eq!(feature_name(0), "f001");
        assert_eq!(feature_name(78), "f079");
    }
}
