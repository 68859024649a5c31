//! Industry credit-score risk profiles and the comparison between
//! score-based and model-based profile assignments.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::metrics::{percentile_rank, Direction, PredictionRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskProfile {
    DeepSubprime,
    Subprime,
    NearPrime,
    Prime,
    SuperPrime,
}

impl RiskProfile {
    pub const ALL: [RiskProfile; 5] = [
        RiskProfile::DeepSubprime,
        RiskProfile::Subprime,
        RiskProfile::NearPrime,
        RiskProfile::Prime,
        RiskProfile::SuperPrime,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    /// Label as printed in the risk-profile tables.
    pub const fn label(self) -> &'static str {
        match self {
            RiskProfile::DeepSubprime => "Deep Subprime",
            RiskProfile::Subprime => "Subprime",
            RiskProfile::NearPrime => "Near Prime",
            RiskProfile::Prime => "Prime",
            RiskProfile::SuperPrime => "Super Prime",
        }
    }

    pub fn from_label(s: &str) -> Option<RiskProfile> {
        RiskProfile::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s) || p.key() == s)
    }

    /// Machine key (`deep_subprime`, ...).
    pub const fn key(self) -> &'static str {
        match self {
            RiskProfile::DeepSubprime => "deep_subprime",
            RiskProfile::Subprime => "subprime",
            RiskProfile::NearPrime => "near_prime",
            RiskProfile::Prime => "prime",
            RiskProfile::SuperPrime => "super_prime",
        }
    }

    pub const fn is_prime(self) -> bool {
        matches!(self, RiskProfile::Prime | RiskProfile::SuperPrime)
    }
}

impl fmt::Display for RiskProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Score bands and population percentile cutoffs of the five profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfileTable {
    /// Inclusive `(low, high)` score range per profile.
    pub score_ranges: [(u16, u16); 5],
    /// Upper percentile of the first four profiles. A percentile equal to a
    /// cutoff belongs to the lower band.
    pub percentile_cutoffs: [f64; 4],
    /// Share of borrowers per profile, in percent.
    pub population_shares: [f64; 5],
}

impl Default for RiskProfileTable {
    /// Score ranges and population shares of the industry table, with
    /// percentile cutoffs at the cumulative shares (6.0, 26.1, 40.1, 76.4).
    fn default() -> Self {
        let shares = [6.0, 20.1, 14.0, 36.3, 23.6];
        let mut cutoffs = [0.0; 4];
        let mut acc = 0.0;
        for (c, s) in cutoffs.iter_mut().zip(shares) {
            acc += s;
            *c = (acc * 100.0_f64).round() / 100.0;
        }
        RiskProfileTable {
            score_ranges: [(300, 499), (500, 600), (601, 660), (661, 780), (781, 850)],
            percentile_cutoffs: cutoffs,
            population_shares: shares,
        }
    }
}

impl RiskProfileTable {
    /// Percentile cutoffs as printed in the industry table's percentile row.
    /// They do not add up to its share row (the second and fifth bands differ
    /// by one point), so they are kept separate from the default table.
    pub const PUBLISHED_CUTOFFS: [f64; 4] = [6.0, 27.10, 41.10, 77.40];

    /// Table whose percentile cutoffs are the printed percentile row; shares
    /// are the implied band widths.
    pub fn published_cutoffs() -> Self {
        let c = Self::PUBLISHED_CUTOFFS;
        RiskProfileTable {
            population_shares: [c[0], c[1] - c[0], c[2] - c[1], c[3] - c[2], 100.0 - c[3]],
            percentile_cutoffs: c,
            ..RiskProfileTable::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.score_ranges;
        let contiguous = r[0].0 == 300
            && r[4].1 == 850
            && r.windows(2).all(|w| w[1].0 == w[0].1 + 1)
            && r.iter().all(|(lo, hi)| lo <= hi);
        if !contiguous {
            return Err(Error::InvalidConfig("score ranges must partition [300, 850]".into()));
        }
        let c = &self.percentile_cutoffs;
        if !(c[0] > 0.0 && c[3] < 100.0 && c.windows(2).all(|w| w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "percentile cutoffs must be strictly increasing in (0, 100)".into(),
            ));
        }
        let total: f64 = self.population_shares.iter().sum();
        if (total - 100.0).abs() > 0.1 {
            return Err(Error::InvalidConfig("population shares must sum to 100".into()));
        }
        Ok(())
    }

    pub fn score_to_profile(&self, score: u16) -> Result<RiskProfile> {
        RiskProfile::ALL
            .into_iter()
            .zip(self.score_ranges)
            .find(|(_, (lo, hi))| (*lo..=*hi).contains(&score))
            .map(|(p, _)| p)
            .ok_or_else(|| Error::OutOfRange(alloc::format!("credit score {score}")))
    }

    /// Profile of a risk percentile in (0, 100], where low percentiles hold
    /// the highest predicted default risk.
    pub fn rank_to_profile(&self, percentile: f64) -> Result<RiskProfile> {
        if !(percentile > 0.0 && percentile <= 100.0) {
            return Err(Error::OutOfRange(alloc::format!("percentile {percentile}")));
        }
        let band = self
            .percentile_cutoffs
            .iter()
            .position(|&c| percentile <= c)
            .unwrap_or(4);
        Ok(RiskProfile::ALL[band])
    }
}

/// Band lookup with the default industry table.
pub fn score_to_profile(score: u16) -> Result<RiskProfile> {
    RiskProfileTable::default().score_to_profile(score)
}

/// Percentile cut with the given table.
pub fn rank_to_profile(percentile: f64, table: &RiskProfileTable) -> Result<RiskProfile> {
    table.rank_to_profile(percentile)
}

/// Score-based and model-based profile of one scored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfiledRow {
    pub consumer_id: String,
    pub quarter: i32,
    pub p_hat: f64,
    pub label: u8,
    pub credit_score: u16,
    pub score_percentile: f64,
    pub model_percentile: f64,
    pub score_profile: RiskProfile,
    pub model_profile: RiskProfile,
}

/// Assigns both profiles to every scored row. Model percentiles are ranked
/// within each quarter on `1 - p_hat`; unscored rows are dropped.
pub fn assign_profiles(rows: &[PredictionRow], table: &RiskProfileTable) -> Result<Vec<ProfiledRow>> {
    let mut quarters: Vec<i32> = rows.iter().map(|r| r.quarter).collect();
    quarters.sort_unstable();
    quarters.dedup();
    let mut out = Vec::new();
    for q in quarters {
        let scored: Vec<&PredictionRow> = rows
            .iter()
            .filter(|r| r.quarter == q && r.credit_score.is_some())
            .collect();
        if scored.is_empty() {
            continue;
        }
        let p: Vec<f64> = scored.iter().map(|r| r.p_hat).collect();
        let s: Vec<f64> = scored.iter().map(|r| f64::from(r.credit_score.unwrap())).collect();
        let model_rank = percentile_rank(&p, Direction::Descending)?;
        let score_rank = percentile_rank(&s, Direction::Ascending)?;
        for (i, r) in scored.iter().enumerate() {
            let score = r.credit_score.unwrap();
            out.push(ProfiledRow {
                consumer_id: r.consumer_id.clone(),
                quarter: r.quarter,
                p_hat: r.p_hat,
                label: r.label,
                credit_score: score,
                score_percentile: score_rank.percentiles[i],
                model_percentile: model_rank.percentiles[i],
                score_profile: table.score_to_profile(score)?,
                model_profile: table.rank_to_profile(model_rank.percentiles[i])?,
            });
        }
    }
    Ok(out)
}

/// Row-percentage cross-tab of score profile (rows) by model profile
/// (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementMatrix {
    pub counts: [[u64; 5]; 5],
    /// Row percentages; all zero for an empty row.
    pub m: [[f64; 5]; 5],
    /// Off-diagonal share per row, in percent.
    pub disagreement: [f64; 5],
}

pub fn disagreement_matrix(pairs: impl IntoIterator<Item = (RiskProfile, RiskProfile)>) -> DisagreementMatrix {
    let mut counts = [[0u64; 5]; 5];
    for (score, model) in pairs {
        counts[score.index()][model.index()] += 1;
    }
    let mut m = [[0.0; 5]; 5];
    let mut disagreement = [0.0; 5];
    for r in 0..5 {
        let total: u64 = counts[r].iter().sum();
        if total == 0 {
            continue;
        }
        for c in 0..5 {
            m[r][c] = 100.0 * counts[r][c] as f64 / total as f64;
        }
        let off: u64 = total - counts[r][r];
        disagreement[r] = 100.0 * off as f64 / total as f64;
    }
    DisagreementMatrix {
        counts,
        m,
        disagreement,
    }
}

/// Minimum observations for a cell to be reported without a sparsity flag.
pub const MIN_CELL_COUNT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDefaultRate {
    pub score_profile: RiskProfile,
    pub model_profile: RiskProfile,
    pub n: usize,
    pub realized_rate: f64,
    pub predicted_rate: f64,
    pub sparse: bool,
}

/// Realized and mean predicted default rate per (score, model) profile cell.
/// Empty cells are omitted.
pub fn default_by_cell(rows: &[ProfiledRow]) -> Vec<CellDefaultRate> {
    let mut acc = [[(0usize, 0.0, 0.0); 5]; 5];
    for r in rows {
        let e = &mut acc[r.score_profile.index()][r.model_profile.index()];
        e.0 += 1;
        e.1 += f64::from(r.label);
        e.2 += r.p_hat;
    }
    let mut out = Vec::new();
    for s in RiskProfile::ALL {
        for m in RiskProfile::ALL {
            let (n, y, p) = acc[s.index()][m.index()];
            if n > 0 {
                out.push(CellDefaultRate {
                    score_profile: s,
                    model_profile: m,
                    n,
                    realized_rate: y / n as f64,
                    predicted_rate: p / n as f64,
                    sparse: n < MIN_CELL_COUNT,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn score_band_boundaries() {
        use RiskProfile::*;
        let cases = [
            (300, DeepSubprime),
            (499, DeepSubprime),
            (500, Subprime),
            (600, Subprime),
            (601, NearPrime),
            (660, NearPrime),
            (661, Prime),
            (780, Prime),
            (781, SuperPrime),
            (850, SuperPrime),
        ];
        for (s, p) in cases {
            assert_eq!(score_to_profile(s), Ok(p), "score {s}");
        }
        assert!(score_to_profile(299).is_err());
        assert!(score_to_profile(851).is_err());
    }

    #[test]
    fn percentile_boundaries_inclusive_left() {
        use RiskProfile::*;
        let printed = RiskProfileTable::published_cutoffs();
        assert_eq!(rank_to_profile(3.0, &printed), Ok(DeepSubprime));
        assert_eq!(rank_to_profile(6.0, &printed), Ok(DeepSubprime));
        assert_eq!(rank_to_profile(27.10, &printed), Ok(Subprime));
        assert_eq!(rank_to_profile(27.11, &printed), Ok(NearPrime));
        assert_eq!(rank_to_profile(100.0, &printed), Ok(SuperPrime));

        let t = RiskProfileTable::default();
        assert_eq!(t.percentile_cutoffs, [6.0, 26.1, 40.1, 76.4]);
        assert_eq!(rank_to_profile(26.10, &t), Ok(Subprime));
        assert_eq!(rank_to_profile(26.11, &t), Ok(NearPrime));
        assert_eq!(rank_to_profile(76.41, &t), Ok(SuperPrime));
        assert!(rank_to_profile(0.0, &t).is_err());
        assert!(rank_to_profile(100.5, &t).is_err());
    }

    #[test]
    fn tables_validate() {
        RiskProfileTable::default().validate().unwrap();
        RiskProfileTable::published_cutoffs().validate().unwrap();
        let bad = RiskProfileTable {
            percentile_cutoffs: [6.0, 5.0, 40.0, 70.0],
            ..RiskProfileTable::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perfect_agreement_has_no_disagreement() {
        let pairs = RiskProfile::ALL.iter().flat_map(|&p| vec![(p, p); 7]);
        let d = disagreement_matrix(pairs);
        for r in 0..5 {
            assert_eq!(d.m[r][r], 100.0);
            assert_eq!(d.disagreement[r], 0.0);
        }
    }

    #[test]
    fn ten_row_cross_tab() {
        use RiskProfile::*;
        let pairs = [
            (DeepSubprime, DeepSubprime),
            (DeepSubprime, Subprime),
            (Subprime, Subprime),
            (Subprime, Subprime),
            (Subprime, NearPrime),
            (Subprime, DeepSubprime),
            (Prime, Prime),
            (Prime, SuperPrime),
            (Prime, Prime),
            (SuperPrime, Prime),
        ];
        let d = disagreement_matrix(pairs);
        assert_eq!(d.m[0][0], 50.0);
        assert_eq!(d.m[0][1], 50.0);
        assert_eq!(d.m[1], [25.0, 50.0, 25.0, 0.0, 0.0]);
        assert_eq!(d.disagreement[1], 50.0);
        assert_eq!(d.m[2], [0.0; 5]);
        assert!((d.m[3][3] - 200.0 / 3.0).abs() < 1e-12);
        assert!((d.disagreement[3] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(d.disagreement[4], 100.0);
    }

    fn profiled(s: RiskProfile, m: RiskProfile, y: u8, p: f64) -> ProfiledRow {
        ProfiledRow {
            consumer_id: "c".into(),
            quarter: 0,
            p_hat: p,
            label: y,
            credit_score: 700,
            score_percentile: 50.0,
            model_percentile: 50.0,
            score_profile: s,
            model_profile: m,
        }
    }

    #[test]
    fn default_by_cell_hand_tally() {
        use RiskProfile::*;
        let rows = vec![
            profiled(Subprime, NearPrime, 0, 0.2),
            profiled(Subprime, NearPrime, 1, 0.4),
            profiled(Subprime, Subprime, 1, 0.5),
            profiled(Prime, Prime, 0, 0.05),
            profiled(Prime, Prime, 0, 0.07),
            profiled(Prime, Prime, 1, 0.09),
        ];
        let cells = default_by_cell(&rows);
        assert_eq!(cells.len(), 3);
        let c = &cells[0];
        assert_eq!((c.score_profile, c.model_profile, c.n), (Subprime, Subprime, 1));
        let c = &cells[1];
        assert_eq!((c.score_profile, c.model_profile, c.n), (Subprime, NearPrime, 2));
        assert_eq!(c.realized_rate, 0.5);
        assert!((c.predicted_rate - 0.3).abs() < 1e-15);
        let c = &cells[2];
        assert!((c.realized_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.predicted_rate - 0.07).abs() < 1e-15);
        assert!(c.sparse);

        let single = default_by_cell(&rows[3..]);
        assert_eq!(single.len(), 1);
    }
}
