//! Credit-panel data model: one record per consumer per quarter, the
//! eight-quarter default label, and quarterly label transitions.

mod synth;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::{Error, Result};

pub use synth::{generate_synthetic, GenConfig, GenSummary};

/// Number of quarters (current plus seven ahead) covered by a default label.
pub const LABEL_HORIZON: i32 = 8;

pub const MIN_SCORE: u16 = 300;
pub const MAX_SCORE: u16 = 850;

/// Census race/ethnicity groups used by the BISG proxy and the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Race {
    Hispanic,
    White,
    Black,
    Api,
    Aian,
    Multiracial,
}

impl Race {
    pub const ALL: [Race; 6] = [
        Race::Hispanic,
        Race::White,
        Race::Black,
        Race::Api,
        Race::Aian,
        Race::Multiracial,
    ];

    pub const fn code(self) -> &'static str {
        match self {
            Race::Hispanic => "hispanic",
            Race::White => "white",
            Race::Black => "black",
            Race::Api => "api",
            Race::Aian => "aian",
            Race::Multiracial => "multiracial",
        }
    }

    pub fn from_code(s: &str) -> Option<Race> {
        Race::ALL.into_iter().find(|r| r.code() == s)
    }

    /// Black or Hispanic, the grouping used for the minority indicator.
    pub const fn is_minority(self) -> bool {
        matches!(self, Race::Black | Race::Hispanic)
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One consumer's credit-report snapshot at one quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerQuarter {
    pub consumer_id: String,
    /// Quarters since the panel epoch.
    pub quarter: i32,
    /// 90+ days-past-due indicator for this quarter.
    pub d_state: u8,
    pub credit_score: Option<u16>,
    pub features: FeatureVector,
    pub age: f64,
    pub income_est: f64,
    pub zip: String,
    pub race: Option<Race>,
    /// Ground-truth default probability; synthetic panels only.
    pub true_pd: Option<f64>,
}

/// Display label `YYYYQn` for a quarter index counted from `base_year` Q1.
pub fn quarter_label(quarter: i32, base_year: i32) -> String {
    let year = base_year + quarter.div_euclid(4);
    alloc::format!("{}Q{}", year, quarter.rem_euclid(4) + 1)
}

/// An immutable panel in canonical `(consumer_id, quarter)` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    records: Vec<ConsumerQuarter>,
}

impl Panel {
    /// Sorts the records into canonical order. Invariants are not checked
    /// here; see [`validate_records`].
    pub fn from_records(mut records: Vec<ConsumerQuarter>) -> Self {
        records.sort_by(|a, b| a.consumer_id.cmp(&b.consumer_id).then(a.quarter.cmp(&b.quarter)));
        Panel { records }
    }

    pub fn records(&self) -> &[ConsumerQuarter] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn quarter_range(&self) -> Option<(i32, i32)> {
        let min = self.records.iter().map(|r| r.quarter).min()?;
        let max = self.records.iter().map(|r| r.quarter).max()?;
        Some((min, max))
    }

    /// Contiguous record slices, one per consumer.
    pub fn consumers(&self) -> impl Iterator<Item = &[ConsumerQuarter]> {
        self.records.chunk_by(|a, b| a.consumer_id == b.consumer_id)
    }

    pub fn consumer(&self, consumer_id: &str) -> &[ConsumerQuarter] {
        let start = self.records.partition_point(|r| r.consumer_id.as_str() < consumer_id);
        let end = start + self.records[start..].partition_point(|r| r.consumer_id.as_str() == consumer_id);
        &self.records[start..end]
    }

    pub fn get(&self, consumer_id: &str, quarter: i32) -> Option<&ConsumerQuarter> {
        let rows = self.consumer(consumer_id);
        rows.binary_search_by_key(&quarter, |r| r.quarter)
            .ok()
            .map(|i| &rows[i])
    }

    /// Default label for every record with a complete horizon, as
    /// `(record index, label)` in canonical order.
    pub fn labels(&self) -> Vec<(usize, u8)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for rows in self.consumers() {
            for k in 0..rows.len() {
                if let Some(y) = label_in_slice(rows, k) {
                    out.push((offset + k, y));
                }
            }
            offset += rows.len();
        }
        out
    }

    /// Labeled records at one quarter.
    pub fn labeled_at(&self, quarter: i32) -> Vec<(usize, u8)> {
        self.labels()
            .into_iter()
            .filter(|&(i, _)| self.records[i].quarter == quarter)
            .collect()
    }
}

/// Label of `rows[k]` given that `rows` is one consumer's sorted, duplicate
/// free history; `None` without a full horizon.
fn label_in_slice(rows: &[ConsumerQuarter], k: usize) -> Option<u8> {
    let t = rows[k].quarter;
    let last = k + (LABEL_HORIZON as usize - 1);
    if last >= rows.len() || rows[last].quarter != t + LABEL_HORIZON - 1 {
        return None;
    }
    Some(u8::from(rows[k..=last].iter().any(|r| r.d_state != 0)))
}

/// Default label at quarter `t`: 1 if the consumer is 90+ days past due in
/// any of quarters `t..=t+7`, else 0.
pub fn label_default(panel: &Panel, consumer_id: &str, t: i32) -> Result<u8> {
    let rows = panel.consumer(consumer_id);
    let missing = || Error::MissingHorizon {
        consumer_id: consumer_id.into(),
        quarter: t,
    };
    let k = rows.binary_search_by_key(&t, |r| r.quarter).map_err(|_| missing())?;
    label_in_slice(rows, k).ok_or_else(missing)
}

/// Row-stochastic 2x2 transition matrix of the default label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// `p[a]` is the distribution of next quarter's label given label `a`;
    /// `None` if label `a` never precedes another observation.
    pub p: [Option<[f64; 2]>; 2],
    /// Mean label over all inputs.
    pub default_freq: f64,
    /// Number of consecutive-quarter pairs counted.
    pub n_pairs: usize,
}

/// Label transition frequencies over consecutive quarters of each consumer.
pub fn transition_matrix(labels: &[(&str, i32, u8)]) -> Result<TransitionMatrix> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_key: BTreeMap<(&str, i32), u8> = BTreeMap::new();
    for &(id, t, y) in labels {
        by_key.insert((id, t), y);
    }
    let mut counts = [[0usize; 2]; 2];
    for (&(id, t), &y) in &by_key {
        if let Some(&next) = by_key.get(&(id, t + 1)) {
            counts[usize::from(y != 0)][usize::from(next != 0)] += 1;
        }
    }
    let n_pairs: usize = counts.iter().flatten().sum();
    if n_pairs == 0 {
        return Err(Error::EmptyInput);
    }
    let row = |c: [usize; 2]| {
        let total = c[0] + c[1];
        (total > 0).then(|| [c[0] as f64 / total as f64, c[1] as f64 / total as f64])
    };
    let positives = labels.iter().filter(|l| l.2 != 0).count();
    Ok(TransitionMatrix {
        p: [row(counts[0]), row(counts[1])],
        default_freq: positives as f64 / labels.len() as f64,
        n_pairs,
    })
}

/// Kinds of invariant violation reported by [`validate_records`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateKey,
    ScoreOutOfRange,
    InvalidDState,
    TruePdOutOfRange,
    InvalidZip,
    InvalidAge,
    InvalidIncome,
    EmptyConsumerId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Zero-based position in the validated slice.
    pub row: usize,
    pub kind: ViolationKind,
    pub message: String,
}

/// Checks every record invariant, returning one entry per violation.
pub fn validate_records(records: &[ConsumerQuarter]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<(&str, i32), usize> = BTreeMap::new();
    for (row, r) in records.iter().enumerate() {
        let mut push = |kind, message: String| out.push(Violation { row, kind, message });
        if r.consumer_id.is_empty() {
            push(ViolationKind::EmptyConsumerId, "empty consumer_id".into());
        }
        if let Some(first) = seen.insert((r.consumer_id.as_str(), r.quarter), row) {
            push(
                ViolationKind::DuplicateKey,
                alloc::format!("({}, {}) already present at row {first}", r.consumer_id, r.quarter),
            );
        }
        if let Some(s) = r.credit_score {
            if !(MIN_SCORE..=MAX_SCORE).contains(&s) {
                push(
                    ViolationKind::ScoreOutOfRange,
                    alloc::format!("credit_score {s} outside [300, 850]"),
                );
            }
        }
        if r.d_state > 1 {
            push(
                ViolationKind::InvalidDState,
                alloc::format!("d_state {} not in {{0,1}}", r.d_state),
            );
        }
        if let Some(p) = r.true_pd {
            if !(0.0..=1.0).contains(&p) {
                push(
                    ViolationKind::TruePdOutOfRange,
                    alloc::format!("true_pd {p} outside [0, 1]"),
                );
            }
        }
        if r.zip.len() != 5 || !r.zip.bytes().all(|b| b.is_ascii_alphanumeric()) {
            push(
                ViolationKind::InvalidZip,
                alloc::format!("zip {:?} is not a 5-character code", r.zip),
            );
        }
        if !r.age.is_finite() || r.age < 0.0 {
            push(ViolationKind::InvalidAge, alloc::format!("age {}", r.age));
        }
        if !r.income_est.is_finite() || r.income_est < 0.0 {
            push(
                ViolationKind::InvalidIncome,
                alloc::format!("income_est {}", r.income_est),
            );
        }
    }
    out
}

/// [`validate_records`] over a panel in canonical order.
pub fn validate_panel(panel: &Panel) -> Vec<Violation> {
    validate_records(panel.records())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn record(id: &str, quarter: i32, d: u8) -> ConsumerQuarter {
        ConsumerQuarter {
            consumer_id: id.to_string(),
            quarter,
            d_state: d,
            credit_score: Some(700),
            features: FeatureVector::zeros(),
            age: 40.0,
            income_est: 50_000.0,
            zip: "10001".into(),
            race: None,
            true_pd: None,
        }
    }

    fn panel_from(id: &str, states: &[u8]) -> Panel {
        Panel::from_records(
            states
                .iter()
                .enumerate()
                .map(|(t, &d)| record(id, t as i32, d))
                .collect(),
        )
    }

    #[test]
    fn label_all_zero_window() {
        let p = panel_from("a", &[0; 8]);
        assert_eq!(label_default(&p, "a", 0), Ok(0));
    }

    #[test]
    fn label_any_delinquency_forces_one() {
        let p = panel_from("a", &[0, 0, 0, 1, 0, 0, 0, 0]);
        assert_eq!(label_default(&p, "a", 0), Ok(1));
    }

    #[test]
    fn label_requires_full_horizon() {
        let p = panel_from("a", &[0; 9]);
        assert_eq!(label_default(&p, "a", 1), Ok(0));
        assert!(matches!(label_default(&p, "a", 2), Err(Error::MissingHorizon { .. })));
        assert!(label_default(&p, "b", 0).is_err());
        // A gap inside the window also leaves the label undefined.
        let mut recs: Vec<_> = (0..9).map(|t| record("c", t, 0)).collect();
        recs.remove(4);
        let gap = Panel::from_records(recs);
        assert!(label_default(&gap, "c", 0).is_err());
        assert!(gap.labels().is_empty());
    }

    #[test]
    fn transition_toy_sequence() {
        let labels = [("a", 0, 0), ("a", 1, 1), ("a", 2, 1), ("a", 3, 0)];
        let m = transition_matrix(&labels).unwrap();
        assert_eq!(m.n_pairs, 3);
        assert_eq!(m.p[0], Some([0.0, 1.0]));
        assert_eq!(m.p[1], Some([0.5, 0.5]));
        assert_eq!(m.default_freq, 0.5);
    }

    #[test]
    fn transition_degenerate_single_state() {
        let labels = [("a", 0, 0), ("a", 1, 0), ("b", 5, 0), ("b", 6, 0)];
        let m = transition_matrix(&labels).unwrap();
        assert_eq!(m.p[0], Some([1.0, 0.0]));
        assert_eq!(m.p[1], None);
        assert_eq!(m.default_freq, 0.0);
        assert_eq!(transition_matrix(&[]), Err(Error::EmptyInput));
        assert_eq!(transition_matrix(&[("a", 0, 1)]), Err(Error::EmptyInput));
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut bad = record("a", 0, 2);
        bad.credit_score = Some(900);
        bad.true_pd = Some(1.5);
        bad.zip = "123".into();
        let dup = record("a", 0, 0);
        let v = validate_records(&[bad, dup]);
        let kinds: Vec<_> = v.iter().map(|v| (v.row, v.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (0, ViolationKind::ScoreOutOfRange),
                (0, ViolationKind::InvalidDState),
                (0, ViolationKind::TruePdOutOfRange),
                (0, ViolationKind::InvalidZip),
                (1, ViolationKind::DuplicateKey),
            ]
        );
    }

    #[test]
    fn canonical_order_and_lookup() {
        let p = Panel::from_records(vec![record("b", 1, 0), record("a", 2, 0), record("b", 0, 1)]);
        let keys: Vec<_> = p
            .records()
            .iter()
            .map(|r| (r.consumer_id.as_str(), r.quarter))
            .collect();
        assert_eq!(keys, vec![("a", 2), ("b", 0), ("b", 1)]);
        assert_eq!(p.get("b", 0).unwrap().d_state, 1);
        assert!(p.get("c", 0).is_none());
        assert_eq!(p.consumers().count(), 2);
        assert_eq!(p.quarter_range(), Some((0, 2)));
        assert_eq!(quarter_label(0, 2006), "2006Q1");
        assert_eq!(quarter_label(41, 2006), "2016Q2");
    }
}
