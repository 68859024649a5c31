//! Ranking and calibration metrics.
//!
//! All rank statistics run in O(n log n) and count ties the Mann-Whitney way
//! (one half per tied pair).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One scored observation: a model probability, its realized label and,
/// when available, the consumer's credit score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub consumer_id: String,
    pub quarter: i32,
    pub p_hat: f64,
    pub label: u8,
    pub credit_score: Option<u16>,
}

/// Predictions for one or more evaluation quarters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn new(rows: Vec<PredictionRow>) -> Result<Self> {
        for r in &rows {
            if !(r.p_hat.is_finite() && (0.0..=1.0).contains(&r.p_hat)) {
                return Err(Error::OutOfRange(alloc::format!("p_hat {}", r.p_hat)));
            }
            if r.label > 1 {
                return Err(Error::OutOfRange(alloc::format!("label {}", r.label)));
            }
        }
        Ok(PredictionSet { rows })
    }

    pub fn quarters(&self) -> Vec<i32> {
        let mut q: Vec<i32> = self.rows.iter().map(|r| r.quarter).collect();
        q.sort_unstable();
        q.dedup();
        q
    }

    pub fn quarter(&self, quarter: i32) -> Vec<&PredictionRow> {
        self.rows.iter().filter(|r| r.quarter == quarter).collect()
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| v.is_nan()) {
        Some(_) => Err(Error::OutOfRange("NaN in metric input".into())),
        None => Ok(()),
    }
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("NaN filtered before sorting")
}

/// Indices that sort `values` ascending; ties keep input order.
fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| cmp_f64(&values[i], &values[j]));
    idx
}

/// Area under the ROC curve of `scores` (higher = more likely positive).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    weighted_auc(scores, labels, None)
}

/// Mann-Whitney AUC with optional per-observation weights:
/// `sum w_i w_j [s_i > s_j] + 0.5 [s_i = s_j]` over positive `i`, negative
/// `j`, divided by the product of the class weight totals.
pub fn weighted_auc(scores: &[f64], labels: &[u8], weights: Option<&[f64]>) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != scores.len() {
            return Err(Error::LengthMismatch {
                expected: scores.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::OutOfRange("weights must be finite and >= 0".into()));
        }
    }
    check_finite(scores)?;
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let order = argsort(scores);
    let (mut neg_below, mut numerator) = (0.0, 0.0);
    let (mut total_pos, mut total_neg) = (0.0, 0.0);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (mut pos, mut neg) = (0.0, 0.0);
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            let i = order[end];
            if labels[i] != 0 {
                pos += weight(i);
            } else {
                neg += weight(i);
            }
            end += 1;
        }
        numerator += pos * (neg_below + 0.5 * neg);
        neg_below += neg;
        total_pos += pos;
        total_neg += neg;
        start = end;
    }
    if total_pos <= 0.0 || total_neg <= 0.0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(numerator / (total_pos * total_neg))
}

/// Gini coefficient, `2 * AUC - 1`.
pub fn gini(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(2.0 * auc(scores, labels)? - 1.0)
}

/// One-based ranks with ties replaced by their average rank.
pub fn midranks(values: &[f64]) -> Result<Vec<f64>> {
    check_finite(values)?;
    let order = argsort(values);
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    Ok(ranks)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput);
    }
    pearson(&midranks(a)?, &midranks(b)?)
}

/// Number of tied pairs among runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    if !sorted.is_empty() {
        total += run * (run - 1) / 2;
    }
    total
}

/// Sorts `v` ascending and returns the number of inversions removed.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]);
    swaps += merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b, computed with Knight's merge-sort algorithm.
pub fn kendall(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput);
    }
    check_finite(a)?;
    check_finite(b)?;
    let n = a.len() as u64;
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| cmp_f64(&x.0, &y.0).then(cmp_f64(&x.1, &y.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ties_a = tied_pairs(&xs);
    let ties_joint = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let ties_b = tied_pairs(&ys);
    let total = n * (n - 1) / 2;
    let concordant_minus_discordant =
        total as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    let denom = ((total - ties_a) as f64 * (total - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((concordant_minus_discordant / denom).clamp(-1.0, 1.0))
}

/// Sort direction for percentile rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Smallest value gets the lowest percentile.
    Ascending,
    /// Largest value gets the lowest percentile.
    Descending,
}

/// Equal-frequency percentile ranking of one quarter's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileRanking {
    /// Integer bin 1..=100 per row.
    pub bins: Vec<u8>,
    /// Continuous percentile `100 * midrank / n` per row, in (0, 100].
    pub percentiles: Vec<f64>,
}

/// Splits the sorted values into 100 equal-frequency bins. Rows sharing a
/// value take the bin and percentile of the group's mid-rank.
///
/// The model ranking uses `Descending` on `p_hat` (equivalently ascending on
/// `1 - p_hat`), so that percentile 1 holds the riskiest consumers; the score
/// ranking uses `Ascending` on the credit score.
pub fn percentile_rank(values: &[f64], direction: Direction) -> Result<PercentileRanking> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_finite(values)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let o = cmp_f64(&values[i], &values[j]);
        match direction {
            Direction::Ascending => o,
            Direction::Descending => o.reverse(),
        }
    });
    let mut bins = vec![0u8; n];
    let mut percentiles = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Zero-based mid position of the tie group.
        let mid = (start + end - 1) as f64 / 2.0;
        let bin = ((mid * 100.0 / n as f64).floor() as usize + 1).min(100) as u8;
        let pct = 100.0 * (mid + 1.0) / n as f64;
        for &i in &order[start..end] {
            bins[i] = bin;
            percentiles[i] = pct;
        }
        start = end;
    }
    Ok(PercentileRanking { bins, percentiles })
}

/// Realized and predicted default rates of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow<K> {
    pub group: K,
    pub n: usize,
    pub realized_rate: f64,
    pub mean_p_hat: f64,
}

/// Per-group realized default frequency and mean predicted probability.
/// Rows for which `group_of` returns `None` are skipped.
pub fn calibration_table<'a, K, I, F>(rows: I, group_of: F) -> Vec<CalibrationRow<K>>
where
    K: Ord + Clone,
    I: IntoIterator<Item = &'a PredictionRow>,
    F: Fn(&PredictionRow) -> Option<K>,
{
    let mut acc: BTreeMap<K, (usize, f64, f64)> = BTreeMap::new();
    for r in rows {
        if let Some(k) = group_of(r) {
            let e = acc.entry(k).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += f64::from(r.label);
            e.2 += r.p_hat;
        }
    }
    acc.into_iter()
        .map(|(group, (n, y, p))| CalibrationRow {
            group,
            n,
            realized_rate: y / n as f64,
            mean_p_hat: p / n as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_perfect_and_ties() {
        let y = [0, 1, 0, 1, 1];
        let p: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        assert_eq!(auc(&p, &y), Ok(1.0));
        assert_eq!(auc(&[0.3; 5], &y), Ok(0.5));
        assert_eq!(gini(&[0.3; 5], &y), Ok(0.0));
        assert_eq!(gini(&p, &y), Ok(1.0));
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::DegenerateLabels));
    }

    #[test]
    fn auc_eight_point_mixed_list() {
        let s = [0.9, 0.2, 0.4, 0.4, 0.7, 0.1, 0.7, 0.55];
        let y = [1, 0, 1, 0, 0, 0, 1, 1];
        // 16 pos/neg pairs, counted by hand: 12 wins, 2 ties (0.4/0.4, 0.7/0.7).
        assert_eq!(brute_auc(&s, &y), 13.0 / 16.0);
        assert_eq!(auc(&s, &y).unwrap(), 13.0 / 16.0);
    }

    #[test]
    fn weighted_auc_unit_weights_is_plain_auc() {
        let s = [0.9, 0.2, 0.4, 0.4, 0.7, 0.1, 0.7, 0.55];
        let y = [1, 0, 1, 0, 0, 0, 1, 1];
        let w = [1.0; 8];
        assert_eq!(weighted_auc(&s, &y, Some(&w)), auc(&s, &y));
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-15);
        // One tie: ranks of b are (1, 2.5, 2.5, 4, 5, 6).
        let x = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
        let b = [1.0, 3.0, 3.0, 2.0, 5.0, 6.0];
        let rb = midranks(&b).unwrap();
        assert_eq!(rb, vec![1.0, 3.5, 3.5, 2.0, 5.0, 6.0]);
        // Hand computation: centered ranks of x: -2.5..2.5; of b: -2.5,0,0,-1.5,1.5,2.5
        // sum xy = 6.25 + 0 + 0 - 0.75 + 2.25 + 6.25 = 14.0 ; sxx = 17.5 ; syy = 6.25+2.25+2.25+6.25 = 17.0
        let expected = 14.0 / (17.5_f64.sqrt() * 17.0_f64.sqrt());
        assert!((spearman(&x, &b).unwrap() - expected).abs() < 1e-14);
        assert_eq!(spearman(&a, &[1.0; 5]), Err(Error::ZeroVariance));
    }

    #[test]
    fn kendall_examples() {
        let a = [1.0, 2.0, 3.0];
        assert!((kendall(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let t = kendall(&a, &[3.0, 1.0, 2.0]).unwrap();
        assert!((t + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn percentile_equal_frequency() {
        let v: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let r = percentile_rank(&v, Direction::Ascending).unwrap();
        for bin in 1..=100u8 {
            assert_eq!(r.bins.iter().filter(|&&b| b == bin).count(), 2);
        }
        assert_eq!(r.bins[0], 1);
        assert_eq!(r.bins[199], 100);
        let same = percentile_rank(&[4.2; 1000], Direction::Ascending).unwrap();
        assert!(same.bins.iter().all(|&b| b == 50));
        let desc = percentile_rank(&[0.9, 0.1, 0.5], Direction::Descending).unwrap();
        assert_eq!(desc.bins, vec![1, 67, 34]);
        assert_eq!(percentile_rank(&[], Direction::Ascending), Err(Error::EmptyInput));
    }

    #[test]
    fn calibration_single_and_two_groups() {
        let row = |p: f64, y: u8, s: u16| PredictionRow {
            consumer_id: "x".into(),
            quarter: 0,
            p_hat: p,
            label: y,
            credit_score: Some(s),
        };
        let rows: Vec<_> = (0..10).map(|i| row(0.3, u8::from(i < 3), 700)).collect();
        let t = calibration_table(&rows, |_| Some(()));
        assert_eq!(t.len(), 1);
        assert!((t[0].realized_rate - 0.3).abs() < 1e-15);
        assert!((t[0].mean_p_hat - 0.3).abs() < 1e-15);

        let rows = vec![
            row(0.2, 0, 550),
            row(0.6, 1, 550),
            row(0.1, 0, 720),
            row(0.3, 1, 720),
            row(0.2, 0, 720),
        ];
        let t = calibration_table(&rows, |r| Some(r.credit_score.unwrap() >= 600));
        // false group: 1 default of 2, mean p 0.4; true group: 1 of 3, mean p 0.2
        assert!(!t[0].group);
        assert_eq!((t[0].n, t[0].realized_rate), (2, 0.5));
        assert!((t[0].mean_p_hat - 0.4).abs() < 1e-15);
        assert_eq!(t[1].n, 3);
        assert!((t[1].realized_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!((t[1].mean_p_hat - 0.2).abs() < 1e-15);
    }
}
