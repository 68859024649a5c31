//! Least squares with absorbed fixed effects and cluster-robust covariance.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{chol_inverse, chol_solve, cholesky};
use crate::{Error, Result};

/// Named numeric and categorical columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    n: usize,
    numeric: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Vec<u32>>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Frame { n, ..Frame::default() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got });
        }
        Ok(())
    }

    pub fn push_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.check_len(values.len())?;
        self.numeric.insert(name.into(), values);
        Ok(())
    }

    pub fn push_categorical(&mut self, name: &str, codes: Vec<u32>) -> Result<()> {
        self.check_len(codes.len())?;
        self.categorical.insert(name.into(), codes);
        Ok(())
    }

    /// Adds a categorical column from arbitrary ordered keys.
    pub fn push_keys<T: Ord>(&mut self, name: &str, keys: &[T]) -> Result<()> {
        self.push_categorical(name, encode_keys(keys))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown numeric column `{name}`")))
    }

    pub fn categorical(&self, name: &str) -> Result<&[u32]> {
        self.categorical
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown categorical column `{name}`")))
    }

    /// A regressor term: a numeric column, or a product `a:b:...`.
    pub fn term(&self, term: &str) -> Result<Vec<f64>> {
        let mut out = vec![1.0; self.n];
        for part in term.split(':') {
            for (o, v) in out.iter_mut().zip(self.numeric(part)?) {
                *o *= v;
            }
        }
        Ok(out)
    }

    /// A grouping key: a categorical column, or the cross `a:b:...`.
    pub fn key(&self, key: &str) -> Result<Vec<u32>> {
        let parts: Vec<&[u32]> = key.split(':').map(|p| self.categorical(p)).collect::<Result<_>>()?;
        if parts.len() == 1 {
            return Ok(parts[0].to_vec());
        }
        let tuples: Vec<Vec<u32>> = (0..self.n).map(|i| parts.iter().map(|p| p[i]).collect()).collect();
        Ok(encode_keys(&tuples))
    }
}

/// Dense codes `0..levels` in key order.
pub fn encode_keys<T: Ord>(keys: &[T]) -> Vec<u32> {
    let mut sorted: Vec<&T> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).expect("key present") as u32)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// Inclusion-exclusion over the two keys.
    #[default]
    TwoWay,
    /// One-way clustering on the cross of the keys.
    Interacted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSpec {
    pub dependent: String,
    /// Numeric columns; `a:b` is the product of `a` and `b`.
    pub regressors: Vec<String>,
    /// Categorical keys to absorb; `a:b` is the cross of `a` and `b`.
    pub fixed_effects: Vec<String>,
    /// Zero, one or two categorical keys.
    pub cluster_keys: Vec<String>,
    pub cluster_mode: ClusterMode,
    pub weights: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    /// Two-sided normal p-value.
    pub p_value: f64,
}

impl Coefficient {
    /// Significance stars at the 10, 5 and 1 percent levels.
    pub fn stars(&self) -> &'static str {
        match self.p_value {
            p if p < 0.01 => "***",
            p if p < 0.05 => "**",
            p if p < 0.1 => "*",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub dependent: String,
    pub coefficients: Vec<Coefficient>,
    /// Row-major covariance of the coefficients.
    pub covariance: Vec<f64>,
    /// Constant term; with absorbed effects, the weighted mean of `y` minus
    /// the slopes times the weighted means of the regressors.
    pub intercept: f64,
    pub r_squared: f64,
    /// R-squared of the demeaned regression (equal to `r_squared` without
    /// fixed effects).
    pub within_r_squared: f64,
    pub n_obs: usize,
    pub dropped_singletons: usize,
    pub n_clusters: Vec<(String, usize)>,
    pub demean_iterations: usize,
    pub demean_converged: bool,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|c| c.estimate)
    }
}

pub const DEMEAN_MAX_ITER: usize = 500;
pub const DEMEAN_TOL: f64 = 1e-10;
const COLLINEAR_TOL: f64 = 1e-10;

/// Drops rows in singleton groups of any key until none remain; returns the
/// surviving row indices.
fn drop_singletons(keys: &[Vec<u32>], mut rows: Vec<usize>) -> Vec<usize> {
    if keys.is_empty() {
        return rows;
    }
    loop {
        let before = rows.len();
        for key in keys {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &rows {
                *counts.entry(key[i]).or_default() += 1;
            }
            rows.retain(|&i| counts[&key[i]] > 1);
        }
        if rows.len() == before {
            return rows;
        }
    }
}

/// Alternating projections: subtracts weighted group means of each key in
/// turn until the remaining distance to the fixed point, extrapolated from
/// the geometric decay of successive sweeps, is below `DEMEAN_TOL` times the
/// column scale. Returns (sweeps, converged).
fn demean(col: &mut [f64], keys: &[(Vec<u32>, usize)], w: &[f64]) -> (usize, bool) {
    let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut last = f64::INFINITY;
    for sweep in 1..=DEMEAN_MAX_ITER {
        let mut moved = 0.0f64;
        for (codes, levels) in keys {
            let mut num = vec![0.0; *levels];
            let mut den = vec![0.0; *levels];
            for ((&g, &v), &wi) in codes.iter().zip(col.iter()).zip(w) {
                num[g as usize] += wi * v;
                den[g as usize] += wi;
            }
            for (&g, v) in codes.iter().zip(col.iter_mut()) {
                let m = num[g as usize] / den[g as usize];
                *v -= m;
                moved = moved.max(m.abs());
            }
        }
        let rate = (moved / last).min(0.999_999);
        last = moved;
        let exact = keys.len() == 1 || moved <= f64::MIN_POSITIVE;
        if exact || (sweep > 1 && moved * rate / (1.0 - rate) <= DEMEAN_TOL * scale) {
            return (sweep, true);
        }
    }
    (DEMEAN_MAX_ITER, false)
}

/// Inputs of a least-squares sandwich: the (demeaned) design, residuals and
/// optional weights. `n_params` is the K of the small-sample factor.
#[derive(Debug, Clone, Copy)]
pub struct OlsDesign<'a> {
    /// `n x k` row-major.
    pub x: &'a [f64],
    pub k: usize,
    pub resid: &'a [f64],
    pub weights: Option<&'a [f64]>,
    pub n_params: usize,
}

impl OlsDesign<'_> {
    fn n(&self) -> usize {
        self.resid.len()
    }

    fn w(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn bread(&self) -> Result<Vec<f64>> {
        let k = self.k;
        let mut xtx = vec![0.0; k * k];
        for i in 0..self.n() {
            let row = &self.x[i * k..(i + 1) * k];
            let w = self.w(i);
            for a in 0..k {
                for b in 0..=a {
                    xtx[a * k + b] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                xtx[b * k + a] = xtx[a * k + b];
            }
        }
        let l = cholesky(&xtx, k, COLLINEAR_TOL).map_err(|j| Error::CollinearRegressors(format!("column {j}")))?;
        Ok(chol_inverse(&l, k))
    }

    /// One-way cluster-robust covariance and the number of clusters.
    fn one_way(&self, bread: &[f64], codes: &[u32]) -> Result<(Vec<f64>, usize)> {
        let k = self.k;
        let dense = encode_keys(codes);
        let g = dense.iter().max().map_or(0, |m| *m as usize + 1);
        if g < 2 {
            return Err(Error::TooFewClusters {
                key: String::new(),
                clusters: g,
            });
        }
        let mut scores = vec![0.0; g * k];
        for i in 0..self.n() {
            let c = dense[i] as usize;
            let s = self.w(i) * self.resid[i];
            for a in 0..k {
                scores[c * k + a] += s * self.x[i * k + a];
            }
        }
        let mut meat = vec![0.0; k * k];
        for c in 0..g {
            let s = &scores[c * k..(c + 1) * k];
            for a in 0..k {
                for b in 0..k {
                    meat[a * k + b] += s[a] * s[b];
                }
            }
        }
        let n = self.n() as f64;
        let factor = g as f64 / (g as f64 - 1.0) * (n - 1.0) / (n - self.n_params as f64);
        let mut v = sandwich(bread, &meat, k);
        v.iter_mut().for_each(|x| *x *= factor);
        Ok((v, g))
    }
}

fn sandwich(bread: &[f64], meat: &[f64], k: usize) -> Vec<f64> {
    let mut bm = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            bm[a * k + b] = (0..k).map(|c| bread[a * k + c] * meat[c * k + b]).sum();
        }
    }
    let mut v = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            v[a * k + b] = (0..k).map(|c| bm[a * k + c] * bread[c * k + b]).sum();
        }
    }
    v
}

/// Covariance of least-squares coefficients clustered on one or two keys
/// (classical homoskedastic covariance when `clusters` is empty).
///
/// One-way: `c * B M B` with `B = (X'WX)^-1`, `M` the sum over clusters of
/// outer products of the summed scores `w_i e_i x_i`, and
/// `c = G/(G-1) * (N-1)/(N-K)`. Two keys in `TwoWay` mode combine as
/// `V1 + V2 - V12` (each with its own `G`); a non-positive diagonal entry is
/// replaced by the larger one-way variance.
pub fn clustered_covariance(
    design: &OlsDesign,
    clusters: &[&[u32]],
    mode: ClusterMode,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = design.n();
    if design.x.len() != n * design.k {
        return Err(Error::LengthMismatch {
            expected: n * design.k,
            got: design.x.len(),
        });
    }
    if n <= design.n_params {
        return Err(Error::InvalidConfig("fewer observations than parameters".into()));
    }
    let bread = design.bread()?;
    match clusters {
        [] => {
            let ssr: f64 = (0..n).map(|i| design.w(i) * design.resid[i] * design.resid[i]).sum();
            let sigma2 = ssr / (n - design.n_params) as f64;
            Ok((bread.iter().map(|b| b * sigma2).collect(), Vec::new()))
        }
        [one] => {
            let (v, g) = design.one_way(&bread, one)?;
            Ok((v, vec![g]))
        }
        [a, b] => {
            let both: Vec<(u32, u32)> = a.iter().zip(b.iter()).map(|(&x, &y)| (x, y)).collect();
            let cross = encode_keys(&both);
            if mode == ClusterMode::Interacted {
                let (v, g) = design.one_way(&bread, &cross)?;
                return Ok((v, vec![g]));
            }
            let (v1, g1) = design.one_way(&bread, a)?;
            let (v2, g2) = design.one_way(&bread, b)?;
            let (v12, _) = design.one_way(&bread, &cross)?;
            let k = design.k;
            let mut v: Vec<f64> = (0..k * k).map(|i| v1[i] + v2[i] - v12[i]).collect();
            for j in 0..k {
                if v[j * k + j] <= 0.0 {
                    v[j * k + j] = v1[j * k + j].max(v2[j * k + j]);
                }
            }
            Ok((v, vec![g1, g2]))
        }
        _ => Err(Error::InvalidConfig("at most two cluster keys".into())),
    }
}

/// Weighted least squares of `spec.dependent` on `spec.regressors` with the
/// fixed effects absorbed by iterated within-demeaning.
///
/// Rows with non-finite values are dropped, then singleton groups of every
/// fixed-effect key are dropped repeatedly. Without fixed effects a
/// constant `_cons` is estimated as the last coefficient. The small-sample
/// K counts the slopes plus the constant; absorbed effects are treated as
/// nested within clusters.
pub fn fit_fe_ols(frame: &Frame, spec: &RegressionSpec) -> Result<RegressionResult> {
    let y_all = frame.numeric(&spec.dependent)?;
    let x_all: Vec<Vec<f64>> = spec.regressors.iter().map(|r| frame.term(r)).collect::<Result<_>>()?;
    let fe_all: Vec<Vec<u32>> = spec.fixed_effects.iter().map(|k| frame.key(k)).collect::<Result<_>>()?;
    let cl_all: Vec<Vec<u32>> = spec.cluster_keys.iter().map(|k| frame.key(k)).collect::<Result<_>>()?;
    let w_all: Option<&[f64]> = spec.weights.as_deref().map(|w| frame.numeric(w)).transpose()?;
    if spec.cluster_keys.len() > 2 {
        return Err(Error::InvalidConfig("at most two cluster keys".into()));
    }

    let finite: Vec<usize> = (0..frame.len())
        .filter(|&i| {
            y_all[i].is_finite()
                && x_all.iter().all(|c| c[i].is_finite())
                && w_all.is_none_or(|w| w[i].is_finite() && w[i] > 0.0)
        })
        .collect();
    let rows = drop_singletons(&fe_all, finite.clone());
    let dropped_singletons = finite.len() - rows.len();
    if rows.is_empty() {
        return Err(Error::EmptyAfterDrops);
    }
    let n = rows.len();
    let w: Vec<f64> = rows.iter().map(|&i| w_all.map_or(1.0, |w| w[i])).collect();
    let w_total: f64 = w.iter().sum();
    let y: Vec<f64> = rows.iter().map(|&i| y_all[i]).collect();
    let mut cols: Vec<Vec<f64>> = x_all.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect();
    let mut names: Vec<String> = spec.regressors.clone();
    let wmean = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w_total;
    let y_mean = wmean(&y);
    let x_means: Vec<f64> = cols.iter().map(|c| wmean(c)).collect();

    let absorbed = !fe_all.is_empty();
    let mut y_dm = y.clone();
    let (mut iterations, mut converged) = (0, true);
    if absorbed {
        let keys: Vec<(Vec<u32>, usize)> = fe_all
            .iter()
            .map(|k| {
                let codes = encode_keys(&rows.iter().map(|&i| k[i]).collect::<Vec<_>>());
                let levels = codes.iter().max().map_or(0, |m| *m as usize + 1);
                (codes, levels)
            })
            .collect();
        for col in core::iter::once(&mut y_dm).chain(cols.iter_mut()) {
            let (it, ok) = demean(col, &keys, &w);
            iterations = iterations.max(it);
            converged &= ok;
        }
    } else {
        cols.push(vec![1.0; n]);
        names.push("_cons".into());
    }
    // With absorbed effects and no regressors only the constant remains.
    let k = cols.len();
    let n_params = if absorbed { k + 1 } else { k };
    if n <= n_params {
        return Err(Error::InvalidConfig(format!(
            "{n} observations for {n_params} parameters"
        )));
    }

    let mut x = vec![0.0; n * k];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            x[i * k + j] = c[i];
        }
    }
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        let row = &x[i * k..(i + 1) * k];
        for a in 0..k {
            xty[a] += w[i] * row[a] * y_dm[i];
            for b in 0..=a {
                xtx[a * k + b] += w[i] * row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[b * k + a] = xtx[a * k + b];
        }
    }
    let l = cholesky(&xtx, k, COLLINEAR_TOL).map_err(|j| Error::CollinearRegressors(names[j].clone()))?;
    let beta = chol_solve(&l, k, &xty);
    let resid: Vec<f64> = (0..n)
        .map(|i| y_dm[i] - (0..k).map(|j| x[i * k + j] * beta[j]).sum::<f64>())
        .collect();

    let ssr: f64 = resid.iter().zip(&w).map(|(e, w)| w * e * e).sum();
    let tss: f64 = y.iter().zip(&w).map(|(v, w)| w * (v - y_mean) * (v - y_mean)).sum();
    let within_tss: f64 = if absorbed {
        y_dm.iter().zip(&w).map(|(v, w)| w * v * v).sum()
    } else {
        tss
    };
    let r2 = |total: f64| {
        if total > 0.0 {
            (1.0 - ssr / total).clamp(0.0, 1.0)
        } else {
            1.0
        }
    };

    let design = OlsDesign {
        x: &x,
        k,
        resid: &resid,
        weights: w_all.map(|_| w.as_slice()),
        n_params,
    };
    let cluster_rows: Vec<Vec<u32>> = cl_all.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect();
    let cluster_refs: Vec<&[u32]> = cluster_rows.iter().map(Vec::as_slice).collect();
    let (covariance, counts) =
        clustered_covariance(&design, &cluster_refs, spec.cluster_mode).map_err(|e| match e {
            Error::TooFewClusters { clusters, .. } => Error::TooFewClusters {
                key: spec.cluster_keys.join(","),
                clusters,
            },
            e => e,
        })?;
    let n_clusters =
        if spec.cluster_mode == ClusterMode::Interacted && counts.len() == 1 && spec.cluster_keys.len() == 2 {
            vec![(spec.cluster_keys.join(":"), counts[0])]
        } else {
            spec.cluster_keys.iter().cloned().zip(counts).collect()
        };

    let coefficients: Vec<Coefficient> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = covariance[j * k + j].max(0.0).sqrt();
            let t = beta[j] / se;
            Coefficient {
                name: name.to_string(),
                estimate: beta[j],
                std_error: se,
                t_stat: t,
                p_value: libm::erfc(t.abs() / core::f64::consts::SQRT_2),
            }
        })
        .collect();
    let intercept = if absorbed {
        y_mean - x_means.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>()
    } else {
        beta[k - 1]
    };
    Ok(RegressionResult {
        dependent: spec.dependent.clone(),
        coefficients,
        covariance,
        intercept,
        r_squared: r2(tss),
        within_r_squared: r2(within_tss),
        n_obs: n,
        dropped_singletons,
        n_clusters,
        demean_iterations: iterations,
        demean_converged: converged,
    })
}
