//! Gradient-boosted regression trees on the logistic loss.
//!
//! Each round fits a depth-limited tree to the loss gradients by exact greedy
//! search over sorted unique feature values, sets every leaf to the Newton
//! step `-G / (H + lambda)`, and adds the tree with shrinkage `nu` and a step
//! length `gamma` in (0, 1] that is halved until the training loss does not
//! increase.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_xy, open_unit, sigmoid, FeatureMatrix, Predict};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Shrinkage factor nu in (0, 1].
    pub shrinkage: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum number of samples in each child of a split.
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 200,
            max_depth: 3,
            shrinkage: 0.1,
            lambda: 1.0,
            min_leaf: 20,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad("gbt shrinkage must lie in (0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("gbt lambda must be positive");
        }
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return bad("gbt n_trees, max_depth and min_leaf must be positive");
        }
        if self.max_depth > 16 {
            return bad("gbt max_depth above 16 is not supported");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![TreeNode::Leaf { value }],
            max_depth: 0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks the structural invariants: two in-range children per split,
    /// depth within `max_depth`, finite leaves, every node reachable once.
    pub fn is_well_formed(&self) -> bool {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            if i >= n || seen[i] || depth > self.max_depth {
                return false;
            }
            seen[i] = true;
            match self.nodes[i] {
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return false;
                    }
                }
                TreeNode::Split {
                    left, right, threshold, ..
                } => {
                    if !threshold.is_finite() {
                        return false;
                    }
                    stack.push((left as usize, depth + 1));
                    stack.push((right as usize, depth + 1));
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Initial log-odds.
    pub base_score: f64,
    pub shrinkage: f64,
    pub lambda: f64,
    pub trees: Vec<RegressionTree>,
    /// Step length gamma of each tree.
    pub step_lengths: Vec<f64>,
    /// Training log-loss before the first tree and after each tree.
    pub loss_trace: Vec<f64>,
    /// Set when the labels had a single class and no tree was fitted.
    pub degenerate: bool,
}

impl GbtModel {
    /// Prediction in log-odds space.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let mut f = self.base_score;
        for (t, g) in self.trees.iter().zip(&self.step_lengths) {
            f += self.shrinkage * g * t.predict(x);
        }
        f
    }
}

impl Predict for GbtModel {
    fn predict(&self, x: &[f64]) -> f64 {
        open_unit(sigmoid(self.raw_score(x)))
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn mean_loss(f: &[f64], y: &[u8]) -> f64 {
    // log(1 + e^f) - y f, evaluated stably
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&f, &y)| {
            let softplus = if f > 0.0 {
                f + (-f).exp().ln_1p()
            } else {
                f.exp().ln_1p()
            };
            softplus - f64::from(y) * f
        })
        .sum();
    total / f.len() as f64
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: u32,
    threshold: f64,
}

struct Frontier {
    node: usize,
    grad: f64,
    hess: f64,
    count: usize,
}

const NOT_ACTIVE: u32 = u32::MAX;

struct Grower<'a> {
    x: &'a FeatureMatrix,
    presorted: &'a [Vec<(f64, u32)>],
    cfg: &'a GbtConfig,
}

impl Grower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    /// Grows one tree; `node_of` ends holding each sample's leaf.
    fn grow(&self, grad: &[f64], hess: &[f64], node_of: &mut [u32]) -> RegressionTree {
        let n = grad.len();
        node_of.fill(0);
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut frontier = vec![Frontier {
            node: 0,
            grad: grad.iter().sum(),
            hess: hess.iter().sum(),
            count: n,
        }];
        let mut slot_of_node: Vec<u32> = vec![0];
        let mut depth = 0;
        while depth < self.cfg.max_depth && !frontier.is_empty() {
            let k = frontier.len();
            let mut best: Vec<Option<Best>> = vec![None; k];
            let mut gl = vec![0.0; k];
            let mut hl = vec![0.0; k];
            let mut cl = vec![0usize; k];
            let mut last = vec![0.0f64; k];
            for (f, column) in self.presorted.iter().enumerate() {
                gl.fill(0.0);
                hl.fill(0.0);
                cl.fill(0);
                for &(v, i) in column {
                    let s = slot_of_node[node_of[i as usize] as usize];
                    if s == NOT_ACTIVE {
                        continue;
                    }
                    let s = s as usize;
                    let fr = &frontier[s];
                    if cl[s] >= self.cfg.min_leaf && fr.count - cl[s] >= self.cfg.min_leaf && v != last[s] {
                        let gain = 0.5
                            * (self.score(gl[s], hl[s]) + self.score(fr.grad - gl[s], fr.hess - hl[s])
                                - self.score(fr.grad, fr.hess));
                        if gain > best[s].map_or(0.0, |b| b.gain) {
                            best[s] = Some(Best {
                                gain,
                                feature: f as u32,
                                threshold: last[s],
                            });
                        }
                    }
                    gl[s] += grad[i as usize];
                    hl[s] += hess[i as usize];
                    cl[s] += 1;
                    last[s] = v;
                }
            }

            // Materialize splits; nodes without one become final leaves.
            let mut child_of: Vec<Option<(Best, u32, u32)>> = vec![None; k];
            for (s, fr) in frontier.iter().enumerate() {
                match best[s] {
                    Some(b) => {
                        let left = nodes.len() as u32;
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes[fr.node] = TreeNode::Split {
                            feature: b.feature,
                            threshold: b.threshold,
                            left,
                            right: left + 1,
                        };
                        child_of[s] = Some((b, left, left + 1));
                    }
                    None => {
                        nodes[fr.node] = TreeNode::Leaf {
                            value: self.leaf_value(fr.grad, fr.hess),
                        };
                    }
                }
            }
            slot_of_node.resize(nodes.len(), NOT_ACTIVE);
            let mut next: Vec<Frontier> = Vec::new();
            let mut next_slot = vec![NOT_ACTIVE; nodes.len()];
            for (_, l, r) in child_of.iter().flatten() {
                for c in [*l, *r] {
                    next_slot[c as usize] = next.len() as u32;
                    next.push(Frontier {
                        node: c as usize,
                        grad: 0.0,
                        hess: 0.0,
                        count: 0,
                    });
                }
            }
            for i in 0..n {
                let s = slot_of_node[node_of[i] as usize];
                if s == NOT_ACTIVE {
                    continue;
                }
                if let Some((b, l, r)) = child_of[s as usize] {
                    let c = if self.x.get(i, b.feature as usize) <= b.threshold {
                        l
                    } else {
                        r
                    };
                    node_of[i] = c;
                    let fr = &mut next[next_slot[c as usize] as usize];
                    fr.grad += grad[i];
                    fr.hess += hess[i];
                    fr.count += 1;
                }
            }
            frontier = next;
            slot_of_node = next_slot;
            depth += 1;
        }
        for fr in &frontier {
            nodes[fr.node] = TreeNode::Leaf {
                value: self.leaf_value(fr.grad, fr.hess),
            };
        }
        RegressionTree {
            nodes,
            max_depth: self.cfg.max_depth,
        }
    }
}

/// Fits a boosted-tree classifier. Single-class labels yield a constant
/// model with `degenerate` set instead of an error.
pub fn fit_gbt(x: &FeatureMatrix, y: &[u8], cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    check_xy(x, y)?;
    let n = y.len();
    let positives = y.iter().filter(|&&v| v == 1).count();
    let mean = positives as f64 / n as f64;
    let base_score = logit(mean.clamp(1e-6, 1.0 - 1e-6));
    let mut f = vec![base_score; n];
    let mut model = GbtModel {
        base_score,
        shrinkage: cfg.shrinkage,
        lambda: cfg.lambda,
        trees: Vec::new(),
        step_lengths: Vec::new(),
        loss_trace: vec![mean_loss(&f, y)],
        degenerate: positives == 0 || positives == n,
    };
    if model.degenerate {
        return Ok(model);
    }

    let presorted: Vec<Vec<(f64, u32)>> = (0..x.cols())
        .map(|j| {
            let mut col: Vec<(f64, u32)> = (0..n).map(|i| (x.get(i, j), i as u32)).collect();
            col.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features").then(a.1.cmp(&b.1)));
            col
        })
        .collect();
    let grower = Grower {
        x,
        presorted: &presorted,
        cfg,
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut node_of = vec![0u32; n];
    let mut trial = vec![0.0; n];
    let mut loss = model.loss_trace[0];
    for _ in 0..cfg.n_trees {
        for i in 0..n {
            let p = sigmoid(f[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let tree = grower.grow(&grad, &hess, &mut node_of);
        let leaf_out: Vec<f64> = node_of
            .iter()
            .map(|&leaf| match tree.nodes[leaf as usize] {
                TreeNode::Leaf { value } => value,
                TreeNode::Split { .. } => unreachable!("samples end in leaves"),
            })
            .collect();
        let mut gamma = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = f[i] + cfg.shrinkage * gamma * leaf_out[i];
            }
            let l = mean_loss(&trial, y);
            if l <= loss {
                accepted = Some(l);
                break;
            }
            gamma *= 0.5;
        }
        // No descent left at any step length: boosting has converged.
        let Some(new_loss) = accepted else { break };
        core::mem::swap(&mut f, &mut trial);
        loss = new_loss;
        model.trees.push(tree);
        model.step_lengths.push(gamma);
        model.loss_trace.push(loss);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn depth_one_separable_reaches_full_accuracy() {
        // Hand enumeration: thresholds between 5 and 6 is the only split
        // with pure children, so it has the largest gain.
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 5.0)).collect();
        let cfg = GbtConfig {
            n_trees: 1,
            max_depth: 1,
            shrinkage: 1.0,
            lambda: 1.0,
            min_leaf: 1,
        };
        let m = fit_gbt(&one_d(&xs), &y, &cfg).unwrap();
        assert_eq!(m.trees.len(), 1);
        match m.trees[0].nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 5.0);
            }
            _ => panic!("expected a split"),
        }
        let acc = xs
            .iter()
            .zip(&y)
            .filter(|(x, &y)| u8::from(m.predict(&[**x]) >= 0.5) == y)
            .count();
        assert_eq!(acc, 10);
    }

    #[test]
    fn zero_shrinkage_rejected() {
        let cfg = GbtConfig {
            shrinkage: 0.0,
            ..GbtConfig::default()
        };
        assert!(matches!(
            fit_gbt(&one_d(&[1.0, 2.0]), &[0, 1], &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_class_gives_constant_model() {
        let m = fit_gbt(&one_d(&[1.0, 2.0, 3.0]), &[0, 0, 0], &GbtConfig::default()).unwrap();
        assert!(m.degenerate);
        assert!(m.trees.is_empty());
        assert_eq!(m.base_score, logit(1e-6));
        let p = m.predict(&[2.0]);
        assert!((p - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn ties_pick_lowest_feature_then_threshold() {
        // Two identical columns: the split must use feature 0.
        let xs = [1.0, 2.0, 3.0, 4.0];
        let data: Vec<f64> = xs.iter().flat_map(|&v| [v, v]).collect();
        let x = FeatureMatrix::new(4, 2, data).unwrap();
        let cfg = GbtConfig {
            n_trees: 1,
            max_depth: 1,
            shrinkage: 1.0,
            lambda: 1.0,
            min_leaf: 1,
        };
        let m = fit_gbt(&x, &[0, 0, 1, 1], &cfg).unwrap();
        assert!(matches!(m.trees[0].nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn trees_are_well_formed_and_loss_non_increasing() {
        let n = 300;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a = ((i * 37) % 101) as f64 / 101.0;
            let b = ((i * 53) % 97) as f64 / 97.0;
            data.extend_from_slice(&[a, b, a * b]);
            y.push(u8::from(a + 0.5 * b + 0.1 * (((i * 7) % 11) as f64 / 11.0) > 0.8));
        }
        let x = FeatureMatrix::new(n, 3, data).unwrap();
        let cfg = GbtConfig {
            n_trees: 40,
            min_leaf: 5,
            ..GbtConfig::default()
        };
        let m = fit_gbt(&x, &y, &cfg).unwrap();
        for t in &m.trees {
            assert!(t.is_well_formed());
            assert!(t.depth() <= 3);
        }
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let p = m.predict_rows(&x);
        assert!((super::super::log_loss(&p, &y) - m.loss_trace.last().unwrap()).abs() < 1e-9);
    }
}
