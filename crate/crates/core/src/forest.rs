//! Random forest of CART classification trees with Gini splits.
//!
//! Thresholds sit at midpoints between consecutive distinct feature values
//! and impurity ties resolve to the lowest feature index, then the lowest
//! threshold, so a fixed seed always grows the same forest.

use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{dim_err, param_err, Error, Result};
use crate::rng::{derive_seed, rng, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_features: None, min_samples_leaf: 1, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

impl TreeNode {
    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<TreeNode>,
}

/// Best split of a node: `(feature, threshold, weighted child impurity)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity: f64,
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    n - sq / n
}

/// Exhaustive scan of midpoint thresholds over `features` (ascending).
/// The returned impurity is `n_l * gini_l + n_r * gini_r`.
pub(crate) fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    features: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    let mut total = vec![0usize; n_classes];
    for &i in idx {
        total[y[i]] += 1;
    }
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = vec![0usize; n_classes];
        for k in 0..n - 1 {
            left[y[order[k]]] += 1;
            let (v, next) = (x[order[k]][f], x[order[k + 1]][f]);
            let n_left = k + 1;
            if v == next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let impurity = gini_sum(&left, n_left) + gini_sum(&right, n - n_left);
            let threshold = v + (next - v) / 2.0;
            let better = match best {
                None => true,
                Some(b) => impurity < b.impurity - 1e-12,
            };
            if better {
                best = Some(SplitChoice { feature: f, threshold, impurity });
            }
        }
    }
    best
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_leaf: usize,
    rng: Rng,
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let mut counts = vec![0.0; self.n_classes];
        for &i in idx {
            counts[self.y[i]] += 1.0;
        }
        let n = idx.len() as f64;
        TreeNode::Leaf { distribution: counts.into_iter().map(|c| c / n).collect() }
    }

    fn grow(&mut self, idx: &[usize]) -> TreeNode {
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) || idx.len() < 2 * self.min_leaf {
            return self.leaf(idx);
        }
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        features.truncate(self.max_features);
        features.sort_unstable();
        let Some(split) = best_split(self.x, self.y, idx, &features, self.n_classes, self.min_leaf) else {
            return self.leaf(idx);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&left)),
            right: Box::new(self.grow(&right)),
        }
    }
}

/// Trains `n_trees` CART trees, each on a bootstrap resample when enabled.
pub fn train_forest(x: &[Vec<f64>], y: &[usize], cfg: &ForestConfig) -> Result<Forest> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(param_err(format!("need >= 2 labelled rows, got {n} rows and {} labels", y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(dim_err("rows must share a non-zero dimension"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forest training data"));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(param_err("training data must contain at least two classes"));
    }
    if cfg.n_trees == 0 || cfg.min_samples_leaf == 0 {
        return Err(param_err("n_trees and min_samples_leaf must be at least 1"));
    }
    let max_features = cfg.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    if max_features == 0 || max_features > d {
        return Err(param_err(format!("max_features must be in 1..={d}, got {max_features}")));
    }

    let grow_tree = |t: usize| -> TreeNode {
        let mut r = rng(derive_seed(cfg.seed, &[t as u64]));
        let idx: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| r.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut grower = Grower { x, y, n_classes, max_features, min_leaf: cfg.min_samples_leaf, rng: r };
        grower.grow(&idx)
    };
    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        (0..cfg.n_trees).into_par_iter().map(grow_tree).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees = (0..cfg.n_trees).map(grow_tree).collect();
    Ok(Forest { n_features: d, n_classes, trees })
}

impl Forest {
    /// Average of the trees' leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(dim_err(format!("forest expects {} features, got {}", self.n_features, x.len())));
        }
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.leaf_distribution(x)) {
                *a += p;
            }
        }
        let t = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        Ok(acc)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(crate::blackbox::argmax(&self.predict_proba(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl BlackBox<[f64; 2]> for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, inputs: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.predict_proba(x)).collect()
    }
}

impl BlackBox<Vec<f64>> for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.predict_proba(x)).collect()
    }
}
