//! CART regression trees (variance reduction) and the bagged forest.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dataset, ForestConfig};
use crate::error::{Error, Result};

/// Tree node; nodes are stored in preorder, so a split's left child always
/// directly follows it.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Impurity-based importance; sums to 1 when any split exists.
    pub feature_importance: Vec<f64>,
}

impl ForestModel {
    /// Grows `cfg.n_trees` trees in parallel. Each tree gets its own seed
    /// drawn from a ChaCha8 stream on `cfg.seed`, so the result does not
    /// depend on thread count or scheduling.
    pub fn train(data: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidData("empty training set".into()));
        }
        if data.n_features() == 0 {
            return Err(Error::InvalidData("training rows have no features".into()));
        }
        let mut root = ChaCha8Rng::seed_from_u64(cfg.seed);
        let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| root.next_u64()).collect();
        let grown: Vec<(Tree, Vec<f64>)> = seeds
            .par_iter()
            .map(|&s| grow_tree(data, cfg, s))
            .collect();

        let n_features = data.n_features();
        let mut importance = vec![0.0; n_features];
        let mut contributing = 0usize;
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, decrease) in grown {
            let total: f64 = decrease.iter().sum();
            if tree.nodes.len() > 1 && total > 0.0 {
                contributing += 1;
                for (acc, d) in importance.iter_mut().zip(&decrease) {
                    *acc += d / total;
                }
            }
            trees.push(tree);
        }
        if contributing > 0 {
            let sum: f64 = importance.iter().sum();
            importance.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(ForestModel {
            n_features,
            trees,
            feature_importance: importance,
        })
    }

    /// Mean of the per-tree leaf values.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::InvalidData(format!(
                "feature vector has width {}, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        // Averaged around the first tree's value and clamped, so agreeing
        // trees give back their common value exactly.
        let p0 = self.trees[0].predict(x);
        let (mut lo, mut hi, mut shifted) = (p0, p0, 0.0);
        for t in &self.trees[1..] {
            let p = t.predict(x);
            lo = lo.min(p);
            hi = hi.max(p);
            shifted += p - p0;
        }
        Ok((p0 + shifted / self.trees.len() as f64).clamp(lo, hi))
    }

    /// Applies `f` to every leaf value.
    pub fn map_leaves(&self, f: impl Fn(f64) -> f64) -> ForestModel {
        let mut m = self.clone();
        for node in m.trees.iter_mut().flat_map(|t| t.nodes.iter_mut()) {
            if let Node::Leaf { value } = node {
                *value = f(*value);
            }
        }
        m
    }

    /// Feature indices sorted by importance, largest first (ties by index).
    pub fn importance_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_features).collect();
        idx.sort_by(|&a, &b| {
            self.feature_importance[b]
                .total_cmp(&self.feature_importance[a])
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Mean of `y[i]` over `idx`, computed around the first value and clamped to
/// the observed range so that constant targets come back exactly.
fn leaf_value(data: &Dataset, idx: &[usize]) -> f64 {
    let y = data.targets();
    let y0 = y[idx[0]];
    let (mut lo, mut hi, mut shifted) = (y0, y0, 0.0);
    for &i in idx {
        lo = lo.min(y[i]);
        hi = hi.max(y[i]);
        shifted += y[i] - y0;
    }
    (y0 + shifted / idx.len() as f64).clamp(lo, hi)
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// Reduction in the sum of squared errors.
    gain: f64,
}

/// Best split on `feature` for the samples in `idx`, or `None` when the
/// feature is constant there (`Some(None)` = non-constant but no split
/// satisfies the leaf-size limit).
fn best_split_on(
    data: &Dataset,
    idx: &[usize],
    feature: usize,
    min_leaf: usize,
    y0: f64,
    scratch: &mut Vec<(f64, f64)>,
) -> Option<Option<SplitChoice>> {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| (data.value(i, feature), data.targets()[i] - y0)));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    if scratch[0].0 == scratch[n - 1].0 {
        return None;
    }
    let total: f64 = scratch.iter().map(|p| p.1).sum();
    let parent = total * total / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut left_sum = 0.0;
    for i in 1..n {
        left_sum += scratch[i - 1].1;
        if scratch[i - 1].0 == scratch[i].0 || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let proxy = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
        let gain = (proxy - parent).max(0.0);
        if best.as_ref().map_or(true, |b| gain > b.gain) {
            let (a, b) = (scratch[i - 1].0, scratch[i].0);
            let mut threshold = a / 2.0 + b / 2.0;
            if threshold >= b || threshold < a {
                threshold = a;
            }
            best = Some(SplitChoice {
                feature,
                threshold,
                gain,
            });
        }
    }
    Some(best)
}

/// Grows one tree; returns it with the per-feature SSE decrease.
fn grow_tree(data: &Dataset, cfg: &ForestConfig, seed: u64) -> (Tree, Vec<f64>) {
    let n = data.len();
    let n_features = data.n_features();
    let m = cfg.max_features(n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // u32 draws keep the stream identical on 32- and 64-bit targets.
    let mut samples: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n as u32) as usize).collect()
    } else {
        (0..n).collect()
    };
    let mut decrease = vec![0.0; n_features];
    let mut nodes: Vec<Node> = Vec::new();
    let mut features: Vec<usize> = (0..n_features).collect();
    let mut scratch = Vec::with_capacity(n);
    // (start, end, parent slot to patch, is right child)
    let mut stack: Vec<(usize, usize, Option<(usize, bool)>)> = vec![(0, n, None)];

    while let Some((start, end, parent)) = stack.pop() {
        let me = nodes.len();
        if let Some((p, is_right)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                *if is_right { right } else { left } = me;
            }
        }
        let idx = &samples[start..end];
        let y = data.targets();
        let y0 = y[idx[0]];
        let pure = idx.iter().all(|&i| y[i] == y0);
        let mut choice: Option<SplitChoice> = None;
        if !pure && idx.len() >= 2 * cfg.min_samples_leaf {
            let mut visited = 0;
            let mut j = 0;
            while j < n_features && visited < m {
                let r = rng.gen_range(j as u32..n_features as u32) as usize;
                features.swap(j, r);
                let f = features[j];
                j += 1;
                let Some(found) = best_split_on(data, idx, f, cfg.min_samples_leaf, y0, &mut scratch)
                else {
                    continue;
                };
                visited += 1;
                if let Some(c) = found {
                    if choice.as_ref().map_or(true, |b| c.gain > b.gain) {
                        choice = Some(c);
                    }
                }
            }
        }
        match choice {
            None => nodes.push(Node::Leaf {
                value: leaf_value(data, idx),
            }),
            Some(c) => {
                decrease[c.feature] += c.gain;
                let slice = &mut samples[start..end];
                let mut mid = 0;
                for k in 0..slice.len() {
                    if data.value(slice[k], c.feature) <= c.threshold {
                        slice.swap(k, mid);
                        mid += 1;
                    }
                }
                nodes.push(Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push((start + mid, end, Some((me, true))));
                stack.push((start, start + mid, Some((me, false))));
            }
        }
    }
    (Tree { nodes }, decrease)
}
