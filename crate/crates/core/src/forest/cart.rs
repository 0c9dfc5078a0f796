//! Single CART tree: variance-reduction splits for regression, Gini for
//! classification, thresholds at midpoints between consecutive distinct
//! values.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::Matrix;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [usize], n_classes: usize },
}

impl Target<'_> {
    fn stride(&self) -> usize {
        match self {
            Target::Regression(_) => 1,
            Target::Classification { n_classes, .. } => *n_classes,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: usize,
}

#[derive(Debug, Clone, Copy)]
enum CartNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Offset into the tree's value store.
    Leaf(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct Cart {
    nodes: Vec<CartNode>,
    values: Vec<f64>,
    stride: usize,
}

impl Cart {
    /// Leaf value slice for `x` (length 1 for regression, K for classification).
    #[inline]
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut k = 0usize;
        loop {
            match self.nodes[k] {
                CartNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if x[feature as usize] < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
                CartNode::Leaf(off) => {
                    let off = off as usize;
                    return &self.values[off..off + self.stride];
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[CartNode], k: usize) -> usize {
            match nodes[k] {
                CartNode::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
                CartNode::Leaf(_) => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn grow<R: Rng>(
    x: &Matrix,
    target: Target<'_>,
    rows: &mut [usize],
    params: GrowParams,
    rng: &mut R,
) -> Cart {
    let mut b = Builder {
        x,
        target,
        params,
        nodes: Vec::new(),
        values: Vec::new(),
        stride: target.stride(),
        scratch: Vec::with_capacity(rows.len()),
        features: (0..x.cols()).collect(),
        counts_left: vec![0.0; target.stride()],
        counts_right: vec![0.0; target.stride()],
    };
    b.build(rows, 0, rng);
    Cart {
        nodes: b.nodes,
        values: b.values,
        stride: b.stride,
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    target: Target<'a>,
    params: GrowParams,
    nodes: Vec<CartNode>,
    values: Vec<f64>,
    stride: usize,
    scratch: Vec<(f64, usize)>,
    features: Vec<usize>,
    counts_left: Vec<f64>,
    counts_right: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn build<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(CartNode::Leaf(0));
        let m = rows.len();
        let can_split = depth < self.params.max_depth
            && m >= 2 * self.params.min_leaf
            && m >= 2
            && !self.is_pure(rows);
        let split = if can_split { self.best_split(rows, rng) } else { None };
        match split {
            Some(s) => {
                let mid = partition(rows, |i| self.x.get(i, s.feature) < s.threshold);
                let (l, r) = rows.split_at_mut(mid);
                let left = self.build(l, depth + 1, rng);
                let right = self.build(r, depth + 1, rng);
                self.nodes[id as usize] = CartNode::Split {
                    feature: s.feature as u32,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
            None => {
                let off = self.values.len() as u32;
                self.push_leaf_value(rows);
                self.nodes[id as usize] = CartNode::Leaf(off);
            }
        }
        id
    }

    fn push_leaf_value(&mut self, rows: &[usize]) {
        let m = rows.len().max(1) as f64;
        match self.target {
            Target::Regression(y) => {
                let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / m;
                self.values.push(mean);
            }
            Target::Classification { labels, n_classes } => {
                let start = self.values.len();
                self.values.resize(start + n_classes, 0.0);
                for &i in rows {
                    self.values[start + labels[i]] += 1.0;
                }
                for v in &mut self.values[start..] {
                    *v /= m;
                }
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.target {
            Target::Regression(y) => {
                let first = y[rows[0]];
                rows.iter().all(|&i| y[i] == first)
            }
            Target::Classification { labels, .. } => {
                let first = labels[rows[0]];
                rows.iter().all(|&i| labels[i] == first)
            }
        }
    }

    /// Scans features in random order until `mtry` non-constant ones have
    /// been examined.
    fn best_split<R: Rng>(&mut self, rows: &[usize], rng: &mut R) -> Option<Split> {
        let mut features = std::mem::take(&mut self.features);
        features.shuffle(rng);
        let parent = self.parent_score(rows);
        let mut best: Option<Split> = None;
        let mut visited = 0;
        for &f in &features {
            if visited >= self.params.mtry {
                break;
            }
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (self.x.get(i, f), i)));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            visited += 1;
            if let Some((threshold, score)) = self.sweep() {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        self.features = features;
        best.filter(|b| b.score > parent + 1e-12 * parent.abs().max(1.0))
    }

    /// Score to maximize for the unsplit node (same units as `sweep`).
    fn parent_score(&self, rows: &[usize]) -> f64 {
        let m = rows.len() as f64;
        match self.target {
            Target::Regression(y) => {
                let s: f64 = rows.iter().map(|&i| y[i]).sum();
                s * s / m
            }
            Target::Classification { labels, n_classes } => {
                let mut c = vec![0.0; n_classes];
                for &i in rows {
                    c[labels[i]] += 1.0;
                }
                c.iter().map(|v| v * v).sum::<f64>() / m
            }
        }
    }

    /// Best midpoint threshold over the sorted scratch buffer.
    fn sweep(&mut self) -> Option<(f64, f64)> {
        let m = self.scratch.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, f64)> = None;
        match self.target {
            Target::Regression(y) => {
                let total: f64 = self.scratch.iter().map(|&(_, i)| y[i]).sum();
                let mut sl = 0.0;
                for j in 0..m - 1 {
                    sl += y[self.scratch[j].1];
                    let nl = j + 1;
                    let nr = m - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let (v, next) = (self.scratch[j].0, self.scratch[j + 1].0);
                    if v >= next {
                        continue;
                    }
                    let sr = total - sl;
                    let score = sl * sl / nl as f64 + sr * sr / nr as f64;
                    if best.is_none_or(|b| score > b.1) {
                        best = Some((0.5 * (v + next), score));
                    }
                }
            }
            Target::Classification { labels, .. } => {
                self.counts_left.iter_mut().for_each(|c| *c = 0.0);
                self.counts_right.iter_mut().for_each(|c| *c = 0.0);
                for &(_, i) in &self.scratch {
                    self.counts_right[labels[i]] += 1.0;
                }
                let mut sq_left = 0.0;
                let mut sq_right: f64 = self.counts_right.iter().map(|c| c * c).sum();
                for j in 0..m - 1 {
                    let c = labels[self.scratch[j].1];
                    sq_left += 2.0 * self.counts_left[c] + 1.0;
                    sq_right -= 2.0 * self.counts_right[c] - 1.0;
                    self.counts_left[c] += 1.0;
                    self.counts_right[c] -= 1.0;
                    let nl = j + 1;
                    let nr = m - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let (v, next) = (self.scratch[j].0, self.scratch[j + 1].0);
                    if v >= next {
                        continue;
                    }
                    let score = sq_left / nl as f64 + sq_right / nr as f64;
                    if best.is_none_or(|b| score > b.1) {
                        best = Some((0.5 * (v + next), score));
                    }
                }
            }
        }
        best
    }
}

/// In-place partition; returns the number of elements satisfying `pred`,
/// which end up at the front.
pub(crate) fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for j in 0..rows.len() {
        if pred(rows[j]) {
            rows.swap(mid, j);
            mid += 1;
        }
    }
    mid
}
