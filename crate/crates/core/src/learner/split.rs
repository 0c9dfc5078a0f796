//! Threshold sweeps shared by the greedy and local-search learners.
//!
//! A sweep sorts a node's rows along one feature and moves them one at a
//! time from the right side of the split to the left. Each side may be a
//! whole subtree: every row carries the leaf it would reach on either side,
//! so only the two affected leaves change per step and the objective of
//! every threshold is available in O(T).

use crate::model::{Matrix, RewardMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Sum over the affected leaves of their best column sums.
    pub cost: f64,
}

/// Minimum of `sums` and its first argmin.
#[inline]
pub(crate) fn best_column(sums: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (t, &s) in sums.iter().enumerate().skip(1) {
        if s < sums[best] {
            best = t;
        }
    }
    (best, sums[best])
}

pub(crate) struct SplitSearch<'a> {
    rewards: &'a RewardMatrix,
    features: &'a Matrix,
    min_leaf: usize,
    n_t: usize,
    order: Vec<(f64, u32)>,
    sums: Vec<f64>,
    counts: Vec<usize>,
    mins: Vec<f64>,
}

impl<'a> SplitSearch<'a> {
    pub fn new(rewards: &'a RewardMatrix, features: &'a Matrix, min_leaf: usize) -> Self {
        SplitSearch {
            rewards,
            features,
            min_leaf: min_leaf.max(1),
            n_t: rewards.n_candidates(),
            order: Vec::new(),
            sums: Vec::new(),
            counts: Vec::new(),
            mins: Vec::new(),
        }
    }

    /// Best split of `rows` into two fresh leaves.
    pub fn best_stump(&mut self, rows: &[usize]) -> Option<SplitCandidate> {
        let left = vec![0u32; rows.len()];
        let right = vec![1u32; rows.len()];
        self.best_split(rows, &left, &right, 2)
    }

    /// Best `(feature, threshold)` for a node whose children are fixed
    /// subtrees. `left_leaf[j]` / `right_leaf[j]` give the local leaf id row
    /// `rows[j]` reaches when sent left / right; ids lie in `0..n_leaves`.
    /// Candidates leaving any leaf below `min_leaf` rows are skipped. Ties
    /// keep the first candidate in (feature, threshold) order.
    pub fn best_split(
        &mut self,
        rows: &[usize],
        left_leaf: &[u32],
        right_leaf: &[u32],
        n_leaves: usize,
    ) -> Option<SplitCandidate> {
        let m = rows.len();
        if m < 2 {
            return None;
        }
        let t = self.n_t;
        let mut best: Option<SplitCandidate> = None;
        for f in 0..self.features.cols() {
            self.order.clear();
            self.order
                .extend((0..m).map(|j| (self.features.get(rows[j], f), j as u32)));
            self.order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.order[0].0 == self.order[m - 1].0 {
                continue;
            }

            self.sums.clear();
            self.sums.resize(n_leaves * t, 0.0);
            self.counts.clear();
            self.counts.resize(n_leaves, 0);
            for j in 0..m {
                let l = right_leaf[j] as usize;
                add_row(&mut self.sums[l * t..(l + 1) * t], self.rewards.row(rows[j]), 1.0);
                self.counts[l] += 1;
            }
            self.mins.clear();
            self.mins
                .extend((0..n_leaves).map(|l| best_column(&self.sums[l * t..(l + 1) * t]).1));
            let mut total: f64 = self.mins.iter().sum();
            let mut short = self.counts.iter().filter(|&&c| c < self.min_leaf).count();

            for s in 0..m - 1 {
                let (value, j) = self.order[s];
                let j = j as usize;
                let reward = self.rewards.row(rows[j]);
                let from = right_leaf[j] as usize;
                let to = left_leaf[j] as usize;

                if self.counts[from] == self.min_leaf {
                    short += 1;
                }
                self.counts[from] -= 1;
                add_row(&mut self.sums[from * t..(from + 1) * t], reward, -1.0);
                let new_from = best_column(&self.sums[from * t..(from + 1) * t]).1;
                total += new_from - self.mins[from];
                self.mins[from] = new_from;

                self.counts[to] += 1;
                if self.counts[to] == self.min_leaf {
                    short -= 1;
                }
                add_row(&mut self.sums[to * t..(to + 1) * t], reward, 1.0);
                let new_to = best_column(&self.sums[to * t..(to + 1) * t]).1;
                total += new_to - self.mins[to];
                self.mins[to] = new_to;

                let next = self.order[s + 1].0;
                if short > 0 || value >= next {
                    continue;
                }
                if best.is_none_or(|b| total < b.cost) {
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold: 0.5 * (value + next),
                        cost: total,
                    });
                }
            }
        }
        best
    }
}

#[inline]
fn add_row(dst: &mut [f64], src: &[f64], sign: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += sign * s;
    }
}
