//! Exact search over all trees of depth at most two.
//!
//! Subtrees below a split are independent, so enumerating every root split
//! and solving each child exactly is the same as enumerating every tree.
//! The bottom level scores each threshold from prefix sums; nothing here
//! shares code with the local-search sweeps it is used to check.

use super::state::{Ctx, SearchTree};
use super::{check_problem, improves};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Matrix, PolicyTree, RewardMatrix};

/// Largest number of root split candidates the exact search accepts.
pub const MAX_EXHAUSTIVE_CANDIDATES: usize = 10_000;

enum Sub {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Sub>,
        right: Box<Sub>,
    },
}

pub fn fit_exhaustive(rewards: &RewardMatrix, features: &Matrix, hp: &Hyperparameters) -> Result<PolicyTree> {
    check_problem(rewards, features, hp)?;
    if hp.max_depth > 2 {
        return Err(Error::TooLarge(format!(
            "exhaustive search supports max_depth <= 2, got {}",
            hp.max_depth
        )));
    }
    let candidates: usize = (0..features.cols())
        .map(|f| {
            let mut v = features.column(f);
            v.sort_unstable_by(f64::total_cmp);
            v.dedup();
            v.len() - 1
        })
        .sum();
    if candidates > MAX_EXHAUSTIVE_CANDIDATES {
        return Err(Error::TooLarge(format!(
            "{candidates} split candidates exceed the limit of {MAX_EXHAUSTIVE_CANDIDATES}"
        )));
    }
    let ctx = Ctx {
        rewards,
        features,
        hp,
    };
    let rows: Vec<usize> = (0..ctx.n()).collect();
    let (_, sub) = solve(ctx, &rows, 0);
    let mut tree = SearchTree::single_leaf(ctx, rows);
    build(ctx, &mut tree, 0, &sub);
    tree.to_policy_tree(ctx)
}

fn build(ctx: Ctx<'_>, tree: &mut SearchTree, k: usize, sub: &Sub) {
    if let Sub::Split {
        feature,
        threshold,
        left,
        right,
    } = sub
    {
        tree.expand(ctx, k, *feature, *threshold);
        if let super::state::Kind::Branch { left: l, right: r, .. } = tree.node(k).kind {
            build(ctx, tree, l, left);
            build(ctx, tree, r, right);
        }
    }
}

fn leaf_cost(ctx: Ctx<'_>, rows: &[usize]) -> f64 {
    let t = ctx.rewards.n_candidates();
    (0..t)
        .map(|c| rows.iter().map(|&i| ctx.rewards.get(i, c)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Optimal penalized cost (sum units) and structure for `rows` at `depth`.
fn solve(ctx: Ctx<'_>, rows: &[usize], depth: usize) -> (f64, Sub) {
    let mut best = (leaf_cost(ctx, rows), Sub::Leaf);
    let min_leaf = ctx.hp.min_leaf;
    if depth >= ctx.hp.max_depth || rows.len() < 2 * min_leaf {
        return best;
    }
    if depth + 1 == ctx.hp.max_depth {
        if let Some((feature, threshold, cost)) = best_stump(ctx, rows) {
            let total = cost + ctx.branch_cost();
            if improves(total, best.0) {
                best = (
                    total,
                    Sub::Split {
                        feature,
                        threshold,
                        left: Box::new(Sub::Leaf),
                        right: Box::new(Sub::Leaf),
                    },
                );
            }
        }
        return best;
    }
    let m = rows.len();
    for f in 0..ctx.features.cols() {
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| ctx.features.get(a, f).total_cmp(&ctx.features.get(b, f)));
        for s in 0..m - 1 {
            let (v, next) = (ctx.features.get(sorted[s], f), ctx.features.get(sorted[s + 1], f));
            if v >= next || s + 1 < min_leaf || m - s - 1 < min_leaf {
                continue;
            }
            let (lc, ls) = solve(ctx, &sorted[..=s], depth + 1);
            let (rc, rs) = solve(ctx, &sorted[s + 1..], depth + 1);
            let total = lc + rc + ctx.branch_cost();
            if improves(total, best.0) {
                best = (
                    total,
                    Sub::Split {
                        feature: f,
                        threshold: 0.5 * (v + next),
                        left: Box::new(ls),
                        right: Box::new(rs),
                    },
                );
            }
        }
    }
    best
}

/// Best two-leaf split via prefix sums: (feature, threshold, summed leaf cost).
fn best_stump(ctx: Ctx<'_>, rows: &[usize]) -> Option<(usize, f64, f64)> {
    let t = ctx.rewards.n_candidates();
    let m = rows.len();
    let min_leaf = ctx.hp.min_leaf;
    let totals = ctx.rewards.column_sums(rows);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut prefix = vec![0.0; t];
    for f in 0..ctx.features.cols() {
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| ctx.features.get(a, f).total_cmp(&ctx.features.get(b, f)));
        prefix.iter_mut().for_each(|p| *p = 0.0);
        for s in 0..m - 1 {
            for (p, r) in prefix.iter_mut().zip(ctx.rewards.row(sorted[s])) {
                *p += r;
            }
            let (v, next) = (ctx.features.get(sorted[s], f), ctx.features.get(sorted[s + 1], f));
            if v >= next || s + 1 < min_leaf || m - s - 1 < min_leaf {
                continue;
            }
            let left = prefix.iter().copied().fold(f64::INFINITY, f64::min);
            let right = prefix
                .iter()
                .zip(&totals)
                .map(|(p, tot)| tot - p)
                .fold(f64::INFINITY, f64::min);
            let cost = left + right;
            if best.is_none_or(|b| improves(cost, b.2)) {
                best = Some((f, 0.5 * (v + next), cost));
            }
        }
    }
    best
}
