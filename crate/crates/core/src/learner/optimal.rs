//! Local-search coordinate descent over tree structure.
//!
//! Each restart starts from some tree and sweeps over its nodes in random
//! order. At a leaf the only move is to expand it with its best split; at a
//! branch the moves are to collapse its subtree into a leaf, or to swap its
//! split for the best `(feature, threshold)` while keeping both child
//! subtrees as they are. Moves are scored exactly, with every affected leaf
//! re-solved for its best treatment, and accepted only when they strictly
//! lower the penalized objective. A restart ends after a sweep with no
//! accepted move; the best tree over all restarts is returned.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::greedy::grow_greedy;
use super::split::{best_column, SplitSearch};
use super::state::{Ctx, Kind, SearchTree};
use super::{check_problem, improves};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Matrix, PolicyTree, RewardMatrix};
use crate::rng;

const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// The greedy tree under the same hyperparameters (always restart 0).
    Greedy,
    /// Greedy tree grown to the depth limit without the complexity charge.
    GreedyFull,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub init: InitKind,
    /// Penalized objective after initialization and after each accepted move.
    pub trajectory: Vec<f64>,
    pub sweeps: usize,
}

impl RestartTrace {
    pub fn final_objective(&self) -> f64 {
        *self.trajectory.last().expect("trajectory starts with the initial objective")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub restarts: Vec<RestartTrace>,
    pub best_restart: usize,
}

pub fn fit_optimal(rewards: &RewardMatrix, features: &Matrix, hp: &Hyperparameters) -> Result<PolicyTree> {
    fit_optimal_with_report(rewards, features, hp).map(|(tree, _)| tree)
}

pub fn fit_optimal_with_report(
    rewards: &RewardMatrix,
    features: &Matrix,
    hp: &Hyperparameters,
) -> Result<(PolicyTree, FitReport)> {
    check_problem(rewards, features, hp)?;
    let ctx = Ctx {
        rewards,
        features,
        hp,
    };
    let n = ctx.n() as f64;

    if hp.max_depth == 0 {
        let tree = SearchTree::single_leaf(ctx, (0..ctx.n()).collect());
        let trace = RestartTrace {
            restart: 0,
            init: InitKind::Greedy,
            trajectory: vec![tree.penalized(ctx) / n],
            sweeps: 0,
        };
        let report = FitReport {
            restarts: vec![trace],
            best_restart: 0,
        };
        return Ok((tree.to_policy_tree(ctx)?, report));
    }

    let greedy = grow_greedy(ctx, ctx.branch_cost());
    let greedy_full = grow_greedy(ctx, 0.0);

    let results: Vec<Result<(SearchTree, RestartTrace)>> = (0..hp.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(hp.seed, r as u64);
            let (init, start) = if r == 0 {
                (InitKind::Greedy, greedy.clone())
            } else if rng.random_bool(0.5) {
                (InitKind::GreedyFull, greedy_full.clone())
            } else {
                (InitKind::Random, random_tree(ctx, &mut rng))
            };
            descend(ctx, start, r, init, &mut rng)
        })
        .collect();

    let mut best: Option<(SearchTree, f64, usize)> = None;
    let mut traces = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        let (tree, trace) = res?;
        let obj = tree.penalized(ctx);
        if best.as_ref().is_none_or(|b| improves(obj, b.1)) {
            best = Some((tree, obj, r));
        }
        traces.push(trace);
    }
    let (tree, _, best_restart) = best.expect("at least one restart");
    Ok((
        tree.to_policy_tree(ctx)?,
        FitReport {
            restarts: traces,
            best_restart,
        },
    ))
}

fn descend<R: Rng>(
    ctx: Ctx<'_>,
    mut tree: SearchTree,
    restart: usize,
    init: InitKind,
    rng: &mut R,
) -> Result<(SearchTree, RestartTrace)> {
    let n = ctx.n() as f64;
    let mut search = SplitSearch::new(ctx.rewards, ctx.features, ctx.hp.min_leaf);
    let mut objective = tree.penalized(ctx);
    let mut trajectory = vec![objective / n];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut ids = tree.live_ids();
        ids.shuffle(rng);
        let mut changed = false;
        for k in ids {
            if !tree.is_alive(k) {
                continue;
            }
            if let Some((next, next_obj)) = try_move(ctx, &tree, k, &mut search, objective) {
                if next_obj > objective {
                    return Err(Error::Internal("accepted move increased the objective".into()));
                }
                tree = next;
                objective = next_obj;
                trajectory.push(objective / n);
                changed = true;
                if cfg!(debug_assertions) {
                    tree.check_consistency(ctx)?;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok((
        tree,
        RestartTrace {
            restart,
            init,
            trajectory,
            sweeps,
        },
    ))
}

/// Best strictly improving move at node `k`, returned as the modified tree
/// and its exact penalized objective.
fn try_move(
    ctx: Ctx<'_>,
    tree: &SearchTree,
    k: usize,
    search: &mut SplitSearch<'_>,
    objective: f64,
) -> Option<(SearchTree, f64)> {
    let node = tree.node(k);
    let branch_cost = ctx.branch_cost();
    let min_leaf = ctx.hp.min_leaf;
    match node.kind {
        Kind::Leaf { cost, .. } => {
            if node.depth >= ctx.hp.max_depth || node.rows.len() < 2 * min_leaf {
                return None;
            }
            let cand = search.best_stump(&node.rows)?;
            if !improves(cand.cost + branch_cost, cost) {
                return None;
            }
            let mut next = tree.clone();
            next.expand(ctx, k, cand.feature, cand.threshold);
            accept(ctx, next, k, objective)
        }
        Kind::Branch { left, right, .. } => {
            let (sub_cost, sub_branches) = tree.subtree_cost(k);
            let current = sub_cost + branch_cost * sub_branches as f64;
            let collapsed = best_column(&ctx.rewards.column_sums(&node.rows)).1;

            let left_leaves = tree.subtree_leaves(left);
            let right_leaves = tree.subtree_leaves(right);
            let mut local = vec![u32::MAX; tree.nodes.len()];
            for (j, &leaf) in left_leaves.iter().chain(&right_leaves).enumerate() {
                local[leaf] = j as u32;
            }
            let (to_left, to_right): (Vec<u32>, Vec<u32>) = node
                .rows
                .iter()
                .map(|&i| {
                    let x = ctx.features.row(i);
                    (local[tree.route_from(left, x)], local[tree.route_from(right, x)])
                })
                .unzip();
            let replaced = search
                .best_split(
                    &node.rows,
                    &to_left,
                    &to_right,
                    left_leaves.len() + right_leaves.len(),
                )
                .map(|c| (c, c.cost + branch_cost * sub_branches as f64));

            let replace_wins = replaced.is_some_and(|(_, v)| v < collapsed);
            let best_value = if replace_wins {
                replaced.map(|(_, v)| v).unwrap_or(collapsed)
            } else {
                collapsed
            };
            if !improves(best_value, current) {
                return None;
            }
            let mut next = tree.clone();
            match replaced {
                Some((cand, _)) if replace_wins => {
                    next.replace_split(ctx, k, cand.feature, cand.threshold)
                }
                _ => next.collapse(ctx, k),
            }
            accept(ctx, next, k, objective)
        }
    }
}

fn accept(ctx: Ctx<'_>, next: SearchTree, k: usize, objective: f64) -> Option<(SearchTree, f64)> {
    if !next.leaves_satisfy_min(k, ctx.hp.min_leaf) {
        return None;
    }
    let value = next.penalized(ctx);
    improves(value, objective).then_some((next, value))
}

/// Random tree of depth at most `max_depth` built from valid splits.
pub(crate) fn random_tree<R: Rng>(ctx: Ctx<'_>, rng: &mut R) -> SearchTree {
    let target = rng.random_range(1..=ctx.hp.max_depth);
    let mut tree = SearchTree::single_leaf(ctx, (0..ctx.n()).collect());
    let mut frontier = vec![0usize];
    while let Some(k) = frontier.pop() {
        let node = tree.node(k);
        if node.depth >= target || (node.depth > 0 && !rng.random_bool(0.7)) {
            continue;
        }
        if let Some((f, thr)) = random_split(ctx, &node.rows, rng) {
            tree.expand(ctx, k, f, thr);
            if let Kind::Branch { left, right, .. } = tree.node(k).kind {
                frontier.push(left);
                frontier.push(right);
            }
        }
    }
    tree
}

fn random_split<R: Rng>(ctx: Ctx<'_>, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
    let min_leaf = ctx.hp.min_leaf;
    if rows.len() < 2 * min_leaf {
        return None;
    }
    let mut features: Vec<usize> = (0..ctx.features.cols()).collect();
    features.shuffle(rng);
    let mut values = Vec::with_capacity(rows.len());
    for f in features {
        values.clear();
        values.extend(rows.iter().map(|&i| ctx.features.get(i, f)));
        values.sort_unstable_by(f64::total_cmp);
        let m = values.len();
        let thresholds: Vec<f64> = (0..m - 1)
            .filter(|&s| values[s] < values[s + 1] && s + 1 >= min_leaf && m - s - 1 >= min_leaf)
            .map(|s| 0.5 * (values[s] + values[s + 1]))
            .collect();
        if !thresholds.is_empty() {
            return Some((f, thresholds[rng.random_range(0..thresholds.len())]));
        }
    }
    None
}
