use super::split::SplitSearch;
use super::state::{Ctx, Kind, SearchTree};
use super::{check_problem, improves};
use crate::error::Result;
use crate::model::{Hyperparameters, Matrix, PolicyTree, RewardMatrix};

/// Top-down induction: split each node on the candidate that most reduces
/// the summed leaf costs, while depth allows, both children keep at least
/// `min_leaf` rows, and the reduction exceeds the per-branch charge
/// `alpha` (zero when `alpha` is zero).
pub fn fit_greedy(rewards: &RewardMatrix, features: &Matrix, hp: &Hyperparameters) -> Result<PolicyTree> {
    check_problem(rewards, features, hp)?;
    let ctx = Ctx {
        rewards,
        features,
        hp,
    };
    grow_greedy(ctx, ctx.branch_cost()).to_policy_tree(ctx)
}

/// Greedy tree as a search state. `split_charge` is the cost reduction a
/// split must beat.
pub(crate) fn grow_greedy(ctx: Ctx<'_>, split_charge: f64) -> SearchTree {
    let mut tree = SearchTree::single_leaf(ctx, (0..ctx.n()).collect());
    let mut search = SplitSearch::new(ctx.rewards, ctx.features, ctx.hp.min_leaf);
    let mut frontier = vec![0usize];
    while let Some(k) = frontier.pop() {
        let node = tree.node(k);
        if node.depth >= ctx.hp.max_depth || node.rows.len() < 2 * ctx.hp.min_leaf {
            continue;
        }
        let Kind::Leaf { cost, .. } = node.kind else {
            continue;
        };
        let Some(best) = search.best_stump(&node.rows) else {
            continue;
        };
        if improves(best.cost + split_charge, cost) {
            tree.expand(ctx, k, best.feature, best.threshold);
            if let Kind::Branch { left, right, .. } = tree.node(k).kind {
                frontier.push(right);
                frontier.push(left);
            }
        }
    }
    tree
}
