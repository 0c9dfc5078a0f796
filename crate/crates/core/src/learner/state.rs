//! Mutable tree used during search: every node keeps the training rows
//! that reach it and every leaf caches its best treatment and cost.

use super::split::best_column;
use crate::error::{Error, Result};
use crate::model::{default_feature_names, Hyperparameters, Matrix, Node, PolicyTree, RewardMatrix};

#[derive(Debug, Clone)]
pub(crate) enum Kind {
    Leaf {
        treatment: usize,
        /// Sum of the leaf's rewards under `treatment`.
        cost: f64,
    },
    Branch {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct SNode {
    pub kind: Kind,
    pub depth: usize,
    pub rows: Vec<usize>,
}

/// Arena of search nodes; removed nodes become `None`.
#[derive(Debug, Clone)]
pub(crate) struct SearchTree {
    pub nodes: Vec<Option<SNode>>,
}

#[derive(Clone, Copy)]
pub(crate) struct Ctx<'a> {
    pub rewards: &'a RewardMatrix,
    pub features: &'a Matrix,
    pub hp: &'a Hyperparameters,
}

impl Ctx<'_> {
    pub fn n(&self) -> usize {
        self.rewards.n_rows()
    }

    /// Complexity charge per branch in sum-of-rewards units.
    pub fn branch_cost(&self) -> f64 {
        self.hp.alpha * self.n() as f64
    }

    pub fn leaf_kind(&self, rows: &[usize]) -> Kind {
        let (treatment, cost) = best_column(&self.rewards.column_sums(rows));
        Kind::Leaf { treatment, cost }
    }
}

impl SearchTree {
    pub fn single_leaf(ctx: Ctx<'_>, rows: Vec<usize>) -> Self {
        SearchTree {
            nodes: vec![Some(SNode {
                kind: ctx.leaf_kind(&rows),
                depth: 0,
                rows,
            })],
        }
    }

    #[inline]
    pub fn node(&self, k: usize) -> &SNode {
        self.nodes[k].as_ref().expect("live node")
    }

    #[inline]
    fn node_mut(&mut self, k: usize) -> &mut SNode {
        self.nodes[k].as_mut().expect("live node")
    }

    pub fn is_alive(&self, k: usize) -> bool {
        self.nodes.get(k).is_some_and(Option::is_some)
    }

    pub fn live_ids(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.is_alive(k)).collect()
    }

    /// Leaf reached by `x` when starting at node `k`.
    #[inline]
    pub fn route_from(&self, mut k: usize, x: &[f64]) -> usize {
        while let Kind::Branch {
            feature,
            threshold,
            left,
            right,
        } = self.node(k).kind
        {
            k = if x[feature] < threshold { left } else { right };
        }
        k
    }

    pub fn subtree_ids(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![k];
        while let Some(j) = stack.pop() {
            out.push(j);
            if let Kind::Branch { left, right, .. } = self.node(j).kind {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn subtree_leaves(&self, k: usize) -> Vec<usize> {
        self.subtree_ids(k)
            .into_iter()
            .filter(|&j| matches!(self.node(j).kind, Kind::Leaf { .. }))
            .collect()
    }

    /// (sum of leaf costs, number of branches) below and including `k`.
    pub fn subtree_cost(&self, k: usize) -> (f64, usize) {
        let mut cost = 0.0;
        let mut branches = 0;
        for j in self.subtree_ids(k) {
            match self.node(j).kind {
                Kind::Leaf { cost: c, .. } => cost += c,
                Kind::Branch { .. } => branches += 1,
            }
        }
        (cost, branches)
    }

    /// Penalized objective in sum units.
    pub fn penalized(&self, ctx: Ctx<'_>) -> f64 {
        let (cost, branches) = self.subtree_cost(0);
        cost + ctx.branch_cost() * branches as f64
    }

    fn remove_subtree(&mut self, k: usize) {
        for j in self.subtree_ids(k) {
            self.nodes[j] = None;
        }
    }

    /// Replaces everything below `k` with a single leaf.
    pub fn collapse(&mut self, ctx: Ctx<'_>, k: usize) {
        if let Kind::Branch { left, right, .. } = self.node(k).kind {
            self.remove_subtree(left);
            self.remove_subtree(right);
        }
        let kind = ctx.leaf_kind(&self.node(k).rows);
        self.node_mut(k).kind = kind;
    }

    /// Turns leaf `k` into a branch with two fresh leaves.
    pub fn expand(&mut self, ctx: Ctx<'_>, k: usize, feature: usize, threshold: f64) {
        let depth = self.node(k).depth;
        let rows = std::mem::take(&mut self.node_mut(k).rows);
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| ctx.features.get(i, feature) < threshold);
        let left = self.nodes.len();
        let right = left + 1;
        for child_rows in [l_rows, r_rows] {
            self.nodes.push(Some(SNode {
                kind: ctx.leaf_kind(&child_rows),
                depth: depth + 1,
                rows: child_rows,
            }));
        }
        let node = self.node_mut(k);
        node.rows = rows;
        node.kind = Kind::Branch {
            feature,
            threshold,
            left,
            right,
        };
    }

    /// Changes the split at branch `k` and re-routes its rows through the
    /// unchanged subtrees, re-solving every leaf.
    pub fn replace_split(&mut self, ctx: Ctx<'_>, k: usize, feature: usize, threshold: f64) {
        if let Kind::Branch {
            feature: f,
            threshold: t,
            ..
        } = &mut self.node_mut(k).kind
        {
            *f = feature;
            *t = threshold;
        }
        self.redistribute(ctx, k);
    }

    /// Pushes node `k`'s rows down its subtree and refreshes leaf caches.
    pub fn redistribute(&mut self, ctx: Ctx<'_>, k: usize) {
        let (feature, threshold, left, right) = match self.node(k).kind {
            Kind::Branch {
                feature,
                threshold,
                left,
                right,
            } => (feature, threshold, left, right),
            Kind::Leaf { .. } => {
                let kind = ctx.leaf_kind(&self.node(k).rows);
                self.node_mut(k).kind = kind;
                return;
            }
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = self
            .node(k)
            .rows
            .iter()
            .partition(|&&i| ctx.features.get(i, feature) < threshold);
        self.node_mut(left).rows = l_rows;
        self.node_mut(right).rows = r_rows;
        self.redistribute(ctx, left);
        self.redistribute(ctx, right);
    }

    /// True when every leaf below `k` holds at least `min_leaf` rows.
    pub fn leaves_satisfy_min(&self, k: usize, min_leaf: usize) -> bool {
        self.subtree_leaves(k)
            .into_iter()
            .all(|j| self.node(j).rows.len() >= min_leaf)
    }

    /// Recomputes every cache from scratch and compares.
    pub fn check_consistency(&self, ctx: Ctx<'_>) -> Result<()> {
        let mut seen = vec![false; ctx.n()];
        for j in self.subtree_leaves(0) {
            let node = self.node(j);
            for &i in &node.rows {
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Internal(format!("row {i} reaches two leaves")));
                }
                if self.route_from(0, ctx.features.row(i)) != j {
                    return Err(Error::Internal(format!("row {i} cached in the wrong leaf")));
                }
            }
            let Kind::Leaf { treatment, cost } = node.kind else {
                unreachable!()
            };
            let (t, c) = best_column(&ctx.rewards.column_sums(&node.rows));
            let tol = 1e-9 * (1.0 + c.abs());
            if t != treatment && (c - cost).abs() > tol {
                return Err(Error::Internal(format!("leaf {j} caches treatment {treatment}, best is {t}")));
            }
            if (c - cost).abs() > tol {
                return Err(Error::Internal(format!("leaf {j} caches cost {cost}, actual {c}")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Internal(format!("row {i} reaches no leaf")));
        }
        Ok(())
    }

    /// Compacts into a validated [`PolicyTree`] in pre-order.
    pub fn to_policy_tree(&self, ctx: Ctx<'_>) -> Result<PolicyTree> {
        let mut nodes = Vec::new();
        self.emit(0, &mut nodes);
        let (cost, _) = self.subtree_cost(0);
        PolicyTree::from_nodes(
            nodes,
            default_feature_names(ctx.features.cols()),
            ctx.rewards.labels().to_vec(),
            *ctx.hp,
            cost / ctx.n() as f64,
        )
        .map_err(|e| Error::Internal(format!("search produced an invalid tree: {e}")))
    }

    fn emit(&self, k: usize, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        let node = self.node(k);
        match node.kind {
            Kind::Leaf { treatment, .. } => out.push(Node::Leaf {
                treatment,
                n_train: node.rows.len(),
            }),
            Kind::Branch {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(Node::Leaf {
                    treatment: 0,
                    n_train: 0,
                });
                let l = self.emit(left, out);
                let r = self.emit(right, out);
                out[id] = Node::Branch {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        id
    }
}
