use serde::{Deserialize, Serialize};

use super::{Matrix, RewardMatrix};
use crate::error::{Error, Result};

/// Tree-size controls and search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Maximum depth; 0 means a single leaf.
    pub max_depth: usize,
    /// Complexity penalty charged per branch node, in units of mean reward.
    pub alpha: f64,
    /// Minimum number of training rows in every leaf.
    pub min_leaf: usize,
    /// Number of local-search restarts.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            max_depth: 3,
            alpha: 0.0,
            min_leaf: 1,
            restarts: 100,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left, all others go right.
    Branch {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        treatment: usize,
        n_train: usize,
    },
}

/// One test on the root-to-leaf path of an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub went_left: bool,
}

/// Axis-aligned binary tree whose leaves prescribe treatments.
///
/// Nodes live in an arena rooted at index 0 where every child index is
/// greater than its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTree {
    nodes: Vec<Node>,
    feature_names: Vec<String>,
    treatment_labels: Vec<String>,
    hyperparams: Hyperparameters,
    objective_train: f64,
}

impl PolicyTree {
    /// Validates and wraps an arena of nodes.
    pub fn from_nodes(
        nodes: Vec<Node>,
        feature_names: Vec<String>,
        treatment_labels: Vec<String>,
        hyperparams: Hyperparameters,
        objective_train: f64,
    ) -> Result<Self> {
        let tree = PolicyTree {
            nodes,
            feature_names,
            treatment_labels,
            hyperparams,
            objective_train,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::input("tree has no nodes"));
        }
        if self.treatment_labels.is_empty() {
            return Err(Error::input("tree has no treatment labels"));
        }
        let mut referenced = vec![false; self.nodes.len()];
        for (k, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= self.feature_names.len() {
                        return Err(Error::input(format!(
                            "node {k} splits on feature {feature}, tree has {}",
                            self.feature_names.len()
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::input(format!("node {k} has a non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child <= k || child >= self.nodes.len() {
                            return Err(Error::input(format!(
                                "node {k} has invalid child index {child}"
                            )));
                        }
                        if std::mem::replace(&mut referenced[child], true) {
                            return Err(Error::input(format!(
                                "node {child} has more than one parent"
                            )));
                        }
                    }
                }
                Node::Leaf { treatment, n_train } => {
                    if treatment >= self.treatment_labels.len() {
                        return Err(Error::input(format!(
                            "leaf {k} prescribes treatment {treatment}, tree has {}",
                            self.treatment_labels.len()
                        )));
                    }
                    if n_train < self.hyperparams.min_leaf {
                        return Err(Error::input(format!(
                            "leaf {k} holds {n_train} training rows, below min_leaf {}",
                            self.hyperparams.min_leaf
                        )));
                    }
                }
            }
        }
        if let Some(k) = referenced.iter().skip(1).position(|r| !r) {
            return Err(Error::input(format!("node {} is unreachable", k + 1)));
        }
        if self.depth() > self.hyperparams.max_depth {
            return Err(Error::input(format!(
                "tree depth {} exceeds max_depth {}",
                self.depth(),
                self.hyperparams.max_depth
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn treatment_labels(&self) -> &[String] {
        &self.treatment_labels
    }

    pub fn hyperparams(&self) -> &Hyperparameters {
        &self.hyperparams
    }

    /// Mean training reward of the tree's prescriptions (no complexity term).
    pub fn objective_train(&self) -> f64 {
        self.objective_train
    }

    /// Training objective plus `alpha` per branch node.
    pub fn penalized_objective_train(&self) -> f64 {
        self.objective_train + self.hyperparams.alpha * self.n_branches() as f64
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.treatment_labels.len()
    }

    pub fn n_branches(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Branch { .. }))
            .count()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.len() - self.n_branches()
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| matches!(self.nodes[k], Node::Leaf { .. }))
            .collect()
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for k in 0..self.nodes.len() {
            if let Node::Branch { left, right, .. } = self.nodes[k] {
                depth[left] = depth[k] + 1;
                depth[right] = depth[k] + 1;
                max = max.max(depth[k] + 1);
            }
        }
        max
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(Error::input(format!(
                "{} feature names for a tree over {} features",
                names.len(),
                self.feature_names.len()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_treatment_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.treatment_labels.len() {
            return Err(Error::input(format!(
                "{} treatment labels for a tree over {} treatments",
                labels.len(),
                self.treatment_labels.len()
            )));
        }
        self.treatment_labels = labels;
        Ok(self)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::input(format!(
                "feature vector has {} entries, tree expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value in feature {j}")));
        }
        Ok(())
    }

    /// Index of the leaf that `x` falls into.
    pub fn assign_leaf(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.route(x))
    }

    #[inline]
    pub(crate) fn route(&self, x: &[f64]) -> usize {
        let mut k = 0;
        while let Node::Branch {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[k]
        {
            k = if x[feature] < threshold { left } else { right };
        }
        k
    }

    pub fn prescribe(&self, x: &[f64]) -> Result<usize> {
        let leaf = self.assign_leaf(x)?;
        Ok(self.leaf_treatment(leaf))
    }

    fn leaf_treatment(&self, k: usize) -> usize {
        match self.nodes[k] {
            Node::Leaf { treatment, .. } => treatment,
            Node::Branch { .. } => unreachable!("routing always ends at a leaf"),
        }
    }

    pub fn prescribe_batch(&self, features: &Matrix) -> Result<Vec<usize>> {
        if features.cols() != self.n_features() {
            return Err(Error::input(format!(
                "feature matrix has {} columns, tree expects {}",
                features.cols(),
                self.n_features()
            )));
        }
        if let Some((i, j)) = features.first_non_finite() {
            return Err(Error::input(format!("non-finite feature at row {i}, column {j}")));
        }
        Ok(features
            .iter_rows()
            .map(|x| self.leaf_treatment(self.route(x)))
            .collect())
    }

    /// Sequence of split tests applied to `x` from the root to its leaf.
    pub fn path(&self, x: &[f64]) -> Result<Vec<PathStep>> {
        self.check_input(x)?;
        let mut steps = Vec::new();
        let mut k = 0;
        while let Node::Branch {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[k]
        {
            let went_left = x[feature] < threshold;
            steps.push(PathStep {
                feature,
                threshold,
                went_left,
            });
            k = if went_left { left } else { right };
        }
        Ok(steps)
    }

    /// Mean reward of the tree's prescriptions over the given rows.
    pub fn policy_objective(&self, rewards: &RewardMatrix, features: &Matrix) -> Result<f64> {
        if rewards.n_rows() != features.rows() {
            return Err(Error::input(format!(
                "{} reward rows for {} feature rows",
                rewards.n_rows(),
                features.rows()
            )));
        }
        if rewards.n_candidates() != self.n_treatments() {
            return Err(Error::input(format!(
                "reward matrix has {} candidates, tree prescribes among {}",
                rewards.n_candidates(),
                self.n_treatments()
            )));
        }
        let prescriptions = self.prescribe_batch(features)?;
        rewards.mean_of(&prescriptions)
    }

    /// A point routed to leaf `leaf`, built from the thresholds on its path.
    /// Coordinates not tested on the path take `fill`.
    pub fn witness(&self, leaf: usize, fill: f64) -> Option<Vec<f64>> {
        let mut parent = vec![None; self.nodes.len()];
        for (k, node) in self.nodes.iter().enumerate() {
            if let Node::Branch { left, right, .. } = *node {
                parent[left] = Some((k, true));
                parent[right] = Some((k, false));
            }
        }
        if !matches!(self.nodes.get(leaf)?, Node::Leaf { .. }) {
            return None;
        }
        let mut lo = vec![f64::NEG_INFINITY; self.n_features()];
        let mut hi = vec![f64::INFINITY; self.n_features()];
        let mut k = leaf;
        while let Some((p, is_left)) = parent[k] {
            if let Node::Branch {
                feature, threshold, ..
            } = self.nodes[p]
            {
                if is_left {
                    hi[feature] = hi[feature].min(threshold);
                } else {
                    lo[feature] = lo[feature].max(threshold);
                }
            }
            k = p;
        }
        let x = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
                (false, false) => fill,
                (true, false) => l,
                (false, true) => h - 1.0,
                (true, true) => {
                    if l < h {
                        0.5 * (l + h)
                    } else {
                        f64::NAN
                    }
                }
            })
            .collect::<Vec<_>>();
        if x.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some(x)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn hp(depth: usize) -> Hyperparameters {
        Hyperparameters {
            max_depth: depth,
            ..Default::default()
        }
    }

    /// Root splits on x1 < 0; the right child splits on x2 < 1.
    pub(crate) fn two_level() -> PolicyTree {
        let nodes = vec![
            Node::Branch {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            Node::Leaf {
                treatment: 0,
                n_train: 3,
            },
            Node::Branch {
                feature: 1,
                threshold: 1.0,
                left: 3,
                right: 4,
            },
            Node::Leaf {
                treatment: 1,
                n_train: 2,
            },
            Node::Leaf {
                treatment: 2,
                n_train: 1,
            },
        ];
        PolicyTree::from_nodes(
            nodes,
            vec!["x1".into(), "x2".into()],
            vec!["a".into(), "b".into(), "c".into()],
            hp(2),
            0.0,
        )
        .unwrap()
    }

    fn leaf_only(t: usize) -> PolicyTree {
        PolicyTree::from_nodes(
            vec![Node::Leaf {
                treatment: t,
                n_train: 1,
            }],
            vec!["x1".into()],
            vec!["a".into(), "b".into(), "c".into()],
            hp(0),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_routing() {
        let t = leaf_only(2);
        assert_eq!(t.assign_leaf(&[123.0]).unwrap(), 0);
        assert_eq!(t.prescribe(&[-5.0]).unwrap(), 2);
    }

    #[test]
    fn routing_rule_strict_less_goes_left() {
        let t = two_level();
        assert_eq!(t.assign_leaf(&[-1.0, 9.0]).unwrap(), 1);
        assert_eq!(t.assign_leaf(&[0.0, 0.0]).unwrap(), 3, "ties go right at the root");
        assert_eq!(t.assign_leaf(&[0.5, 1.0]).unwrap(), 4);
        assert_eq!(t.prescribe(&[0.5, 0.5]).unwrap(), 1);
    }

    #[test]
    fn routing_errors() {
        let t = two_level();
        assert!(t.assign_leaf(&[0.0]).is_err());
        assert!(t.assign_leaf(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let t = two_level();
        let x = Matrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0], [1.0, 2.0]]).unwrap();
        let batch = t.prescribe_batch(&x).unwrap();
        let single: Vec<_> = x.iter_rows().map(|r| t.prescribe(r).unwrap()).collect();
        assert_eq!(batch, single);
        assert_eq!(batch, vec![0, 1, 2]);
    }

    #[test]
    fn objective_examples() {
        let single = PolicyTree::from_nodes(
            vec![Node::Leaf {
                treatment: 0,
                n_train: 1,
            }],
            vec!["x1".into()],
            vec!["a".into(), "b".into()],
            hp(0),
            0.0,
        )
        .unwrap();
        let r = RewardMatrix::unlabeled(Matrix::from_rows(&[[1.0, 0.0], [3.0, 0.0]]).unwrap())
            .unwrap();
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(single.policy_objective(&r, &x).unwrap(), 2.0);

        let split = PolicyTree::from_nodes(
            vec![
                Node::Branch {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    treatment: 0,
                    n_train: 1,
                },
                Node::Leaf {
                    treatment: 1,
                    n_train: 1,
                },
            ],
            vec!["x1".into()],
            vec!["a".into(), "b".into()],
            hp(1),
            0.0,
        )
        .unwrap();
        let r = RewardMatrix::unlabeled(Matrix::from_rows(&[[0.0, 5.0], [5.0, 0.0]]).unwrap())
            .unwrap();
        assert_eq!(split.policy_objective(&r, &x).unwrap(), 0.0);
        assert!(split
            .policy_objective(&r, &Matrix::from_rows(&[[0.0]]).unwrap())
            .is_err());
    }

    #[test]
    fn rejects_invalid_arenas() {
        let names = vec!["x1".to_string()];
        let labels = vec!["a".to_string(), "b".to_string()];
        // child index not after parent
        let cyclic = vec![
            Node::Branch {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 1,
            },
            Node::Leaf {
                treatment: 0,
                n_train: 1,
            },
        ];
        assert!(PolicyTree::from_nodes(cyclic, names.clone(), labels.clone(), hp(1), 0.0).is_err());
        // depth over the limit
        let deep = vec![
            Node::Branch {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            Node::Leaf {
                treatment: 0,
                n_train: 1,
            },
            Node::Leaf {
                treatment: 1,
                n_train: 1,
            },
        ];
        assert!(PolicyTree::from_nodes(deep.clone(), names.clone(), labels.clone(), hp(0), 0.0).is_err());
        // treatment out of range
        let bad_leaf = vec![Node::Leaf {
            treatment: 5,
            n_train: 1,
        }];
        assert!(PolicyTree::from_nodes(bad_leaf, names.clone(), labels.clone(), hp(0), 0.0).is_err());
        // orphan node
        let orphan = vec![
            Node::Leaf {
                treatment: 0,
                n_train: 1,
            },
            Node::Leaf {
                treatment: 0,
                n_train: 1,
            },
        ];
        assert!(PolicyTree::from_nodes(orphan, names.clone(), labels.clone(), hp(0), 0.0).is_err());
        // leaf under min_leaf
        let small = vec![Node::Leaf {
            treatment: 0,
            n_train: 1,
        }];
        let strict = Hyperparameters {
            min_leaf: 2,
            ..hp(0)
        };
        assert!(PolicyTree::from_nodes(small, names, labels, strict, 0.0).is_err());
    }

    #[test]
    fn every_leaf_has_a_witness() {
        let t = two_level();
        for leaf in t.leaf_ids() {
            let x = t.witness(leaf, 0.0).unwrap();
            assert_eq!(t.assign_leaf(&x).unwrap(), leaf);
        }
    }

    #[test]
    fn shape_counts() {
        let t = two_level();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.n_branches(), 2);
        assert_eq!(t.n_leaves(), 3);
        let path = t.path(&[1.0, 3.0]).unwrap();
        assert_eq!(path.len(), 2);
        assert!(!path[0].went_left && !path[1].went_left);
    }
}
