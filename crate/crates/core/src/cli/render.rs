//! Text views of a tree: the indented listing and per-row split paths.

use std::fmt::Write;

use crate::error::Result;
use crate::model::{Node, PolicyTree};

/// One line per node in depth-first order, indented two spaces per level.
/// A branch line is followed by its `<` subtree, then its `>=` subtree.
pub fn render(tree: &PolicyTree) -> String {
    let mut out = String::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((k, level)) = stack.pop() {
        let indent = "  ".repeat(level);
        match tree.nodes()[k] {
            Node::Branch {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "{indent}{} < {threshold}", tree.feature_names()[feature]);
                stack.push((right, level + 1));
                stack.push((left, level + 1));
            }
            Node::Leaf { treatment, n_train } => {
                let _ = writeln!(
                    out,
                    "{indent}prescribe {} (n={n_train})",
                    tree.treatment_labels()[treatment]
                );
            }
        }
    }
    out
}

/// Root-to-leaf tests for `x`, e.g. `x1 < 0.5 left; x3 < 2 right`.
pub fn explain(tree: &PolicyTree, x: &[f64]) -> Result<String> {
    let steps = tree.path(x)?;
    Ok(steps
        .iter()
        .map(|s| {
            format!(
                "{} < {} {}",
                tree.feature_names()[s.feature],
                s.threshold,
                if s.went_left { "left" } else { "right" }
            )
        })
        .collect::<Vec<_>>()
        .join("; "))
}
