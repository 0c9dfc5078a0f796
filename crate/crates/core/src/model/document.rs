//! JSON document format for policy trees.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "feature_names": ["age", "dose"],
//!   "treatment_labels": ["control", "treated"],
//!   "hyperparams": {"max_depth": 2, "alpha": 0.0, "min_leaf": 1, "restarts": 100, "seed": 7},
//!   "objective_train": 0.42,
//!   "tree": {"feature": 0, "threshold": 1.5,
//!            "left": {"treatment": 0, "n_train": 10},
//!            "right": {"treatment": 1, "n_train": 12}}
//! }
//! ```
//!
//! Branch nodes carry `feature` (zero-based column index), `threshold`,
//! `left` and `right`; leaves carry `treatment` (zero-based index into
//! `treatment_labels`) and `n_train`.

use serde_json::{json, Map, Value};

use super::{Hyperparameters, Node, PolicyTree};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

pub fn to_value(tree: &PolicyTree) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "feature_names": tree.feature_names(),
        "treatment_labels": tree.treatment_labels(),
        "hyperparams": tree.hyperparams(),
        "objective_train": tree.objective_train(),
        "tree": node_value(tree.nodes(), 0),
    })
}

fn node_value(nodes: &[Node], k: usize) -> Value {
    match nodes[k] {
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => json!({
            "feature": feature,
            "threshold": threshold,
            "left": node_value(nodes, left),
            "right": node_value(nodes, right),
        }),
        Node::Leaf { treatment, n_train } => json!({
            "treatment": treatment,
            "n_train": n_train,
        }),
    }
}

pub fn to_string(tree: &PolicyTree) -> String {
    // serde_json::Map keeps keys sorted, so output is stable across runs.
    serde_json::to_string_pretty(&to_value(tree)).expect("tree documents always serialize")
}

pub fn from_str(text: &str) -> Result<PolicyTree> {
    let value: Value = serde_json::from_str(text)?;
    from_value(&value)
}

pub fn from_value(doc: &Value) -> Result<PolicyTree> {
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::parse("tree document must be a JSON object"))?;
    let version = field(obj, "format_version", "document")?
        .as_u64()
        .ok_or_else(|| Error::parse("document.format_version must be an integer"))?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(format!(
            "unsupported format_version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let feature_names = string_list(field(obj, "feature_names", "document")?, "feature_names")?;
    let treatment_labels =
        string_list(field(obj, "treatment_labels", "document")?, "treatment_labels")?;
    let hyperparams: Hyperparameters =
        serde_json::from_value(field(obj, "hyperparams", "document")?.clone())
            .map_err(|e| Error::parse(format!("document.hyperparams: {e}")))?;
    let objective_train = field(obj, "objective_train", "document")?
        .as_f64()
        .ok_or_else(|| Error::parse("document.objective_train must be a number"))?;

    let mut nodes = Vec::new();
    parse_node(field(obj, "tree", "document")?, "tree", &mut nodes)?;
    PolicyTree::from_nodes(
        nodes,
        feature_names,
        treatment_labels,
        hyperparams,
        objective_train,
    )
    .map_err(|e| Error::parse(format!("invalid tree: {e}")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(format!("{at}: missing field '{key}'")))
}

fn string_list(v: &Value, name: &str) -> Result<Vec<String>> {
    v.as_array()
        .and_then(|a| a.iter().map(|s| s.as_str().map(str::to_string)).collect())
        .ok_or_else(|| Error::parse(format!("document.{name} must be a list of strings")))
}

fn as_index(v: &Value, at: &str, key: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::parse(format!("{at}.{key} must be a non-negative integer")))
}

/// Appends the subtree at `v` in pre-order so children follow parents.
fn parse_node(v: &Value, at: &str, nodes: &mut Vec<Node>) -> Result<usize> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(format!("{at}: node must be an object")))?;
    let k = nodes.len();
    if obj.contains_key("treatment") {
        if obj.contains_key("left") || obj.contains_key("right") {
            return Err(Error::parse(format!("{at}: leaf node cannot have children")));
        }
        let treatment = as_index(field(obj, "treatment", at)?, at, "treatment")?;
        let n_train = as_index(field(obj, "n_train", at)?, at, "n_train")?;
        nodes.push(Node::Leaf { treatment, n_train });
        return Ok(k);
    }
    if !obj.contains_key("feature") {
        return Err(Error::parse(format!(
            "{at}: node is neither a branch (feature) nor a leaf (treatment)"
        )));
    }
    let feature = as_index(field(obj, "feature", at)?, at, "feature")?;
    let threshold = field(obj, "threshold", at)?
        .as_f64()
        .ok_or_else(|| Error::parse(format!("{at}.threshold must be a number")))?;
    let left_v = field(obj, "left", at)?;
    let right_v = field(obj, "right", at)?;
    // placeholder, patched once children are placed
    nodes.push(Node::Leaf {
        treatment: 0,
        n_train: 0,
    });
    let left = parse_node(left_v, &format!("{at}.left"), nodes)?;
    let right = parse_node(right_v, &format!("{at}.right"), nodes)?;
    nodes[k] = Node::Branch {
        feature,
        threshold,
        left,
        right,
    };
    Ok(k)
}
