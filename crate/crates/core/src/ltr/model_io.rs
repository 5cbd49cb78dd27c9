//! Model file: JSON lines. Optional leading `# ` provenance lines, then a
//! header object, then one object per tree:
//!
//! ```text
//! {"format":"targettype-forest","version":1,"n_features":25,"n_trees":2,"feature_importance":[...]}
//! {"nodes":[{"feature":3,"threshold":0.25,"left":1,"right":2},{"leaf":0.0},{"leaf":0.5}]}
//! ```
//!
//! Nodes are listed in preorder: a split's left child is the next node and
//! its right child comes after the whole left subtree.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::{ForestModel, Node, Tree};
use crate::error::{Error, Result};
use crate::eval::header_block;
use crate::text::{load_with, write_string};

const FORMAT: &str = "targettype-forest";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    n_features: usize,
    n_trees: usize,
    feature_importance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum NodeRecord {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    nodes: Vec<NodeRecord>,
}

pub fn encode_model(model: &ForestModel, header: &[String]) -> Result<String> {
    let mut out = header_block(header);
    let h = Header {
        format: FORMAT.into(),
        version: VERSION,
        n_features: model.n_features,
        n_trees: model.trees.len(),
        feature_importance: model.feature_importance.clone(),
    };
    let json = |e: serde_json::Error| Error::InvalidData(format!("cannot encode model: {e}"));
    out.push_str(&serde_json::to_string(&h).map_err(json)?);
    out.push('\n');
    for t in &model.trees {
        let rec = TreeRecord {
            nodes: t
                .nodes
                .iter()
                .map(|n| match *n {
                    Node::Leaf { value } => NodeRecord::Leaf { leaf: value },
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => NodeRecord::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    },
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).map_err(json)?);
        out.push('\n');
    }
    Ok(out)
}

/// Decodes and validates a model; returns it with its `#` header lines.
pub fn decode_model(text: &str) -> Result<(ForestModel, Vec<String>)> {
    let err = |msg: String| Error::decode("model", msg);
    let mut provenance = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = loop {
        match lines.next() {
            Some((_, l)) if l.starts_with('#') => {
                provenance.push(l.trim_start_matches('#').trim().to_string());
            }
            Some(x) => break x,
            None => return Err(err("missing header line".into())),
        }
    };
    let h: Header =
        serde_json::from_str(htext).map_err(|e| err(format!("line {hline}: bad header: {e}")))?;
    if h.format != FORMAT || h.version != VERSION {
        return Err(err(format!(
            "unsupported model format `{}` version {}",
            h.format, h.version
        )));
    }
    if h.n_features == 0 || h.n_trees == 0 {
        return Err(err("model must have ≥ 1 feature and ≥ 1 tree".into()));
    }
    if h.feature_importance.len() != h.n_features
        || h.feature_importance.iter().any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(err("feature importance must hold one non-negative value per feature".into()));
    }
    let total: f64 = h.feature_importance.iter().sum();
    if total != 0.0 && (total - 1.0).abs() > 1e-6 {
        return Err(err(format!("feature importance sums to {total}")));
    }

    let mut trees = Vec::new();
    for (line, l) in lines {
        if trees.len() == h.n_trees {
            return Err(err(format!("line {line}: more trees than the header's {}", h.n_trees)));
        }
        let rec: TreeRecord =
            serde_json::from_str(l).map_err(|e| err(format!("line {line}: bad tree: {e}")))?;
        trees.push(check_tree(rec, h.n_features).map_err(|m| err(format!("line {line}: {m}")))?);
    }
    if trees.len() != h.n_trees {
        return Err(err(format!("header declares {} trees, found {}", h.n_trees, trees.len())));
    }
    Ok((
        ForestModel {
            n_features: h.n_features,
            trees,
            feature_importance: h.feature_importance,
        },
        provenance,
    ))
}

fn check_tree(rec: TreeRecord, n_features: usize) -> std::result::Result<Tree, String> {
    let len = rec.nodes.len();
    if len == 0 {
        return Err("tree has no nodes".into());
    }
    // Walk in preorder; the walk must visit every node exactly in list order.
    let mut expected = vec![0usize];
    let mut next = 0usize;
    let mut nodes = Vec::with_capacity(len);
    while let Some(i) = expected.pop() {
        if i != next || i >= len {
            return Err(format!("node {i} is not in preorder position"));
        }
        next += 1;
        match rec.nodes[i] {
            NodeRecord::Leaf { leaf } => {
                if !leaf.is_finite() {
                    return Err(format!("node {i}: non-finite leaf value"));
                }
                nodes.push(Node::Leaf { value: leaf });
            }
            NodeRecord::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if feature >= n_features {
                    return Err(format!("node {i}: feature {feature} out of range"));
                }
                if !threshold.is_finite() {
                    return Err(format!("node {i}: non-finite threshold"));
                }
                if left != i + 1 || right <= left || right >= len {
                    return Err(format!("node {i}: bad child offsets {left}, {right}"));
                }
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
                expected.push(right);
                expected.push(left);
            }
        }
    }
    if next != len {
        return Err(format!("{} unreachable nodes", len - next));
    }
    Ok(Tree { nodes })
}

pub fn save_model(path: impl AsRef<Path>, model: &ForestModel, header: &[String]) -> Result<()> {
    write_string(path.as_ref(), &encode_model(model, header)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ForestModel, Vec<String>)> {
    load_with(path.as_ref(), decode_model)
}
