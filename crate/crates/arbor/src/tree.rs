//! The deployable classifier: branching feature per internal node, leaf
//! predictions, pruning flags, and a stable JSON schema for round trips.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowgraph::TreeIndex;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported tree schema version {0}")]
    SchemaVersion(u32),
    #[error("node {0} is malformed: {1}")]
    MalformedNode(usize, String),
    #[error("tree uses feature {feature:?} not present in the dataset")]
    FeatureMismatch { feature: String },
}

/// One heap-indexed node of a trained tree.
///
/// A branch node tests one feature (value 0 goes left, 1 goes right); a
/// branch node without a feature routes everything right, which is how
/// the axis-aligned baseline formulation represents pruned interior
/// nodes. A leaf predicts a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub leaf: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
}

/// Statistics of the solve that produced a tree.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes_explored: u64,
    pub cuts_added: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedTree {
    pub schema_version: u32,
    pub depth: u32,
    /// Nodes present in the pruned tree, sorted by id. Nodes below a
    /// leaf are omitted.
    pub nodes: Vec<TreeNode>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Provenance of each feature, so raw tables can be re-encoded at
    /// prediction time. Empty for trees trained on pre-binarized rows.
    #[serde(default)]
    pub encoding: Vec<crate::dataset::Encoding>,
    #[serde(default)]
    pub stats: TrainStats,
}

pub const TREE_SCHEMA_VERSION: u32 = 1;

impl TrainedTree {
    pub fn index(&self) -> TreeIndex {
        TreeIndex { depth: self.depth }
    }

    fn node(&self, id: usize) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Follow the branching tests from the root and return the node
    /// where the datapoint stops. Feature value 0 goes left, 1 goes
    /// right; a branch node without a feature routes right.
    pub fn route(&self, x: &[u8]) -> usize {
        let idx = self.index();
        let mut node_id = 1usize;
        loop {
            let node = self
                .node(node_id)
                .unwrap_or_else(|| panic!("malformed tree: node {node_id} missing"));
            if node.leaf {
                return node_id;
            }
            let go_right = match node.feature {
                Some(f) => x[f] == 1,
                None => true,
            };
            node_id = if go_right { idx.right(node_id) } else { idx.left(node_id) };
        }
    }

    /// Predicted class for one feature vector.
    pub fn predict(&self, x: &[u8]) -> usize {
        let leaf = self.route(x);
        self.node(leaf)
            .and_then(|n| n.class)
            .expect("malformed tree: leaf without class")
    }

    /// Number of branching decisions actually used.
    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| !n.leaf && n.feature.is_some()).count()
    }

    /// Check structural invariants: every path from the root ends at
    /// exactly one leaf, branch nodes carry at most one feature and
    /// leaves carry exactly one class.
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.schema_version != TREE_SCHEMA_VERSION {
            return Err(TreeError::SchemaVersion(self.schema_version));
        }
        let idx = self.index();
        let mut stack = vec![1usize];
        while let Some(id) = stack.pop() {
            let node = self
                .node(id)
                .ok_or_else(|| TreeError::MalformedNode(id, "missing on a live path".into()))?;
            if node.leaf {
                if node.class.is_none() {
                    return Err(TreeError::MalformedNode(id, "leaf without class".into()));
                }
            } else {
                if node.class.is_some() {
                    return Err(TreeError::MalformedNode(id, "branch with class".into()));
                }
                if !idx.is_branching(id) {
                    return Err(TreeError::MalformedNode(id, "terminal must be leaf".into()));
                }
                stack.push(idx.left(id));
                stack.push(idx.right(id));
            }
        }
        Ok(())
    }

    /// Indented text rendering of the decision logic.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(1, 0, &mut out);
        out
    }

    fn render_node(&self, id: usize, indent: usize, out: &mut String) {
        let Some(node) = self.node(id) else { return };
        let pad = "  ".repeat(indent);
        if node.leaf {
            let class = node.class.expect("leaf with class");
            out.push_str(&format!("{pad}predict {}\n", self.class_names[class]));
        } else {
            let idx = self.index();
            match node.feature {
                Some(f) => {
                    out.push_str(&format!("{pad}if {} = 0:\n", self.feature_names[f]));
                    self.render_node(idx.left(id), indent + 1, out);
                    out.push_str(&format!("{pad}else:\n"));
                    self.render_node(idx.right(id), indent + 1, out);
                }
                None => {
                    self.render_node(idx.right(id), indent, out);
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let tree: TrainedTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TreeError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TreeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth1_tree(feature: usize) -> TrainedTree {
        TrainedTree {
            schema_version: TREE_SCHEMA_VERSION,
            depth: 1,
            nodes: vec![
                TreeNode { id: 1, leaf: false, feature: Some(feature), class: None },
                TreeNode { id: 2, leaf: true, feature: None, class: Some(0) },
                TreeNode { id: 3, leaf: true, feature: None, class: Some(1) },
            ],
            feature_names: vec!["f0".into()],
            class_names: vec!["c0".into(), "c1".into()],
            encoding: Vec::new(),
            stats: TrainStats::default(),
        }
    }

    #[test]
    fn routes_by_feature_value() {
        let tree = depth1_tree(0);
        assert_eq!(tree.route(&[0]), 2);
        assert_eq!(tree.route(&[1]), 3);
        assert_eq!(tree.predict(&[0]), 0);
        assert_eq!(tree.predict(&[1]), 1);
    }

    #[test]
    fn root_leaf_catches_everything() {
        let tree = TrainedTree {
            schema_version: TREE_SCHEMA_VERSION,
            depth: 2,
            nodes: vec![TreeNode { id: 1, leaf: true, feature: None, class: Some(1) }],
            feature_names: vec!["f0".into()],
            class_names: vec!["c0".into(), "c1".into()],
            encoding: Vec::new(),
            stats: TrainStats::default(),
        };
        for x in [[0u8], [1u8]] {
            assert_eq!(tree.route(&x), 1);
            assert_eq!(tree.predict(&x), 1);
        }
    }

    #[test]
    fn featureless_branch_routes_right() {
        let mut tree = depth1_tree(0);
        tree.nodes[0].feature = None;
        assert_eq!(tree.route(&[0]), 3);
        assert_eq!(tree.route(&[1]), 3);
    }

    #[test]
    fn json_round_trip_is_identical() {
        let tree = depth1_tree(0);
        let text = tree.to_json().unwrap();
        let back = TrainedTree::from_json(&text).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn validation_rejects_leafless_path() {
        let mut tree = depth1_tree(0);
        tree.nodes.remove(2);
        assert!(tree.validate().is_err());
    }
}
