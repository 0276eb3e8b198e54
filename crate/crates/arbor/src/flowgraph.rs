//! Tree index arithmetic and the flow graphs used by the formulations.
//!
//! Nodes of a depth-d tree are heap-indexed: node 1 is the root, node n
//! has children 2n and 2n+1, and the parent of n is n/2. Branching
//! candidates are nodes 1..2^d-1 and terminals are 2^d..2^(d+1)-1. The
//! flow graph adds a source wired to the root and one or more sinks;
//! which nodes carry sink arcs depends on the variant.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("tree depth must be at least 1")]
    DepthTooSmall,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Heap-indexed node arithmetic for a depth-d tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeIndex {
    pub depth: u32,
}

impl TreeIndex {
    pub fn new(depth: u32) -> Result<Self, GraphError> {
        if depth == 0 {
            return Err(GraphError::DepthTooSmall);
        }
        Ok(TreeIndex { depth })
    }

    /// Branching candidates 1..2^d-1.
    pub fn branching_nodes(&self) -> std::ops::Range<usize> {
        1..(1 << self.depth)
    }

    /// Terminal nodes 2^d..2^(d+1)-1.
    pub fn terminal_nodes(&self) -> std::ops::Range<usize> {
        (1 << self.depth)..(1 << (self.depth + 1))
    }

    /// All tree nodes 1..2^(d+1)-1.
    pub fn all_nodes(&self) -> std::ops::Range<usize> {
        1..(1 << (self.depth + 1))
    }

    pub fn n_branching(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_terminal(&self) -> usize {
        1 << self.depth
    }

    pub fn is_branching(&self, node: usize) -> bool {
        node >= 1 && node < (1 << self.depth)
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        node >= (1 << self.depth) && node < (1 << (self.depth + 1))
    }

    pub fn left(&self, node: usize) -> usize {
        debug_assert!(self.is_branching(node));
        2 * node
    }

    pub fn right(&self, node: usize) -> usize {
        debug_assert!(self.is_branching(node));
        2 * node + 1
    }

    /// Parent of a tree node; the root's parent is the source.
    pub fn parent(&self, node: usize) -> Option<usize> {
        if node > 1 {
            Some(node / 2)
        } else {
            None
        }
    }

    /// Nodes on the root-to-node path, excluding the node itself,
    /// ordered root first.
    pub fn ancestors(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut n = node;
        while let Some(p) = self.parent(n) {
            path.push(p);
            n = p;
        }
        path.reverse();
        path
    }

    /// Ancestors split by whether the path to `node` leaves them through
    /// the left or the right child.
    pub fn left_right_ancestor_sets(&self, node: usize) -> (Vec<usize>, Vec<usize>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut n = node;
        while let Some(p) = self.parent(n) {
            if n == 2 * p {
                left.push(p);
            } else {
                right.push(p);
            }
            n = p;
        }
        left.reverse();
        right.reverse();
        (left, right)
    }
}

/// Which sink arcs the graph carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphVariant {
    /// Single sink, reachable from terminal nodes only. Models trees
    /// where every prediction happens at maximum depth and only
    /// correctly classified rows flow.
    Balanced,
    /// Single sink, reachable from every node, so predictions can
    /// happen anywhere. Still tracks correctly classified rows only.
    Imbalanced,
    /// One sink per class, reachable from every node. Every row flows
    /// to the sink of its predicted class, so misclassified rows are
    /// tracked too.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeId {
    Source,
    Tree(usize),
    Sink,
    /// Per-class sink of the complete variant.
    ClassSink(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
}

/// One additive term of a symbolic arc capacity. Every term has
/// coefficient one; a capacity is the sum of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityTerm {
    /// The constant source arc capacity.
    One,
    /// Branch-selection variable for (node, feature).
    Branch { node: usize, feature: usize },
    /// Prediction variable for (node, class).
    Predict { node: usize, class: usize },
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub variant: GraphVariant,
    pub index: TreeIndex,
    pub n_classes: usize,
    pub arcs: Vec<Arc>,
}

/// Concrete 0/1 branching and prediction choices, used to instantiate
/// capacities. `branch[n-1][f]` is defined for branching nodes and
/// `predict[n-1][k]` for every tree node (balanced graphs only read the
/// terminal rows).
#[derive(Debug, Clone)]
pub struct DecisionValues {
    pub branch: Vec<Vec<u8>>,
    pub predict: Vec<Vec<u8>>,
}

/// Per-arc capacities of one datapoint's capacitated graph, aligned
/// with `FlowGraph::arcs`.
#[derive(Debug, Clone)]
pub struct CapacityAssignment {
    pub values: Vec<u32>,
}

/// Build the flow graph of the requested variant.
///
/// Arc order is canonical: in-arcs (parent(n), n) for n ascending with
/// (source, 1) first, then sink arcs by node ascending (and class
/// ascending within a node for the complete variant).
pub fn build_graph(
    depth: u32,
    variant: GraphVariant,
    n_classes: usize,
) -> Result<FlowGraph, GraphError> {
    let index = TreeIndex::new(depth)?;
    let mut arcs = Vec::new();
    for n in index.all_nodes() {
        let tail = match index.parent(n) {
            None => NodeId::Source,
            Some(p) => NodeId::Tree(p),
        };
        arcs.push(Arc {
            tail,
            head: NodeId::Tree(n),
        });
    }
    match variant {
        GraphVariant::Balanced => {
            for n in index.terminal_nodes() {
                arcs.push(Arc {
                    tail: NodeId::Tree(n),
                    head: NodeId::Sink,
                });
            }
        }
        GraphVariant::Imbalanced => {
            for n in index.all_nodes() {
                arcs.push(Arc {
                    tail: NodeId::Tree(n),
                    head: NodeId::Sink,
                });
            }
        }
        GraphVariant::Complete => {
            for n in index.all_nodes() {
                for k in 0..n_classes {
                    arcs.push(Arc {
                        tail: NodeId::Tree(n),
                        head: NodeId::ClassSink(k),
                    });
                }
            }
        }
    }
    Ok(FlowGraph {
        variant,
        index,
        n_classes,
        arcs,
    })
}

impl FlowGraph {
    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Position of an arc in the canonical order.
    pub fn arc_position(&self, arc: Arc) -> Option<usize> {
        self.arcs.iter().position(|&a| a == arc)
    }

    /// Canonical position of the arc entering a tree node.
    pub fn in_arc(&self, node: usize) -> usize {
        debug_assert!(node >= 1 && node < (1 << (self.index.depth + 1)));
        node - 1
    }

    /// Canonical position of a node's sink arc (single-sink variants).
    pub fn sink_arc(&self, node: usize) -> usize {
        let n_nodes = (1 << (self.index.depth + 1)) - 1;
        match self.variant {
            GraphVariant::Balanced => {
                debug_assert!(self.index.is_terminal(node));
                n_nodes + (node - self.index.n_branching() - 1)
            }
            GraphVariant::Imbalanced => n_nodes + (node - 1),
            GraphVariant::Complete => panic!("complete graphs have per-class sink arcs"),
        }
    }

    /// Canonical position of the (node, class) sink arc of the complete
    /// variant.
    pub fn class_sink_arc(&self, node: usize, class: usize) -> usize {
        debug_assert_eq!(self.variant, GraphVariant::Complete);
        let n_nodes = (1 << (self.index.depth + 1)) - 1;
        n_nodes + (node - 1) * self.n_classes + class
    }

    /// Symbolic capacity of one arc for a datapoint with features `x`
    /// and label `y`: the source arc has constant capacity one, a
    /// branch arc sums the branch variables of features whose value
    /// sends the datapoint down that side, and a sink arc is the
    /// prediction variable of the datapoint's label (or of the sink's
    /// class in the complete variant).
    pub fn capacity_terms(&self, arc: Arc, x: &[u8], y: usize) -> Vec<CapacityTerm> {
        match (arc.tail, arc.head) {
            (NodeId::Source, NodeId::Tree(_)) => vec![CapacityTerm::One],
            (NodeId::Tree(n), NodeId::Tree(child)) => {
                let want = if child == self.index.left(n) { 0 } else { 1 };
                x.iter()
                    .enumerate()
                    .filter(|&(_, &value)| value == want)
                    .map(|(feature, _)| CapacityTerm::Branch { node: n, feature })
                    .collect()
            }
            (NodeId::Tree(n), NodeId::Sink) => vec![CapacityTerm::Predict { node: n, class: y }],
            (NodeId::Tree(n), NodeId::ClassSink(k)) => {
                vec![CapacityTerm::Predict { node: n, class: k }]
            }
            _ => unreachable!("no such arc in any variant"),
        }
    }

    /// Arcs leaving a source set: tail inside, head outside. The set is
    /// given as tree-node ids; the source is always part of it and no
    /// sink ever is.
    pub fn cut_set(&self, source_nodes: &[usize]) -> Vec<Arc> {
        let inside = |id: NodeId| match id {
            NodeId::Source => true,
            NodeId::Tree(n) => source_nodes.contains(&n),
            NodeId::Sink | NodeId::ClassSink(_) => false,
        };
        self.arcs
            .iter()
            .copied()
            .filter(|a| inside(a.tail) && !inside(a.head))
            .collect()
    }
}

/// Evaluate every arc capacity for one datapoint under concrete 0/1
/// decisions.
pub fn instantiate_capacities(
    graph: &FlowGraph,
    x: &[u8],
    y: usize,
    decisions: &DecisionValues,
) -> Result<CapacityAssignment, GraphError> {
    let n_nodes = graph.index.all_nodes().len();
    if decisions.branch.len() < graph.index.n_branching() {
        return Err(GraphError::DimensionMismatch(format!(
            "branch rows {} < branching nodes {}",
            decisions.branch.len(),
            graph.index.n_branching()
        )));
    }
    if decisions.predict.len() < n_nodes {
        return Err(GraphError::DimensionMismatch(format!(
            "predict rows {} < tree nodes {}",
            decisions.predict.len(),
            n_nodes
        )));
    }
    for row in &decisions.branch {
        if row.len() != x.len() {
            return Err(GraphError::DimensionMismatch(format!(
                "branch row width {} != features {}",
                row.len(),
                x.len()
            )));
        }
    }
    if y >= graph.n_classes {
        return Err(GraphError::DimensionMismatch(format!(
            "label {y} out of range for {} classes",
            graph.n_classes
        )));
    }
    let values = graph
        .arcs
        .iter()
        .map(|&arc| {
            graph
                .capacity_terms(arc, x, y)
                .into_iter()
                .map(|term| match term {
                    CapacityTerm::One => 1,
                    CapacityTerm::Branch { node, feature } => {
                        u32::from(decisions.branch[node - 1][feature])
                    }
                    CapacityTerm::Predict { node, class } => {
                        u32::from(decisions.predict[node - 1][class])
                    }
                })
                .sum()
        })
        .collect();
    Ok(CapacityAssignment { values })
}
