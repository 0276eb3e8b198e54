//! Benders decomposition of the flow formulations.
//!
//! The master keeps only the branching and prediction variables plus
//! one bounded score per datapoint; the per-datapoint max-flow
//! subproblems are replaced by cut-set inequalities generated lazily.
//! For integral master assignments every arc capacity is 0 or 1 and
//! exactly one outgoing arc per visited node is open, so a violated
//! inequality (equivalently, a zero-capacity minimum cut) can be found
//! by walking the single open path from the root, visiting at most
//! depth + 2 nodes. Walk-produced source sets expand to cuts that are
//! facet-defining for the relaxed master polytope; the witness-point
//! generator below exercises exactly that structure.

use thiserror::Error;

use crate::branchbound::{
    solve_mio, LazySeparator, MioResult, MioStatus, SolveError, SolverConfig,
};
use crate::dataset::BinaryDataset;
use crate::flowgraph::{
    build_graph, CapacityTerm, DecisionValues, FlowGraph, GraphVariant, TreeIndex,
};
use crate::formulations::{
    extract_tree, BuiltModel, FormulationError, FormulationKind, Layout, PredictionNodes, VarMap,
};
use crate::linopt::{Constraint, LinearModel, Relation};
use crate::tree::TrainedTree;

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("formulation: {0}")]
    Formulation(#[from] FormulationError),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("master has no incumbent: {0:?}")]
    NoIncumbent(MioStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BendersVariant {
    /// Predictions at maximum depth only.
    Balanced,
    /// Prunable trees with a per-split penalty.
    Regularized,
}

/// Root-to-leaf prefix path found by the separation walk; the source
/// vertex is an implicit member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSet {
    pub nodes: Vec<usize>,
    pub row: usize,
}

impl std::fmt::Display for SourceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{s")?;
        for n in &self.nodes {
            write!(f, ",{n}")?;
        }
        write!(f, "}}")
    }
}

/// Outcome of one separation walk, with the visited-node count for
/// complexity instrumentation (the source counts as one visit).
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub source_set: Option<SourceSet>,
    pub nodes_visited: usize,
}

/// One lazily generated inequality: the datapoint score is bounded by
/// the capacity of the cut-set, an affine expression over master
/// variables with unit coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BendersCut {
    pub row: usize,
    /// Master variable indices appearing with coefficient one.
    pub terms: Vec<usize>,
    /// Constant capacity contributed by the source arc, if cut.
    pub constant: f64,
}

impl BendersCut {
    /// The pooled constraint: score - sum(terms) <= constant.
    pub fn constraint(&self, map: &VarMap) -> Constraint {
        let mut terms = vec![(map.classified(self.row), 1.0)];
        for &v in &self.terms {
            terms.push((v, -1.0));
        }
        Constraint::new(terms, Relation::Le, self.constant)
    }

    /// Right-hand side value at a concrete master assignment.
    pub fn rhs_at(&self, assignment: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&v| assignment[v]).sum::<f64>()
    }
}

/// The decomposition master: tree-shape variables plus one score per
/// datapoint, cut family initially empty.
pub struct MasterModel {
    pub built: BuiltModel,
    pub variant: BendersVariant,
}

impl MasterModel {
    pub fn map(&self) -> &VarMap {
        self.built.flow_map()
    }

    pub fn graph(&self) -> &FlowGraph {
        self.built.graph.as_ref().expect("masters carry their graph")
    }
}

/// Build the Benders master for a dataset.
pub fn build_master(
    data: &BinaryDataset,
    depth: u32,
    lambda: f64,
    variant: BendersVariant,
) -> Result<MasterModel, FormulationError> {
    if data.n_classes() < 2 {
        return Err(FormulationError::TooFewClasses);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FormulationError::BadLambda(lambda));
    }
    let (n_rows, n_features, n_classes) = (data.n_rows(), data.n_features(), data.n_classes());
    let graph_variant = match variant {
        BendersVariant::Balanced => GraphVariant::Balanced,
        BendersVariant::Regularized => GraphVariant::Imbalanced,
    };
    let graph = build_graph(depth, graph_variant, n_classes)?;
    let index = graph.index;

    let mut model = LinearModel::new();
    let score_weight = match variant {
        BendersVariant::Balanced => 1.0,
        BendersVariant::Regularized => 1.0 - lambda,
    };
    let branch_weight = match variant {
        BendersVariant::Balanced => 0.0,
        BendersVariant::Regularized => -lambda,
    };
    for n in index.branching_nodes() {
        for f in 0..n_features {
            model.add_binary(format!("b_n{n}_f{f}"), branch_weight);
        }
    }
    let w_offset = model.n_variables();
    let prediction_nodes = match variant {
        BendersVariant::Balanced => PredictionNodes::TerminalOnly,
        BendersVariant::Regularized => PredictionNodes::AllNodes,
    };
    let prediction_range = match variant {
        BendersVariant::Balanced => index.terminal_nodes(),
        BendersVariant::Regularized => index.all_nodes(),
    };
    for n in prediction_range {
        for k in 0..n_classes {
            model.add_binary(format!("w_n{n}_k{k}"), 0.0);
        }
    }
    let p_offset = match variant {
        BendersVariant::Balanced => None,
        BendersVariant::Regularized => {
            let offset = model.n_variables();
            for n in index.all_nodes() {
                model.add_binary(format!("p_n{n}"), 0.0);
            }
            Some(offset)
        }
    };
    let g_offset = model.n_variables();
    for i in 0..n_rows {
        // scores are capped at one so the master stays bounded even
        // with the cut family empty
        model.add_variable(format!("g_i{i}"), 0.0, 1.0, false, score_weight);
    }
    let map = VarMap::layout(
        index,
        n_features,
        n_classes,
        n_rows,
        prediction_nodes,
        graph.n_arcs(),
        0,
        w_offset,
        p_offset,
        None,
        Some(g_offset),
    );

    match variant {
        BendersVariant::Balanced => {
            for n in index.branching_nodes() {
                let terms = (0..n_features).map(|f| (map.branch(n, f), 1.0)).collect();
                model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
            }
            for n in index.terminal_nodes() {
                let terms = (0..n_classes).map(|k| (map.prediction(n, k), 1.0)).collect();
                model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
            }
        }
        BendersVariant::Regularized => {
            for n in index.branching_nodes() {
                let mut terms: Vec<(usize, f64)> =
                    (0..n_features).map(|f| (map.branch(n, f), 1.0)).collect();
                terms.push((map.leaf_flag(n), 1.0));
                for m in index.ancestors(n) {
                    terms.push((map.leaf_flag(m), 1.0));
                }
                model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
            }
            for n in index.terminal_nodes() {
                let mut terms = vec![(map.leaf_flag(n), 1.0)];
                for m in index.ancestors(n) {
                    terms.push((map.leaf_flag(m), 1.0));
                }
                model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
            }
            for n in index.all_nodes() {
                let mut terms: Vec<(usize, f64)> =
                    (0..n_classes).map(|k| (map.prediction(n, k), 1.0)).collect();
                terms.push((map.leaf_flag(n), -1.0));
                model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
            }
        }
    }

    let kind = match variant {
        BendersVariant::Balanced => FormulationKind::FlowBalanced,
        BendersVariant::Regularized => FormulationKind::FlowRegularized,
    };
    Ok(MasterModel {
        built: BuiltModel {
            model,
            layout: Layout::Flow(map),
            kind,
            lambda,
            graph: Some(graph),
        },
        variant,
    })
}

/// Pull rounded 0/1 decisions out of a master assignment.
pub fn decisions_from(map: &VarMap, assignment: &[f64]) -> DecisionValues {
    let index = map.index;
    let n_nodes = index.all_nodes().len();
    let mut branch = vec![vec![0u8; map.n_features]; index.n_branching()];
    for n in index.branching_nodes() {
        for f in 0..map.n_features {
            branch[n - 1][f] = assignment[map.branch(n, f)].round() as u8;
        }
    }
    let mut predict = vec![vec![0u8; map.n_classes]; n_nodes];
    for n in map.prediction_node_range() {
        for k in 0..map.n_classes {
            predict[n - 1][k] = assignment[map.prediction(n, k)].round() as u8;
        }
    }
    DecisionValues { branch, predict }
}

fn open_child(
    index: TreeIndex,
    decisions: &DecisionValues,
    node: usize,
    x: &[u8],
) -> Option<usize> {
    let row = &decisions.branch[node - 1];
    let open_left = x
        .iter()
        .enumerate()
        .any(|(f, &v)| v == 0 && row[f] == 1);
    if open_left {
        return Some(index.left(node));
    }
    let open_right = x
        .iter()
        .enumerate()
        .any(|(f, &v)| v == 1 && row[f] == 1);
    if open_right {
        return Some(index.right(node));
    }
    None
}

const SCORE_EPS: f64 = 1e-6;

/// Separation walk on the balanced graph: follow the unique open path
/// from the root; the datapoint is correctly classified when the leaf's
/// sink arc is open, otherwise the visited prefix is the source set of
/// a zero-capacity cut.
pub fn separate_balanced(
    graph: &FlowGraph,
    decisions: &DecisionValues,
    x: &[u8],
    y: usize,
    score: f64,
    row: usize,
) -> Separation {
    debug_assert_eq!(graph.variant, GraphVariant::Balanced);
    if score <= SCORE_EPS {
        return Separation { source_set: None, nodes_visited: 0 };
    }
    let index = graph.index;
    let mut visited = 1; // the source
    let mut nodes = Vec::with_capacity(index.depth as usize + 1);
    let mut node = 1usize;
    while index.is_branching(node) {
        nodes.push(node);
        visited += 1;
        match open_child(index, decisions, node, x) {
            Some(child) => node = child,
            None => {
                // no outgoing capacity: the prefix already cuts the row off
                return Separation {
                    source_set: Some(SourceSet { nodes, row }),
                    nodes_visited: visited,
                };
            }
        }
    }
    nodes.push(node);
    visited += 1;
    let sink_open = decisions.predict[node - 1][y] == 1;
    if score > f64::from(u8::from(sink_open)) + SCORE_EPS {
        Separation { source_set: Some(SourceSet { nodes, row }), nodes_visited: visited }
    } else {
        Separation { source_set: None, nodes_visited: visited }
    }
}

/// Separation walk on the prunable-tree graph: identical to the
/// balanced walk but stopping at the first node flagged as a leaf.
pub fn separate_regularized(
    graph: &FlowGraph,
    decisions: &DecisionValues,
    leaf_flags: &[u8],
    x: &[u8],
    y: usize,
    score: f64,
    row: usize,
) -> Separation {
    debug_assert_eq!(graph.variant, GraphVariant::Imbalanced);
    if score <= SCORE_EPS {
        return Separation { source_set: None, nodes_visited: 0 };
    }
    let index = graph.index;
    let mut visited = 1;
    let mut nodes = Vec::with_capacity(index.depth as usize + 1);
    let mut node = 1usize;
    while leaf_flags[node - 1] == 0 {
        debug_assert!(index.is_branching(node), "pruned walk reached an unflagged terminal");
        nodes.push(node);
        visited += 1;
        match open_child(index, decisions, node, x) {
            Some(child) => node = child,
            None => {
                return Separation {
                    source_set: Some(SourceSet { nodes, row }),
                    nodes_visited: visited,
                };
            }
        }
    }
    nodes.push(node);
    visited += 1;
    let sink_open = decisions.predict[node - 1][y] == 1;
    if score > f64::from(u8::from(sink_open)) + SCORE_EPS {
        Separation { source_set: Some(SourceSet { nodes, row }), nodes_visited: visited }
    } else {
        Separation { source_set: None, nodes_visited: visited }
    }
}

/// Expand a source set into its cut inequality over master variables.
/// The arcs leaving the set are read off the graph and their symbolic
/// capacities are summed, so the same expansion serves walk-produced
/// sets and arbitrary (for example deliberately dominated) ones.
pub fn expand_cut(
    source_set: &SourceSet,
    graph: &FlowGraph,
    map: &VarMap,
    x: &[u8],
    y: usize,
) -> BendersCut {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    for arc in graph.cut_set(&source_set.nodes) {
        for term in graph.capacity_terms(arc, x, y) {
            match term {
                CapacityTerm::One => constant += 1.0,
                CapacityTerm::Branch { node, feature } => terms.push(map.branch(node, feature)),
                CapacityTerm::Predict { node, class } => terms.push(map.prediction(node, class)),
            }
        }
    }
    terms.sort_unstable();
    terms.dedup();
    BendersCut { row: source_set.row, terms, constant }
}

/// The closed form of a walk-produced cut on the balanced graph: the
/// leaf's matching prediction plus, per path node, the branch variables
/// of features that would route the datapoint the other way.
pub fn facet_form(
    source_set: &SourceSet,
    decisions: &DecisionValues,
    map: &VarMap,
    x: &[u8],
    y: usize,
) -> BendersCut {
    let index = map.index;
    let leaf = *source_set.nodes.last().expect("walk sets end at a leaf");
    debug_assert!(index.is_terminal(leaf));
    let mut terms = vec![map.prediction(leaf, y)];
    for &node in &source_set.nodes {
        if !index.is_branching(node) {
            continue;
        }
        let chosen = decisions.branch[node - 1]
            .iter()
            .position(|&v| v == 1)
            .expect("path nodes branch on exactly one feature");
        for f in 0..map.n_features {
            if f != chosen && x[f] != x[chosen] {
                terms.push(map.branch(node, f));
            }
        }
    }
    terms.sort_unstable();
    terms.dedup();
    BendersCut { row: source_set.row, terms, constant: 0.0 }
}

struct FlowSeparator<'a> {
    map: VarMap,
    graph: FlowGraph,
    variant: BendersVariant,
    data: &'a BinaryDataset,
    log_cuts: bool,
    max_visits: usize,
    cuts_emitted: u64,
}

impl LazySeparator for FlowSeparator<'_> {
    fn separate(&mut self, assignment: &[f64]) -> Vec<Constraint> {
        let decisions = decisions_from(&self.map, assignment);
        let leaf_flags: Vec<u8> = if self.map.has_leaf_flags() {
            self.map
                .index
                .all_nodes()
                .map(|n| assignment[self.map.leaf_flag(n)].round() as u8)
                .collect()
        } else {
            Vec::new()
        };
        let mut constraints = Vec::new();
        // all datapoints are separated per candidate and every violated
        // cut joins the pool in one batch
        for i in 0..self.data.n_rows() {
            let x = &self.data.features[i];
            let y = self.data.labels[i];
            let score = assignment[self.map.classified(i)];
            let separation = match self.variant {
                BendersVariant::Balanced => {
                    separate_balanced(&self.graph, &decisions, x, y, score, i)
                }
                BendersVariant::Regularized => {
                    separate_regularized(&self.graph, &decisions, &leaf_flags, x, y, score, i)
                }
            };
            self.max_visits = self.max_visits.max(separation.nodes_visited);
            if let Some(source_set) = separation.source_set {
                let cut = expand_cut(&source_set, &self.graph, &self.map, x, y);
                if self.log_cuts {
                    eprintln!("i={} S={} rhs_terms={}", i, source_set, cut.terms.len());
                }
                self.cuts_emitted += 1;
                constraints.push(cut.constraint(&self.map));
            }
        }
        constraints
    }
}

/// Result of a Benders solve: the tree plus solver diagnostics.
pub struct BendersOutcome {
    pub tree: TrainedTree,
    pub result: MioResult,
    /// Largest node-visit count over all separation walks.
    pub max_separation_visits: usize,
}

/// Train a tree by Benders decomposition: branch-and-bound on the
/// master with the walk separator as lazy callback over all datapoints.
pub fn solve_benders(
    data: &BinaryDataset,
    depth: u32,
    lambda: f64,
    variant: BendersVariant,
    config: &SolverConfig,
    log_cuts: bool,
) -> Result<BendersOutcome, BendersError> {
    let master = build_master(data, depth, lambda, variant)?;
    solve_master(&master, data, config, log_cuts)
}

/// Run the decomposition on an already built (and possibly further
/// constrained) master.
pub fn solve_master(
    master: &MasterModel,
    data: &BinaryDataset,
    config: &SolverConfig,
    log_cuts: bool,
) -> Result<BendersOutcome, BendersError> {
    let variant = master.variant;
    let mut separator = FlowSeparator {
        map: master.map().clone(),
        graph: master.graph().clone(),
        variant,
        data,
        log_cuts,
        max_visits: 0,
        cuts_emitted: 0,
    };
    let result = solve_mio(&master.built.model, Some(&mut separator), config)?;
    let assignment = match (&result.incumbent, result.status) {
        (Some(assignment), _) => assignment.clone(),
        (None, status) => return Err(BendersError::NoIncumbent(status)),
    };
    let mut tree = extract_tree(&master.built, &assignment, data)?;
    tree.stats.objective = result.objective.unwrap_or(f64::NAN);
    tree.stats.bound = result.bound;
    tree.stats.gap = result.gap;
    tree.stats.nodes_explored = result.stats.nodes_explored;
    tree.stats.cuts_added = result.stats.cuts_added;
    tree.stats.wall_seconds = result.stats.wall_seconds;
    Ok(BendersOutcome {
        tree,
        result,
        max_separation_visits: separator.max_visits,
    })
}

/// One affinely independent point lying on a generated cut: concrete
/// branch and prediction choices plus the score vector, all in master
/// space.
#[derive(Debug, Clone)]
pub struct WitnessPoint {
    /// Family tag 1 through 11, mirroring the construction.
    pub family: u8,
    pub decisions: DecisionValues,
    pub scores: Vec<f64>,
}

/// Everything the witness generator needs about the configuration the
/// cut was generated from.
pub struct WitnessContext<'a> {
    pub data: &'a BinaryDataset,
    pub graph: &'a FlowGraph,
    pub map: &'a VarMap,
    /// Full branching decisions the cut was separated at.
    pub decisions: &'a DecisionValues,
    pub row: usize,
    pub source_set: &'a SourceSet,
}

/// Enumerate the witness points of a walk-produced cut on a balanced
/// instance: the baseline point, prediction variations, off-path and
/// on-path branching variations, and one correct-classification point
/// per other datapoint. Every emitted point is feasible for the relaxed
/// master polytope and satisfies the cut with equality.
pub fn facet_witnesses(context: &WitnessContext<'_>) -> Vec<WitnessPoint> {
    let WitnessContext { data, graph, map, decisions, row, source_set } = context;
    let index = map.index;
    let i = *row;
    let x = &data.features[i];
    let y = data.labels[i];
    let leaf = *source_set.nodes.last().expect("cut paths end at a leaf");
    let path_branching: Vec<usize> = source_set
        .nodes
        .iter()
        .copied()
        .filter(|&n| index.is_branching(n))
        .collect();
    let chosen = |n: usize| -> usize {
        decisions.branch[n - 1]
            .iter()
            .position(|&v| v == 1)
            .expect("configuration branches everywhere")
    };

    let empty_predict = vec![vec![0u8; map.n_classes]; index.all_nodes().len()];
    let path_branch: Vec<Vec<u8>> = index
        .branching_nodes()
        .map(|n| {
            if path_branching.contains(&n) {
                decisions.branch[n - 1].clone()
            } else {
                vec![0u8; map.n_features]
            }
        })
        .collect();
    let zero_scores = vec![0.0; map.n_rows];
    let point = |family: u8, branch: Vec<Vec<u8>>, predict: Vec<Vec<u8>>, scores: Vec<f64>| {
        WitnessPoint { family, decisions: DecisionValues { branch, predict }, scores }
    };

    let mut points = Vec::new();
    // 1: the baseline: path branchings only, no predictions, no flow
    points.push(point(1, path_branch.clone(), empty_predict.clone(), zero_scores.clone()));
    // 2: relabel any leaf with a class other than the datapoint's
    for n in index.terminal_nodes() {
        for k in 0..map.n_classes {
            if k == y {
                continue;
            }
            let mut predict = empty_predict.clone();
            predict[n - 1][k] = 1;
            points.push(point(2, path_branch.clone(), predict, zero_scores.clone()));
        }
    }
    // 3: label an off-path leaf with the datapoint's class
    for n in index.terminal_nodes() {
        if n == leaf {
            continue;
        }
        let mut predict = empty_predict.clone();
        predict[n - 1][y] = 1;
        points.push(point(3, path_branch.clone(), predict, zero_scores.clone()));
    }
    // 4: label the datapoint's leaf correctly; the score rises with the
    // right-hand side
    {
        let mut predict = empty_predict.clone();
        predict[leaf - 1][y] = 1;
        let mut scores = zero_scores.clone();
        scores[i] = 1.0;
        points.push(point(4, path_branch.clone(), predict, scores));
    }
    // 5: open a branching decision anywhere off the path
    for n in index.branching_nodes() {
        if path_branching.contains(&n) {
            continue;
        }
        for f in 0..map.n_features {
            let mut branch = path_branch.clone();
            branch[n - 1][f] = 1;
            points.push(point(5, branch, empty_predict.clone(), zero_scores.clone()));
        }
    }
    // 6: close one path node entirely (a dead end)
    for &n in &path_branching {
        let mut branch = path_branch.clone();
        branch[n - 1][chosen(n)] = 0;
        points.push(point(6, branch, empty_predict.clone(), zero_scores.clone()));
    }
    // 7 and 8: swap one path node to another feature
    for &n in &path_branching {
        let original = chosen(n);
        for f in 0..map.n_features {
            if f == original {
                continue;
            }
            if x[f] == x[original] {
                // same side: the path is unchanged
                let mut branch = path_branch.clone();
                branch[n - 1][original] = 0;
                branch[n - 1][f] = 1;
                points.push(point(7, branch, empty_predict.clone(), zero_scores.clone()));
            } else {
                // the datapoint deviates at n and must reach some other
                // leaf, so keep the full original branchings elsewhere
                // and label every other leaf with its class
                let mut branch = decisions.branch.clone();
                branch[n - 1][original] = 0;
                branch[n - 1][f] = 1;
                let mut predict = empty_predict.clone();
                for m in index.terminal_nodes() {
                    if m != leaf {
                        predict[m - 1][y] = 1;
                    }
                }
                let mut scores = zero_scores.clone();
                scores[i] = 1.0;
                points.push(point(8, branch, predict, scores));
            }
        }
    }
    // 9-11: correctly classify one other datapoint under the full
    // original branchings
    for j in 0..map.n_rows {
        if j == i {
            continue;
        }
        let leaf_j = route_leaf(graph, decisions, &data.features[j]);
        let y_j = data.labels[j];
        let mut predict = empty_predict.clone();
        let mut scores = zero_scores.clone();
        let family = if y_j != y {
            predict[leaf_j - 1][y_j] = 1;
            scores[j] = 1.0;
            9
        } else if leaf_j != leaf {
            predict[leaf_j - 1][y_j] = 1;
            scores[j] = 1.0;
            10
        } else {
            predict[leaf - 1][y] = 1;
            scores[i] = 1.0;
            scores[j] = 1.0;
            11
        };
        points.push(point(family, decisions.branch.clone(), predict, scores));
    }
    points
}

/// Leaf reached by a feature vector under full branching decisions.
pub fn route_leaf(graph: &FlowGraph, decisions: &DecisionValues, x: &[u8]) -> usize {
    let index = graph.index;
    let mut node = 1usize;
    while index.is_branching(node) {
        node = open_child(index, decisions, node, x).expect("full branchings always route");
    }
    node
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The depth-1 single-feature configuration: one datapoint with
    /// feature value 0 and class 1, tree branches on the only feature
    /// and predicts class 0 at both leaves.
    fn example_instance() -> (BinaryDataset, MasterModel, DecisionValues) {
        let data = BinaryDataset::from_rows(vec![vec![0]], vec![1], 2);
        let master = build_master(&data, 1, 0.0, BendersVariant::Balanced).unwrap();
        let decisions = DecisionValues {
            branch: vec![vec![1]],
            predict: vec![vec![0, 0], vec![1, 0], vec![1, 0]],
        };
        (data, master, decisions)
    }

    #[test]
    fn zero_score_skips_the_walk() {
        let (data, master, decisions) = example_instance();
        let separation =
            separate_balanced(master.graph(), &decisions, &data.features[0], 1, 0.0, 0);
        assert_eq!(separation.source_set, None);
        assert_eq!(separation.nodes_visited, 0);
    }

    #[test]
    fn misclassified_row_yields_the_path_cut() {
        let (data, master, decisions) = example_instance();
        let separation =
            separate_balanced(master.graph(), &decisions, &data.features[0], 1, 1.0, 0);
        let source_set = separation.source_set.unwrap();
        assert_eq!(source_set.nodes, vec![1, 2]);
        assert_eq!(separation.nodes_visited, 3); // s, root, leaf

        // the expansion is exactly "score <= prediction of class 1 at
        // leaf 2": one term, no constant, never the two-leaf form
        let cut = expand_cut(&source_set, master.graph(), master.map(), &data.features[0], 1);
        assert_eq!(cut.constant, 0.0);
        assert_eq!(cut.terms, vec![master.map().prediction(2, 1)]);
        let closed = facet_form(&source_set, &decisions, master.map(), &data.features[0], 1);
        assert_eq!(cut, closed);
    }

    #[test]
    fn dominated_all_sink_cut_is_constructible_but_weaker() {
        let (data, master, _) = example_instance();
        let all = SourceSet { nodes: vec![1, 2, 3], row: 0 };
        let cut = expand_cut(&all, master.graph(), master.map(), &data.features[0], 1);
        let map = master.map();
        assert_eq!(cut.terms, vec![map.prediction(2, 1), map.prediction(3, 1)]);
        // at the point predicting class 1 at leaf 3 only, the walk cut
        // has strictly smaller right-hand side
        let mut assignment = vec![0.0; master.built.model.n_variables()];
        assignment[map.prediction(3, 1)] = 1.0;
        let walk = SourceSet { nodes: vec![1, 2], row: 0 };
        let walk_cut = expand_cut(&walk, master.graph(), map, &data.features[0], 1);
        assert!(walk_cut.rhs_at(&assignment) < cut.rhs_at(&assignment));
    }

    #[test]
    fn root_only_source_set_cuts_the_source_arc() {
        let (data, master, _) = example_instance();
        let set = SourceSet { nodes: vec![], row: 0 };
        let cut = expand_cut(&set, master.graph(), master.map(), &data.features[0], 1);
        assert_eq!(cut.constant, 1.0);
        assert!(cut.terms.is_empty());
    }

    #[test]
    fn correctly_classified_row_returns_none() {
        // figure-style depth-2 configuration: datapoint 1 is routed to a
        // leaf whose label matches
        let data = BinaryDataset::from_rows(vec![vec![0, 1], vec![1, 0]], vec![0, 1], 2);
        let master = build_master(&data, 2, 0.0, BendersVariant::Balanced).unwrap();
        let decisions = DecisionValues {
            // root on feature 0, node 2 on feature 1, node 3 on feature 1
            branch: vec![vec![1, 0], vec![0, 1], vec![0, 1]],
            predict: {
                let mut p = vec![vec![0u8, 0u8]; 7];
                p[5 - 1] = vec![1, 0]; // leaf 5 predicts class 0
                p[6 - 1] = vec![0, 0];
                p
            },
        };
        // row 0: x=(0,1): left at root, right at node 2 -> leaf 5, label 0: correct
        let hit = separate_balanced(master.graph(), &decisions, &data.features[0], 0, 1.0, 0);
        assert_eq!(hit.source_set, None);
        // row 1: x=(1,0): right at root, left at node 3 -> leaf 6, unlabeled
        let miss = separate_balanced(master.graph(), &decisions, &data.features[1], 1, 1.0, 1);
        assert_eq!(miss.source_set.unwrap().nodes, vec![1, 3, 6]);
    }

    #[test]
    fn regularized_walk_stops_at_flagged_leaves() {
        let data = BinaryDataset::from_rows(vec![vec![0]], vec![1], 2);
        let master = build_master(&data, 2, 0.0, BendersVariant::Regularized).unwrap();
        // root itself is a leaf predicting the wrong class
        let decisions = DecisionValues {
            branch: vec![vec![0]; 3],
            predict: vec![vec![1, 0]; 7],
        };
        let leaf_flags = vec![1, 0, 0, 0, 0, 0, 0];
        let separation = separate_regularized(
            master.graph(),
            &decisions,
            &leaf_flags,
            &data.features[0],
            1,
            1.0,
            0,
        );
        assert_eq!(separation.source_set.unwrap().nodes, vec![1]);
        assert_eq!(separation.nodes_visited, 2);
    }

    #[test]
    fn example_solved_end_to_end_adds_only_the_strong_cut() {
        let (data, master, _) = example_instance();
        let outcome = solve_benders(
            &data,
            1,
            0.0,
            BendersVariant::Balanced,
            &SolverConfig::default(),
            false,
        )
        .unwrap();
        assert_eq!(outcome.result.status, MioStatus::Optimal);
        assert!((outcome.result.objective.unwrap() - 1.0).abs() < 1e-9);
        // the learned tree classifies the single row correctly
        assert_eq!(outcome.tree.predict(&data.features[0]), 1);
        assert!(outcome.max_separation_visits <= 3);
        // at most the one strong inequality ever joins the pool, and
        // only when a misclassifying candidate shows up first
        assert!(outcome.result.stats.cuts_added <= 1);
        let _ = master;
    }

    #[test]
    fn benders_matches_direct_formulation_on_small_data() {
        let data = BinaryDataset::from_rows(
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![0, 1], vec![1, 0]],
            vec![0, 1, 1, 0, 1, 0],
            2,
        );
        let direct = crate::formulations::build_flow_balanced(&data, 2).unwrap();
        let direct_result =
            solve_mio(&direct.model, None, &SolverConfig::default()).unwrap();
        let outcome = solve_benders(
            &data,
            2,
            0.0,
            BendersVariant::Balanced,
            &SolverConfig::default(),
            false,
        )
        .unwrap();
        assert_eq!(
            direct_result.objective.unwrap().round() as i64,
            outcome.result.objective.unwrap().round() as i64
        );
    }

    #[test]
    fn witness_family_count_matches_the_polytope_dimensions() {
        let data = BinaryDataset::from_rows(
            vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1], vec![1, 1, 1]],
            vec![0, 1, 1, 0],
            2,
        );
        let master = build_master(&data, 2, 0.0, BendersVariant::Balanced).unwrap();
        let decisions = DecisionValues {
            branch: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            predict: vec![vec![0u8, 0u8]; 7],
        };
        let x = &data.features[0];
        let separation = separate_balanced(master.graph(), &decisions, x, 0, 1.0, 0);
        let source_set = separation.source_set.unwrap();
        let context = WitnessContext {
            data: &data,
            graph: master.graph(),
            map: master.map(),
            decisions: &decisions,
            row: 0,
            source_set: &source_set,
        };
        let points = facet_witnesses(&context);
        let map = master.map();
        let expected = map.index.n_branching() * map.n_features
            + map.index.n_terminal() * map.n_classes
            + map.n_rows;
        assert_eq!(points.len(), expected);
    }
}
