//! Mixed-integer models for optimal trees and the decoding of solver
//! assignments back into trees.
//!
//! Three flow formulations share one variable layout: branch selection
//! per candidate node, prediction per node and class, optional leaf
//! flags, and one flow variable per datapoint and arc. A unit of flow
//! from the source to a sink certifies a (correctly) classified row, so
//! the objective is a sum of sink-arc flows. The axis-aligned big-M
//! baseline has its own layout and is kept for relaxation-strength and
//! optimum-equality comparisons.

use thiserror::Error;

use crate::constraints::ObjectiveKind;
use crate::dataset::BinaryDataset;
use crate::flowgraph::{build_graph, FlowGraph, GraphError, GraphVariant, TreeIndex};
use crate::linopt::{solve_lp, Constraint, LinearModel, LinoptError, LpStatus, Relation};
use crate::tree::{TrainStats, TrainedTree, TreeNode, TREE_SCHEMA_VERSION};

/// Integrality tolerance used when decoding assignments.
pub const INT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("linear solver: {0}")]
    Linopt(#[from] LinoptError),
    #[error("dataset needs at least two classes")]
    TooFewClasses,
    #[error("regularization weight {0} outside [0, 1]")]
    BadLambda(f64),
    #[error("class {0} has no training rows")]
    EmptyClass(usize),
    #[error("objective {0:?} requires the complete-flow formulation")]
    ObjectiveNeedsCompleteFlow(ObjectiveKind),
    #[error("assignment is not integral at variable {0}")]
    NonIntegralAssignment(usize),
    #[error("assignment violates the model by {0:.3e}")]
    InfeasibleAssignment(f64),
    #[error("LP relaxation is {0}")]
    RelaxationNotOptimal(String),
    #[error("side constraint is incompatible: {0}")]
    IncompatibleConstraint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    FlowBalanced,
    FlowRegularized,
    CompleteFlow,
    OctBaseline,
}

/// What a user asks for: formulation, depth, regularization and
/// objective. Side constraints attach afterwards.
#[derive(Debug, Clone)]
pub struct FormulationSpec {
    pub kind: FormulationKind,
    pub depth: u32,
    pub lambda: f64,
    pub objective: ObjectiveKind,
}

impl FormulationSpec {
    pub fn new(kind: FormulationKind, depth: u32) -> Self {
        FormulationSpec {
            kind,
            depth,
            lambda: 0.0,
            objective: ObjectiveKind::Accuracy,
        }
    }
}

/// Which nodes carry prediction variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionNodes {
    TerminalOnly,
    AllNodes,
}

/// Maps the structured variables of a flow-family model onto the flat
/// column order: branch block, prediction block, leaf-flag block, flow
/// block (row-major), then any per-row score block. Builders append
/// auxiliary variables after these.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub index: TreeIndex,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_rows: usize,
    pub prediction_nodes: PredictionNodes,
    pub n_arcs: usize,
    b_offset: usize,
    w_offset: usize,
    p_offset: Option<usize>,
    z_offset: Option<usize>,
    g_offset: Option<usize>,
}

impl VarMap {
    pub(crate) fn layout(
        index: TreeIndex,
        n_features: usize,
        n_classes: usize,
        n_rows: usize,
        prediction_nodes: PredictionNodes,
        n_arcs: usize,
        b_offset: usize,
        w_offset: usize,
        p_offset: Option<usize>,
        z_offset: Option<usize>,
        g_offset: Option<usize>,
    ) -> Self {
        VarMap {
            index,
            n_features,
            n_classes,
            n_rows,
            prediction_nodes,
            n_arcs,
            b_offset,
            w_offset,
            p_offset,
            z_offset,
            g_offset,
        }
    }

    /// Branch-selection variable of (branching node, feature).
    pub fn branch(&self, node: usize, feature: usize) -> usize {
        debug_assert!(self.index.is_branching(node));
        self.b_offset + (node - 1) * self.n_features + feature
    }

    /// Prediction variable of (node, class).
    pub fn prediction(&self, node: usize, class: usize) -> usize {
        let row = match self.prediction_nodes {
            PredictionNodes::TerminalOnly => {
                debug_assert!(self.index.is_terminal(node));
                node - 1 - self.index.n_branching()
            }
            PredictionNodes::AllNodes => node - 1,
        };
        self.w_offset + row * self.n_classes + class
    }

    /// Nodes that carry prediction variables.
    pub fn prediction_node_range(&self) -> std::ops::Range<usize> {
        match self.prediction_nodes {
            PredictionNodes::TerminalOnly => self.index.terminal_nodes(),
            PredictionNodes::AllNodes => self.index.all_nodes(),
        }
    }

    /// Leaf flag of a node (formulations with prunable trees).
    pub fn leaf_flag(&self, node: usize) -> usize {
        self.p_offset.expect("formulation has no leaf flags") + node - 1
    }

    pub fn has_leaf_flags(&self) -> bool {
        self.p_offset.is_some()
    }

    /// Flow variable of a row over an arc (by canonical arc position).
    pub fn arc_flow(&self, row: usize, arc: usize) -> usize {
        self.z_offset.expect("model has no flow variables") + row * self.n_arcs + arc
    }

    pub fn has_flows(&self) -> bool {
        self.z_offset.is_some()
    }

    /// Per-row classification score of a decomposition master.
    pub fn classified(&self, row: usize) -> usize {
        self.g_offset.expect("model has no per-row scores") + row
    }
}

/// Variable layout of the axis-aligned big-M baseline.
#[derive(Debug, Clone)]
pub struct OctMap {
    pub index: TreeIndex,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_rows: usize,
    b_offset: usize,
    split_offset: usize,
    w_offset: usize,
    label_offset: usize,
    assign_offset: usize,
    miss_offset: usize,
    class_count_offset: usize,
    count_offset: usize,
}

impl OctMap {
    pub fn branch(&self, node: usize, feature: usize) -> usize {
        self.b_offset + (node - 1) * self.n_features + feature
    }

    /// Split indicator of a branching node (1 when the node tests a
    /// feature, 0 when pruned).
    pub fn splits(&self, node: usize) -> usize {
        self.split_offset + node - 1
    }

    pub fn prediction(&self, node: usize, class: usize) -> usize {
        let row = node - 1 - self.index.n_branching();
        self.w_offset + row * self.n_classes + class
    }

    /// Indicator that a terminal carries any label.
    pub fn labeled(&self, node: usize) -> usize {
        self.label_offset + node - 1 - self.index.n_branching()
    }

    /// Assignment indicator of (row, terminal).
    pub fn assigned(&self, row: usize, node: usize) -> usize {
        self.assign_offset + row * self.index.n_terminal() + (node - 1 - self.index.n_branching())
    }

    /// Misclassification count of a terminal.
    pub fn missed(&self, node: usize) -> usize {
        self.miss_offset + node - 1 - self.index.n_branching()
    }

    /// Number of rows of one class landing at a terminal.
    pub fn class_count(&self, node: usize, class: usize) -> usize {
        let row = node - 1 - self.index.n_branching();
        self.class_count_offset + row * self.n_classes + class
    }

    /// Total number of rows landing at a terminal.
    pub fn count(&self, node: usize) -> usize {
        self.count_offset + node - 1 - self.index.n_branching()
    }
}

#[derive(Debug, Clone)]
pub enum Layout {
    Flow(VarMap),
    Oct(OctMap),
}

/// A built model plus everything needed to decode its solutions.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: LinearModel,
    pub layout: Layout,
    pub kind: FormulationKind,
    pub lambda: f64,
    pub graph: Option<FlowGraph>,
}

impl BuiltModel {
    pub fn flow_map(&self) -> &VarMap {
        match &self.layout {
            Layout::Flow(map) => map,
            Layout::Oct(_) => panic!("not a flow-family model"),
        }
    }
}

fn check_classes(data: &BinaryDataset) -> Result<(), FormulationError> {
    if data.n_classes() < 2 {
        return Err(FormulationError::TooFewClasses);
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<(), FormulationError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FormulationError::BadLambda(lambda));
    }
    Ok(())
}

/// Features of a row whose value routes it down the given side
/// (0 = left, 1 = right).
fn side_features(x: &[u8], side: u8) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|&(_, &v)| v == side)
        .map(|(f, _)| f)
        .collect()
}

fn branch_block(model: &mut LinearModel, index: TreeIndex, n_features: usize, objective: f64) {
    for n in index.branching_nodes() {
        for f in 0..n_features {
            model.add_binary(format!("b_n{n}_f{f}"), objective);
        }
    }
}

/// The tree with every prediction at maximum depth and flows only for
/// correctly classified rows.
pub fn build_flow_balanced(
    data: &BinaryDataset,
    depth: u32,
) -> Result<BuiltModel, FormulationError> {
    check_classes(data)?;
    let graph = build_graph(depth, GraphVariant::Balanced, data.n_classes())?;
    let index = graph.index;
    let (n_rows, n_features, n_classes) = (data.n_rows(), data.n_features(), data.n_classes());

    let mut model = LinearModel::new();
    branch_block(&mut model, index, n_features, 0.0);
    let w_offset = model.n_variables();
    for n in index.terminal_nodes() {
        for k in 0..n_classes {
            model.add_binary(format!("w_n{n}_k{k}"), 0.0);
        }
    }
    let z_offset = model.n_variables();
    let n_nodes = index.all_nodes().len();
    for i in 0..n_rows {
        for (pos, _) in graph.arcs.iter().enumerate() {
            // sink-arc flows carry the unit objective
            let is_sink = pos >= n_nodes;
            model.add_variable(
                format!("z_i{i}_a{pos}"),
                0.0,
                1.0,
                true,
                if is_sink { 1.0 } else { 0.0 },
            );
        }
    }
    let map = VarMap::layout(
        index,
        n_features,
        n_classes,
        n_rows,
        PredictionNodes::TerminalOnly,
        graph.n_arcs(),
        0,
        w_offset,
        None,
        Some(z_offset),
        None,
    );

    // one branching feature per internal node
    for n in index.branching_nodes() {
        let terms = (0..n_features).map(|f| (map.branch(n, f), 1.0)).collect();
        model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
    }
    // one predicted class per leaf
    for n in index.terminal_nodes() {
        let terms = (0..n_classes).map(|k| (map.prediction(n, k), 1.0)).collect();
        model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
    }
    for (i, x) in data.features.iter().enumerate() {
        let y = data.labels[i];
        // conservation at branching nodes
        for n in index.branching_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.in_arc(n)), 1.0),
                    (map.arc_flow(i, graph.in_arc(index.left(n))), -1.0),
                    (map.arc_flow(i, graph.in_arc(index.right(n))), -1.0),
                ],
                Relation::Eq,
                0.0,
            ));
        }
        // conservation at leaves
        for n in index.terminal_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.in_arc(n)), 1.0),
                    (map.arc_flow(i, graph.sink_arc(n)), -1.0),
                ],
                Relation::Eq,
                0.0,
            ));
        }
        // at most one unit enters the graph
        model.add_constraint(Constraint::new(
            vec![(map.arc_flow(i, graph.in_arc(1)), 1.0)],
            Relation::Le,
            1.0,
        ));
        // a row may only move down an arc whose test it satisfies
        for n in index.branching_nodes() {
            for (child, side) in [(index.left(n), 0u8), (index.right(n), 1u8)] {
                let mut terms = vec![(map.arc_flow(i, graph.in_arc(child)), 1.0)];
                for f in side_features(x, side) {
                    terms.push((map.branch(n, f), -1.0));
                }
                model.add_constraint(Constraint::new(terms, Relation::Le, 0.0));
            }
        }
        // reaching the sink requires the matching prediction
        for n in index.terminal_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.sink_arc(n)), 1.0),
                    (map.prediction(n, y), -1.0),
                ],
                Relation::Le,
                0.0,
            ));
        }
    }

    Ok(BuiltModel {
        model,
        layout: Layout::Flow(map),
        kind: FormulationKind::FlowBalanced,
        lambda: 0.0,
        graph: Some(graph),
    })
}

fn leaf_structure_constraints(model: &mut LinearModel, map: &VarMap) {
    let index = map.index;
    // each node either branches, predicts, or sits under a prediction
    for n in index.branching_nodes() {
        let mut terms: Vec<(usize, f64)> =
            (0..map.n_features).map(|f| (map.branch(n, f), 1.0)).collect();
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
    // predictions happen exactly at leaves
    for n in index.all_nodes() {
        let mut terms: Vec<(usize, f64)> =
            (0..map.n_classes).map(|k| (map.prediction(n, k), 1.0)).collect();
        terms.push((map.leaf_flag(n), -1.0));
        model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
    }
}

/// The prunable tree of maximum depth d: leaves may appear anywhere and
/// branching is charged lambda per split. Flows still track correctly
/// classified rows only.
pub fn build_flow_regularized(
    data: &BinaryDataset,
    depth: u32,
    lambda: f64,
) -> Result<BuiltModel, FormulationError> {
    check_classes(data)?;
    check_lambda(lambda)?;
    let graph = build_graph(depth, GraphVariant::Imbalanced, data.n_classes())?;
    let index = graph.index;
    let (n_rows, n_features, n_classes) = (data.n_rows(), data.n_features(), data.n_classes());

    let mut model = LinearModel::new();
    branch_block(&mut model, index, n_features, -lambda);
    let w_offset = model.n_variables();
    for n in index.all_nodes() {
        for k in 0..n_classes {
            model.add_binary(format!("w_n{n}_k{k}"), 0.0);
        }
    }
    let p_offset = model.n_variables();
    for n in index.all_nodes() {
        model.add_binary(format!("p_n{n}"), 0.0);
    }
    let z_offset = model.n_variables();
    let n_nodes = index.all_nodes().len();
    for i in 0..n_rows {
        for (pos, _) in graph.arcs.iter().enumerate() {
            let is_sink = pos >= n_nodes;
            model.add_variable(
                format!("z_i{i}_a{pos}"),
                0.0,
                1.0,
                true,
                if is_sink { 1.0 - lambda } else { 0.0 },
            );
        }
    }
    let map = VarMap::layout(
        index,
        n_features,
        n_classes,
        n_rows,
        PredictionNodes::AllNodes,
        graph.n_arcs(),
        0,
        w_offset,
        Some(p_offset),
        Some(z_offset),
        None,
    );

    leaf_structure_constraints(&mut model, &map);
    for (i, x) in data.features.iter().enumerate() {
        let y = data.labels[i];
        for n in index.branching_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.in_arc(n)), 1.0),
                    (map.arc_flow(i, graph.in_arc(index.left(n))), -1.0),
                    (map.arc_flow(i, graph.in_arc(index.right(n))), -1.0),
                    (map.arc_flow(i, graph.sink_arc(n)), -1.0),
                ],
                Relation::Eq,
                0.0,
            ));
        }
        for n in index.terminal_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.in_arc(n)), 1.0),
                    (map.arc_flow(i, graph.sink_arc(n)), -1.0),
                ],
                Relation::Eq,
                0.0,
            ));
        }
        model.add_constraint(Constraint::new(
            vec![(map.arc_flow(i, graph.in_arc(1)), 1.0)],
            Relation::Le,
            1.0,
        ));
        for n in index.branching_nodes() {
            for (child, side) in [(index.left(n), 0u8), (index.right(n), 1u8)] {
                let mut terms = vec![(map.arc_flow(i, graph.in_arc(child)), 1.0)];
                for f in side_features(x, side) {
                    terms.push((map.branch(n, f), -1.0));
                }
                model.add_constraint(Constraint::new(terms, Relation::Le, 0.0));
            }
        }
        for n in index.all_nodes() {
            model.add_constraint(Constraint::new(
                vec![
                    (map.arc_flow(i, graph.sink_arc(n)), 1.0),
                    (map.prediction(n, y), -1.0),
                ],
                Relation::Le,
                0.0,
            ));
        }
    }

    Ok(BuiltModel {
        model,
        layout: Layout::Flow(map),
        kind: FormulationKind::FlowRegularized,
        lambda,
        graph: Some(graph),
    })
}

/// The prunable tree with one sink per class. Every row flows to the
/// sink of its predicted class, so class-conditional objectives and
/// rate constraints can see misclassified rows too.
pub fn build_complete_flow(
    data: &BinaryDataset,
    depth: u32,
    objective: ObjectiveKind,
) -> Result<BuiltModel, FormulationError> {
    check_classes(data)?;
    let graph = build_graph(depth, GraphVariant::Complete, data.n_classes())?;
    let index = graph.index;
    let (n_rows, n_features, n_classes) = (data.n_rows(), data.n_features(), data.n_classes());

    let mut model = LinearModel::new();
    branch_block(&mut model, index, n_features, 0.0);
    let w_offset = model.n_variables();
    for n in index.all_nodes() {
        for k in 0..n_classes {
            model.add_binary(format!("w_n{n}_k{k}"), 0.0);
        }
    }
    let p_offset = model.n_variables();
    for n in index.all_nodes() {
        model.add_binary(format!("p_n{n}"), 0.0);
    }
    let z_offset = model.n_variables();
    for i in 0..n_rows {
        for (pos, _) in graph.arcs.iter().enumerate() {
            model.add_variable(format!("z_i{i}_a{pos}"), 0.0, 1.0, true, 0.0);
        }
    }
    let map = VarMap::layout(
        index,
        n_features,
        n_classes,
        n_rows,
        PredictionNodes::AllNodes,
        graph.n_arcs(),
        0,
        w_offset,
        Some(p_offset),
        Some(z_offset),
        None,
    );

    leaf_structure_constraints(&mut model, &map);
    for (i, x) in data.features.iter().enumerate() {
        for n in index.branching_nodes() {
            let mut terms = vec![
                (map.arc_flow(i, graph.in_arc(n)), 1.0),
                (map.arc_flow(i, graph.in_arc(index.left(n))), -1.0),
                (map.arc_flow(i, graph.in_arc(index.right(n))), -1.0),
            ];
            for k in 0..n_classes {
                terms.push((map.arc_flow(i, graph.class_sink_arc(n, k)), -1.0));
            }
            model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
        }
        for n in index.terminal_nodes() {
            let mut terms = vec![(map.arc_flow(i, graph.in_arc(n)), 1.0)];
            for k in 0..n_classes {
                terms.push((map.arc_flow(i, graph.class_sink_arc(n, k)), -1.0));
            }
            model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
        }
        // every row enters the graph: misclassified flow is tracked too
        model.add_constraint(Constraint::new(
            vec![(map.arc_flow(i, graph.in_arc(1)), 1.0)],
            Relation::Eq,
            1.0,
        ));
        for n in index.branching_nodes() {
            for (child, side) in [(index.left(n), 0u8), (index.right(n), 1u8)] {
                let mut terms = vec![(map.arc_flow(i, graph.in_arc(child)), 1.0)];
                for f in side_features(x, side) {
                    terms.push((map.branch(n, f), -1.0));
                }
                model.add_constraint(Constraint::new(terms, Relation::Le, 0.0));
            }
        }
        for n in index.all_nodes() {
            for k in 0..n_classes {
                model.add_constraint(Constraint::new(
                    vec![
                        (map.arc_flow(i, graph.class_sink_arc(n, k)), 1.0),
                        (map.prediction(n, k), -1.0),
                    ],
                    Relation::Le,
                    0.0,
                ));
            }
        }
    }

    let mut built = BuiltModel {
        model,
        layout: Layout::Flow(map),
        kind: FormulationKind::CompleteFlow,
        lambda: 0.0,
        graph: Some(graph),
    };
    crate::constraints::set_objective(&mut built, objective, data)?;
    Ok(built)
}

/// The axis-aligned baseline with big-M misclassification counting.
/// The cut-off value of each test is identified with the split
/// indicator, which is exact for binary features. `balanced` pins every
/// candidate node to branch and every terminal to carry a label.
pub fn build_oct_baseline(
    data: &BinaryDataset,
    depth: u32,
    lambda: f64,
    balanced: bool,
) -> Result<BuiltModel, FormulationError> {
    check_classes(data)?;
    check_lambda(lambda)?;
    let index = TreeIndex::new(depth)?;
    let (n_rows, n_features, n_classes) = (data.n_rows(), data.n_features(), data.n_classes());
    let big_m = n_rows as f64;

    let mut model = LinearModel::new();
    branch_block(&mut model, index, n_features, 0.0);
    let split_offset = model.n_variables();
    for n in index.branching_nodes() {
        model.add_variable(
            format!("split_n{n}"),
            if balanced { 1.0 } else { 0.0 },
            1.0,
            true,
            -lambda,
        );
    }
    let w_offset = model.n_variables();
    for n in index.terminal_nodes() {
        for k in 0..n_classes {
            model.add_binary(format!("w_n{n}_k{k}"), 0.0);
        }
    }
    let label_offset = model.n_variables();
    for n in index.terminal_nodes() {
        model.add_variable(
            format!("labeled_n{n}"),
            if balanced { 1.0 } else { 0.0 },
            1.0,
            true,
            0.0,
        );
    }
    let assign_offset = model.n_variables();
    for i in 0..n_rows {
        for n in index.terminal_nodes() {
            model.add_binary(format!("assign_i{i}_n{n}"), 0.0);
        }
    }
    let miss_offset = model.n_variables();
    for n in index.terminal_nodes() {
        // misclassification counts are nonnegative by definition
        model.add_variable(format!("miss_n{n}"), 0.0, f64::INFINITY, false, -(1.0 - lambda));
    }
    let class_count_offset = model.n_variables();
    for n in index.terminal_nodes() {
        for k in 0..n_classes {
            model.add_variable(format!("count_n{n}_k{k}"), 0.0, big_m, false, 0.0);
        }
    }
    let count_offset = model.n_variables();
    for n in index.terminal_nodes() {
        model.add_variable(format!("count_n{n}"), 0.0, big_m, false, 0.0);
    }
    model.objective_constant = (1.0 - lambda) * n_rows as f64;

    let map = OctMap {
        index,
        n_features,
        n_classes,
        n_rows,
        b_offset: 0,
        split_offset,
        w_offset,
        label_offset,
        assign_offset,
        miss_offset,
        class_count_offset,
        count_offset,
    };

    for n in index.terminal_nodes() {
        for k in 0..n_classes {
            // missed >= count - class_count - M (1 - w)
            model.add_constraint(Constraint::new(
                vec![
                    (map.missed(n), 1.0),
                    (map.count(n), -1.0),
                    (map.class_count(n, k), 1.0),
                    (map.prediction(n, k), -big_m),
                ],
                Relation::Ge,
                -big_m,
            ));
            // missed <= count - class_count + M w
            model.add_constraint(Constraint::new(
                vec![
                    (map.missed(n), 1.0),
                    (map.count(n), -1.0),
                    (map.class_count(n, k), 1.0),
                    (map.prediction(n, k), -big_m),
                ],
                Relation::Le,
                0.0,
            ));
        }
        for k in 0..n_classes {
            let mut terms = vec![(map.class_count(n, k), 1.0)];
            for i in 0..n_rows {
                if data.labels[i] == k {
                    terms.push((map.assigned(i, n), -1.0));
                }
            }
            model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
        }
        let mut terms = vec![(map.count(n), 1.0)];
        for i in 0..n_rows {
            terms.push((map.assigned(i, n), -1.0));
        }
        model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
        // labeled = sum of predictions
        let mut terms: Vec<(usize, f64)> =
            (0..n_classes).map(|k| (map.prediction(n, k), 1.0)).collect();
        terms.push((map.labeled(n), -1.0));
        model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
        for i in 0..n_rows {
            model.add_constraint(Constraint::new(
                vec![(map.assigned(i, n), 1.0), (map.labeled(n), -1.0)],
                Relation::Le,
                0.0,
            ));
        }
    }
    for i in 0..n_rows {
        let terms = index.terminal_nodes().map(|n| (map.assigned(i, n), 1.0)).collect();
        model.add_constraint(Constraint::new(terms, Relation::Eq, 1.0));
    }
    // routing consistency through the ancestors of each terminal; the
    // big-M cut-off variable is identified with the split indicator
    for i in 0..n_rows {
        let x = &data.features[i];
        for n in index.terminal_nodes() {
            let (lefts, rights) = index.left_right_ancestor_sets(n);
            for m in rights {
                let mut terms: Vec<(usize, f64)> = side_features(x, 1)
                    .into_iter()
                    .map(|f| (map.branch(m, f), 1.0))
                    .collect();
                terms.push((map.splits(m), -1.0));
                terms.push((map.assigned(i, n), -1.0));
                model.add_constraint(Constraint::new(terms, Relation::Ge, -1.0));
            }
            for m in lefts {
                let mut terms: Vec<(usize, f64)> = side_features(x, 1)
                    .into_iter()
                    .map(|f| (map.branch(m, f), 1.0))
                    .collect();
                terms.push((map.splits(m), -1.0));
                terms.push((map.assigned(i, n), 2.0));
                model.add_constraint(Constraint::new(terms, Relation::Le, 1.0));
            }
        }
    }
    for n in index.branching_nodes() {
        let mut terms: Vec<(usize, f64)> =
            (0..n_features).map(|f| (map.branch(n, f), 1.0)).collect();
        terms.push((map.splits(n), -1.0));
        model.add_constraint(Constraint::new(terms, Relation::Eq, 0.0));
    }
    for n in index.branching_nodes() {
        if let Some(parent) = index.parent(n) {
            model.add_constraint(Constraint::new(
                vec![(map.splits(n), 1.0), (map.splits(parent), -1.0)],
                Relation::Le,
                0.0,
            ));
        }
    }

    Ok(BuiltModel {
        model,
        layout: Layout::Oct(map),
        kind: FormulationKind::OctBaseline,
        lambda,
        graph: None,
    })
}

fn assert_integral(built: &BuiltModel, assignment: &[f64]) -> Result<(), FormulationError> {
    for (v, var) in built.model.variables.iter().enumerate() {
        if var.integral && (assignment[v] - assignment[v].round()).abs() > INT_EPS {
            return Err(FormulationError::NonIntegralAssignment(v));
        }
    }
    let violation = built.model.max_violation(assignment);
    if violation > 1e-5 {
        return Err(FormulationError::InfeasibleAssignment(violation));
    }
    Ok(())
}

fn is_one(value: f64) -> bool {
    (value - 1.0).abs() <= 0.5
}

/// Decode an integral assignment into the tree it describes.
pub fn extract_tree(
    built: &BuiltModel,
    assignment: &[f64],
    data: &BinaryDataset,
) -> Result<TrainedTree, FormulationError> {
    assert_integral(built, assignment)?;
    let mut nodes = match &built.layout {
        Layout::Flow(map) => {
            let index = map.index;
            let mut nodes = Vec::new();
            let mut stack = vec![1usize];
            while let Some(n) = stack.pop() {
                let is_leaf = if map.has_leaf_flags() {
                    is_one(assignment[map.leaf_flag(n)])
                } else {
                    index.is_terminal(n)
                };
                if is_leaf {
                    let class = (0..map.n_classes)
                        .find(|&k| is_one(assignment[map.prediction(n, k)]))
                        .expect("leaf without prediction");
                    nodes.push(TreeNode { id: n, leaf: true, feature: None, class: Some(class) });
                } else {
                    let feature = (0..map.n_features)
                        .find(|&f| is_one(assignment[map.branch(n, f)]))
                        .expect("branching node without feature");
                    nodes.push(TreeNode {
                        id: n,
                        leaf: false,
                        feature: Some(feature),
                        class: None,
                    });
                    stack.push(index.left(n));
                    stack.push(index.right(n));
                }
            }
            nodes
        }
        Layout::Oct(map) => {
            let index = map.index;
            let mut nodes = Vec::new();
            for n in index.branching_nodes() {
                let feature = if is_one(assignment[map.splits(n)]) {
                    Some(
                        (0..map.n_features)
                            .find(|&f| is_one(assignment[map.branch(n, f)]))
                            .expect("split without feature"),
                    )
                } else {
                    // pruned interior nodes route everything right
                    None
                };
                nodes.push(TreeNode { id: n, leaf: false, feature, class: None });
            }
            for n in index.terminal_nodes() {
                // unlabeled terminals receive no training rows; give
                // them the first class so prediction stays total
                let class = (0..map.n_classes)
                    .find(|&k| is_one(assignment[map.prediction(n, k)]))
                    .unwrap_or(0);
                nodes.push(TreeNode { id: n, leaf: true, feature: None, class: Some(class) });
            }
            nodes
        }
    };
    nodes.sort_by_key(|n| n.id);
    let tree = TrainedTree {
        schema_version: TREE_SCHEMA_VERSION,
        depth: match &built.layout {
            Layout::Flow(map) => map.index.depth,
            Layout::Oct(map) => map.index.depth,
        },
        nodes,
        feature_names: data.feature_names.clone(),
        class_names: data.class_names.clone(),
        encoding: data.encoding_map.clone(),
        stats: TrainStats::default(),
    };
    tree.validate().expect("decoded tree is structurally sound");
    Ok(tree)
}

/// Objective of the linear relaxation; an upper bound on the integer
/// optimum.
pub fn lp_bound(model: &LinearModel) -> Result<f64, FormulationError> {
    let solution = solve_lp(model, true)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective),
        LpStatus::Infeasible => Err(FormulationError::RelaxationNotOptimal("infeasible".into())),
        LpStatus::Unbounded => Err(FormulationError::RelaxationNotOptimal("unbounded".into())),
    }
}
