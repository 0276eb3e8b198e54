//! Alternative objectives and side constraints for the flow models:
//! size regularizers, rate floors for imbalanced data, and group
//! fairness. Everything here is a pure transform of a built model.
//!
//! Empirical rates are kept exact by multiplying each rate inequality
//! through by the product of its denominators, so all constraint
//! coefficients stay integral; only right-hand sides pick up the
//! user-supplied tolerance.

use crate::dataset::BinaryDataset;
use crate::formulations::{BuiltModel, FormulationError, FormulationKind, Layout};
use crate::linopt::{Constraint, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Count of correctly classified rows.
    Accuracy,
    /// Mean of per-class accuracies.
    BalancedAccuracy,
    /// Minimum per-class accuracy, linearized through its epigraph.
    WorstCaseAccuracy,
    /// True positive rate of the positive class (binary only), usually
    /// paired with a specificity floor.
    SensitivityMax,
}

/// Tree-size regularizers from the prunable formulations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// At most this many branching nodes.
    SparsityBudget(u32),
    /// At most this many distinct features used anywhere in the tree.
    FeatureBudget(u32),
    /// Every leaf must receive at least this much flow. Under the
    /// correct-flow formulation only correctly classified rows count;
    /// under the complete-flow formulation every row landing at the
    /// leaf counts.
    MinLeafSupport(u32),
}

/// Rate floors for imbalanced binary classification (complete flow).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFloor {
    Recall(f64),
    Precision(f64),
    Specificity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessKind {
    StatisticalParity,
    ConditionalStatisticalParity,
    PredictiveEquality,
    EqualizedOdds,
    EqualOpportunity,
}

/// A parsed side-constraint request, as it arrives from the CLI.
#[derive(Debug, Clone)]
pub enum SideConstraint {
    Regularizer(Regularizer),
    RateFloor(RateFloor),
    Fairness {
        kind: FairnessKind,
        delta: f64,
        /// Name of the protected column in the raw table.
        protected: String,
        /// Name of the legitimate-factor column, for the conditional
        /// variant.
        legitimate: Option<String>,
    },
}

const POSITIVE: usize = 1;

fn flow_map(built: &BuiltModel) -> Result<&crate::formulations::VarMap, FormulationError> {
    match &built.layout {
        Layout::Flow(map) => Ok(map),
        Layout::Oct(_) => Err(FormulationError::IncompatibleConstraint(
            "side constraints attach to the flow formulations".into(),
        )),
    }
}

/// Sum of sink flows of one row (the row's "classified" indicator for
/// correct-flow models, or its predicted-class indicator per class for
/// the complete model).
fn sink_terms(
    built: &BuiltModel,
    row: usize,
    class: Option<usize>,
    coefficient: f64,
) -> Vec<(usize, f64)> {
    let map = built.flow_map();
    let graph = built.graph.as_ref().expect("flow models carry their graph");
    let mut terms = Vec::new();
    match built.kind {
        FormulationKind::CompleteFlow => {
            let k = class.expect("complete flow needs a sink class");
            for n in map.index.all_nodes() {
                terms.push((map.arc_flow(row, graph.class_sink_arc(n, k)), coefficient));
            }
        }
        FormulationKind::FlowRegularized => {
            for n in map.index.all_nodes() {
                terms.push((map.arc_flow(row, graph.sink_arc(n)), coefficient));
            }
        }
        FormulationKind::FlowBalanced => {
            for n in map.index.terminal_nodes() {
                terms.push((map.arc_flow(row, graph.sink_arc(n)), coefficient));
            }
        }
        FormulationKind::OctBaseline => unreachable!("guarded by flow_map"),
    }
    terms
}

/// Attach a tree-size regularizer.
pub fn attach_regularizer(
    built: &mut BuiltModel,
    regularizer: Regularizer,
) -> Result<(), FormulationError> {
    let map = flow_map(built)?.clone();
    match regularizer {
        Regularizer::SparsityBudget(budget) => {
            if !map.has_leaf_flags() {
                return Err(FormulationError::IncompatibleConstraint(
                    "a sparsity budget needs a formulation with prunable leaves".into(),
                ));
            }
            let mut terms = Vec::new();
            for n in map.index.branching_nodes() {
                for f in 0..map.n_features {
                    terms.push((map.branch(n, f), 1.0));
                }
            }
            built
                .model
                .add_constraint(Constraint::new(terms, Relation::Le, f64::from(budget)));
        }
        Regularizer::FeatureBudget(budget) => {
            // indicator per feature; neither integrality nor bounds
            // need enforcing beyond [0,1]
            let mut used = Vec::with_capacity(map.n_features);
            for f in 0..map.n_features {
                used.push(built.model.add_variable(format!("used_f{f}"), 0.0, 1.0, false, 0.0));
            }
            for n in map.index.branching_nodes() {
                for f in 0..map.n_features {
                    built.model.add_constraint(Constraint::new(
                        vec![(map.branch(n, f), 1.0), (used[f], -1.0)],
                        Relation::Le,
                        0.0,
                    ));
                }
            }
            let terms = used.into_iter().map(|v| (v, 1.0)).collect();
            built
                .model
                .add_constraint(Constraint::new(terms, Relation::Le, f64::from(budget)));
        }
        Regularizer::MinLeafSupport(minimum) => {
            if !map.has_leaf_flags() || !map.has_flows() {
                return Err(FormulationError::IncompatibleConstraint(
                    "a leaf-support floor needs leaf flags and flow variables".into(),
                ));
            }
            let graph = built.graph.as_ref().unwrap().clone();
            for n in map.index.all_nodes() {
                let mut terms: Vec<(usize, f64)> = (0..map.n_rows)
                    .map(|i| (map.arc_flow(i, graph.in_arc(n)), 1.0))
                    .collect();
                terms.push((map.leaf_flag(n), -f64::from(minimum)));
                built.model.add_constraint(Constraint::new(terms, Relation::Ge, 0.0));
            }
        }
    }
    Ok(())
}

/// Install the training objective on a built model. Class-conditional
/// objectives need the complete-flow formulation; accuracy is a no-op
/// on the correct-flow models, whose built-in objective already counts
/// correctly classified rows.
pub fn set_objective(
    built: &mut BuiltModel,
    objective: ObjectiveKind,
    data: &BinaryDataset,
) -> Result<(), FormulationError> {
    if built.kind != FormulationKind::CompleteFlow {
        return match objective {
            ObjectiveKind::Accuracy => Ok(()),
            _ => Err(FormulationError::ObjectiveNeedsCompleteFlow(objective)),
        };
    }
    let map = flow_map(built)?.clone();
    let counts = data.class_counts();
    let needs_counts = !matches!(objective, ObjectiveKind::Accuracy);
    if needs_counts {
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(FormulationError::EmptyClass(k));
        }
    }
    let graph = built.graph.as_ref().unwrap().clone();
    // wipe any previous objective before installing the new one
    for v in built.model.variables.iter_mut() {
        v.objective = 0.0;
    }
    match objective {
        ObjectiveKind::Accuracy => {
            for (i, &y) in data.labels.iter().enumerate() {
                for n in map.index.all_nodes() {
                    built.model.variables[map.arc_flow(i, graph.class_sink_arc(n, y))].objective =
                        1.0;
                }
            }
        }
        ObjectiveKind::BalancedAccuracy => {
            let scale = 1.0 / map.n_classes as f64;
            for (i, &y) in data.labels.iter().enumerate() {
                let weight = scale / counts[y] as f64;
                for n in map.index.all_nodes() {
                    built.model.variables[map.arc_flow(i, graph.class_sink_arc(n, y))].objective =
                        weight;
                }
            }
        }
        ObjectiveKind::WorstCaseAccuracy => {
            let floor = built.model.add_variable("accuracy_floor", 0.0, 1.0, false, 1.0);
            // count_k * floor <= correct flow of class k, scaled integral
            for k in 0..map.n_classes {
                let mut terms = vec![(floor, counts[k] as f64)];
                for (i, &y) in data.labels.iter().enumerate() {
                    if y == k {
                        for n in map.index.all_nodes() {
                            terms.push((map.arc_flow(i, graph.class_sink_arc(n, k)), -1.0));
                        }
                    }
                }
                built.model.add_constraint(Constraint::new(terms, Relation::Le, 0.0));
            }
        }
        ObjectiveKind::SensitivityMax => {
            if map.n_classes != 2 {
                return Err(FormulationError::IncompatibleConstraint(
                    "sensitivity objective needs binary classification".into(),
                ));
            }
            let weight = 1.0 / counts[POSITIVE] as f64;
            for (i, &y) in data.labels.iter().enumerate() {
                if y == POSITIVE {
                    for n in map.index.all_nodes() {
                        built.model.variables[map.arc_flow(i, graph.class_sink_arc(n, POSITIVE))]
                            .objective = weight;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Attach a recall, precision or specificity floor (binary complete
/// flow).
pub fn attach_rate_floor(
    built: &mut BuiltModel,
    floor: RateFloor,
    data: &BinaryDataset,
) -> Result<(), FormulationError> {
    let map = flow_map(built)?.clone();
    if built.kind != FormulationKind::CompleteFlow || map.n_classes != 2 {
        return Err(FormulationError::IncompatibleConstraint(
            "rate floors need the binary complete-flow formulation".into(),
        ));
    }
    let counts = data.class_counts();
    match floor {
        RateFloor::Recall(level) => {
            if counts[POSITIVE] == 0 {
                return Err(FormulationError::EmptyClass(POSITIVE));
            }
            let mut terms = Vec::new();
            for (i, &y) in data.labels.iter().enumerate() {
                if y == POSITIVE {
                    terms.extend(sink_terms(built, i, Some(POSITIVE), 1.0));
                }
            }
            built.model.add_constraint(Constraint::new(
                terms,
                Relation::Ge,
                level * counts[POSITIVE] as f64,
            ));
        }
        RateFloor::Specificity(level) => {
            if counts[0] == 0 {
                return Err(FormulationError::EmptyClass(0));
            }
            let mut terms = Vec::new();
            for (i, &y) in data.labels.iter().enumerate() {
                if y == 0 {
                    terms.extend(sink_terms(built, i, Some(0), 1.0));
                }
            }
            built
                .model
                .add_constraint(Constraint::new(terms, Relation::Ge, level * counts[0] as f64));
        }
        RateFloor::Precision(level) => {
            // already linear in its given form:
            // sum of true-positive flow >= level * sum of positive-predicted flow
            let mut terms = Vec::new();
            for (i, &y) in data.labels.iter().enumerate() {
                let coefficient = if y == POSITIVE { 1.0 - level } else { -level };
                terms.extend(sink_terms(built, i, Some(POSITIVE), coefficient));
            }
            built.model.add_constraint(Constraint::new(terms, Relation::Ge, 0.0));
        }
    }
    Ok(())
}

/// Group cells used by the fairness constraints.
fn group_members(rows: &[usize], group: usize, groups: &[usize]) -> Vec<usize> {
    rows.iter().copied().filter(|&i| groups[i] == group).collect()
}

/// Attach a group-fairness constraint family to a binary complete-flow
/// model. `protected` holds one group index per row; `legitimate` holds
/// the conditioning level per row for the conditional variant.
pub fn attach_fairness(
    built: &mut BuiltModel,
    kind: FairnessKind,
    delta: f64,
    protected: &[usize],
    legitimate: Option<&[usize]>,
    data: &BinaryDataset,
) -> Result<(), FormulationError> {
    let map = flow_map(built)?.clone();
    if built.kind != FormulationKind::CompleteFlow || map.n_classes != 2 {
        return Err(FormulationError::IncompatibleConstraint(
            "fairness constraints need the binary complete-flow formulation".into(),
        ));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(FormulationError::IncompatibleConstraint(format!(
            "fairness tolerance {delta} outside [0, 1]"
        )));
    }
    assert_eq!(protected.len(), map.n_rows);
    let n_groups = protected.iter().copied().max().map_or(0, |g| g + 1);
    let all_rows: Vec<usize> = (0..map.n_rows).collect();

    // slices of rows the rates are computed over, with a context label
    // for error reporting
    let mut cells: Vec<(String, Vec<Vec<usize>>)> = Vec::new();
    match kind {
        FairnessKind::StatisticalParity => {
            let per_group = (0..n_groups)
                .map(|g| group_members(&all_rows, g, protected))
                .collect();
            cells.push(("all rows".into(), per_group));
        }
        FairnessKind::ConditionalStatisticalParity => {
            let levels = legitimate.ok_or_else(|| {
                FormulationError::IncompatibleConstraint(
                    "conditional parity needs a legitimate-factor column".into(),
                )
            })?;
            assert_eq!(levels.len(), map.n_rows);
            let n_levels = levels.iter().copied().max().map_or(0, |l| l + 1);
            for level in 0..n_levels {
                let rows: Vec<usize> = all_rows
                    .iter()
                    .copied()
                    .filter(|&i| levels[i] == level)
                    .collect();
                let per_group = (0..n_groups)
                    .map(|g| group_members(&rows, g, protected))
                    .collect();
                cells.push((format!("legitimate level {level}"), per_group));
            }
        }
        FairnessKind::PredictiveEquality => {
            let rows: Vec<usize> = all_rows
                .iter()
                .copied()
                .filter(|&i| data.labels[i] == 0)
                .collect();
            let per_group = (0..n_groups)
                .map(|g| group_members(&rows, g, protected))
                .collect();
            cells.push(("label 0".into(), per_group));
        }
        FairnessKind::EqualizedOdds | FairnessKind::EqualOpportunity => {
            let wanted: &[usize] = if kind == FairnessKind::EqualizedOdds {
                &[0, 1]
            } else {
                &[POSITIVE]
            };
            for &label in wanted {
                let rows: Vec<usize> = all_rows
                    .iter()
                    .copied()
                    .filter(|&i| data.labels[i] == label)
                    .collect();
                let per_group = (0..n_groups)
                    .map(|g| group_members(&rows, g, protected))
                    .collect();
                cells.push((format!("label {label}"), per_group));
            }
        }
    }

    for (context, per_group) in &cells {
        for (g, members) in per_group.iter().enumerate() {
            if members.is_empty() {
                return Err(FormulationError::IncompatibleConstraint(format!(
                    "group {g} is empty within {context}"
                )));
            }
        }
        for a in 0..per_group.len() {
            for b in a + 1..per_group.len() {
                let size_a = per_group[a].len() as f64;
                let size_b = per_group[b].len() as f64;
                // |A/a - B/b| <= delta, multiplied through by a*b
                let mut terms = Vec::new();
                for &i in &per_group[a] {
                    terms.extend(sink_terms(built, i, Some(POSITIVE), size_b));
                }
                for &i in &per_group[b] {
                    terms.extend(sink_terms(built, i, Some(POSITIVE), -size_a));
                }
                let bound = delta * size_a * size_b;
                built
                    .model
                    .add_constraint(Constraint::new(terms.clone(), Relation::Le, bound));
                let flipped = terms.into_iter().map(|(v, c)| (v, -c)).collect();
                built.model.add_constraint(Constraint::new(flipped, Relation::Le, bound));
            }
        }
    }
    Ok(())
}
