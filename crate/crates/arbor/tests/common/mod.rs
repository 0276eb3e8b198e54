//! Shared test oracles, independent of the library's solve paths:
//! a generic augmenting-path max-flow, exhaustive tree enumeration,
//! and seeded instance generators.
//!
//! Each integration test compiles this module separately and uses a
//! different subset of it.
#![allow(dead_code)]

use arbor::dataset::BinaryDataset;
use arbor::flowgraph::{instantiate_capacities, DecisionValues, FlowGraph, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edmonds-Karp max flow on a small dense graph.
pub fn max_flow(n_vertices: usize, edges: &[(usize, usize, u32)], source: usize, sink: usize) -> u32 {
    let mut residual = vec![vec![0i64; n_vertices]; n_vertices];
    for &(tail, head, capacity) in edges {
        residual[tail][head] += i64::from(capacity);
    }
    let mut total = 0i64;
    loop {
        // breadth-first search for an augmenting path
        let mut parent = vec![usize::MAX; n_vertices];
        parent[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n_vertices {
                if parent[v] == usize::MAX && residual[u][v] > 0 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return total as u32;
        }
        let mut bottleneck = i64::MAX;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        total += bottleneck;
    }
}

/// Vertex numbering for oracle graphs: source 0, tree node n at n,
/// single sink at 2^(depth+1).
pub fn oracle_vertex(graph: &FlowGraph, id: NodeId) -> usize {
    let sink = 1usize << (graph.index.depth + 1);
    match id {
        NodeId::Source => 0,
        NodeId::Tree(n) => n,
        NodeId::Sink => sink,
        NodeId::ClassSink(k) => sink + k,
    }
}

/// Instantiate a datapoint's capacitated graph as oracle edges.
pub fn oracle_edges(
    graph: &FlowGraph,
    x: &[u8],
    y: usize,
    decisions: &DecisionValues,
) -> Vec<(usize, usize, u32)> {
    let capacities = instantiate_capacities(graph, x, y, decisions).unwrap();
    graph
        .arcs
        .iter()
        .zip(&capacities.values)
        .map(|(arc, &c)| (oracle_vertex(graph, arc.tail), oracle_vertex(graph, arc.head), c))
        .collect()
}

/// Capacity of the cut-set of a source set (tree-node ids, source
/// implicit) in a datapoint's capacitated graph.
pub fn cut_capacity(
    graph: &FlowGraph,
    source_nodes: &[usize],
    x: &[u8],
    y: usize,
    decisions: &DecisionValues,
) -> u32 {
    let capacities = instantiate_capacities(graph, x, y, decisions).unwrap();
    graph
        .arcs
        .iter()
        .zip(&capacities.values)
        .filter(|(arc, _)| {
            let inside = |id: NodeId| match id {
                NodeId::Source => true,
                NodeId::Tree(n) => source_nodes.contains(&n),
                _ => false,
            };
            inside(arc.tail) && !inside(arc.head)
        })
        .map(|(_, &c)| c)
        .sum()
}

/// Exhaustive optimum of the depth-d balanced problem: every feature
/// assignment to the branching nodes, with majority labels per leaf.
pub fn brute_force_balanced(data: &BinaryDataset, depth: u32) -> usize {
    let n_branching = (1usize << depth) - 1;
    let n_features = data.n_features();
    let n_leaves = 1usize << depth;
    let mut best = 0usize;
    let mut assignment = vec![0usize; n_branching];
    loop {
        // route every row and collect per-leaf class histograms
        let mut histogram = vec![vec![0usize; data.n_classes()]; n_leaves];
        for (x, &y) in data.features.iter().zip(&data.labels) {
            let mut node = 1usize;
            while node < (1 << depth) {
                let feature = assignment[node - 1];
                node = if x[feature] == 0 { 2 * node } else { 2 * node + 1 };
            }
            histogram[node - (1 << depth)][y] += 1;
        }
        let correct: usize = histogram
            .iter()
            .map(|counts| counts.iter().copied().max().unwrap_or(0))
            .sum();
        best = best.max(correct);

        // next assignment in mixed radix
        let mut position = 0;
        loop {
            if position == n_branching {
                return best;
            }
            assignment[position] += 1;
            if assignment[position] < n_features {
                break;
            }
            assignment[position] = 0;
            position += 1;
        }
    }
}

/// A prunable tree of maximum depth d, for exhaustive enumeration.
#[derive(Debug, Clone)]
pub enum BruteTree {
    Leaf(usize),
    Branch(usize, Box<BruteTree>, Box<BruteTree>),
}

impl BruteTree {
    pub fn predict(&self, x: &[u8]) -> usize {
        match self {
            BruteTree::Leaf(class) => *class,
            BruteTree::Branch(feature, left, right) => {
                if x[*feature] == 0 {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            BruteTree::Leaf(_) => 0,
            BruteTree::Branch(_, left, right) => 1 + left.n_splits() + right.n_splits(),
        }
    }
}

/// All prunable trees of maximum depth d over the given feature and
/// class counts. Grows fast; intended for depth <= 2 and few features.
pub fn enumerate_trees(depth: u32, n_features: usize, n_classes: usize) -> Vec<BruteTree> {
    let mut trees: Vec<BruteTree> = (0..n_classes).map(BruteTree::Leaf).collect();
    if depth == 0 {
        return trees;
    }
    let subtrees = enumerate_trees(depth - 1, n_features, n_classes);
    for feature in 0..n_features {
        for left in &subtrees {
            for right in &subtrees {
                trees.push(BruteTree::Branch(
                    feature,
                    Box::new(left.clone()),
                    Box::new(right.clone()),
                ));
            }
        }
    }
    trees
}

/// Exhaustive optimum of the regularized problem over prunable trees:
/// maximize (1 - lambda) * correct - lambda * splits.
pub fn brute_force_regularized(data: &BinaryDataset, depth: u32, lambda: f64) -> f64 {
    enumerate_trees(depth, data.n_features(), data.n_classes())
        .iter()
        .map(|tree| {
            let correct = data
                .features
                .iter()
                .zip(&data.labels)
                .filter(|(x, &y)| tree.predict(x) == y)
                .count();
            (1.0 - lambda) * correct as f64 - lambda * tree.n_splits() as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exhaustive constrained optimum: maximum number of correct rows over
/// prunable trees whose predictions pass the filter.
pub fn brute_force_filtered(
    data: &BinaryDataset,
    depth: u32,
    accept: impl Fn(&[usize]) -> bool,
) -> usize {
    let mut best = 0usize;
    for tree in enumerate_trees(depth, data.n_features(), data.n_classes()) {
        let predictions: Vec<usize> = data.features.iter().map(|x| tree.predict(x)).collect();
        if !accept(&predictions) {
            continue;
        }
        let correct = predictions
            .iter()
            .zip(&data.labels)
            .filter(|(&p, &y)| p == y)
            .count();
        best = best.max(correct);
    }
    best
}

/// Seeded random binary instance. With `force_twins`, rows 0 and 1 are
/// all-zero feature vectors with contradictory labels, which pins the
/// flow relaxation strictly below the row count.
pub fn random_instance(
    seed: u64,
    n_rows: usize,
    n_features: usize,
    force_twins: bool,
) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        rows.push((0..n_features).map(|_| rng.gen_range(0..=1u8)).collect::<Vec<u8>>());
        labels.push(rng.gen_range(0..2usize));
    }
    if force_twins {
        rows[0] = vec![0; n_features];
        rows[1] = vec![0; n_features];
        labels[0] = 0;
        labels[1] = 1;
    }
    // both classes must appear
    labels[n_rows - 1] = 1 - labels[n_rows - 2] % 2;
    BinaryDataset::from_rows(rows, labels, 2)
}

/// Random full balanced decisions: one feature per branching node and
/// one class per leaf-capable node.
pub fn random_decisions(
    seed: u64,
    depth: u32,
    n_features: usize,
    n_classes: usize,
) -> DecisionValues {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_branching = (1usize << depth) - 1;
    let n_nodes = (1usize << (depth + 1)) - 1;
    let mut branch = vec![vec![0u8; n_features]; n_branching];
    for row in &mut branch {
        row[rng.gen_range(0..n_features)] = 1;
    }
    let mut predict = vec![vec![0u8; n_classes]; n_nodes];
    for (node, row) in predict.iter_mut().enumerate() {
        let node_id = node + 1;
        if node_id >= (1 << depth) {
            row[rng.gen_range(0..n_classes)] = 1;
        }
    }
    DecisionValues { branch, predict }
}
