//! Train an optimal depth-2 tree by solving the flow formulation
//! directly and print the learned decision logic.
//!
//! ```bash
//! cargo run --release -p arbor --example train_basic
//! ```

use arbor::branchbound::{solve_mio, SolverConfig};
use arbor::dataset::BinaryDataset;
use arbor::formulations::{build_flow_balanced, extract_tree};
use arbor::metrics::evaluate;

fn main() {
    // a small synthetic screening dataset: admit when either both
    // tests pass or the override bit is set
    let rows = vec![
        vec![1, 1, 0],
        vec![1, 0, 0],
        vec![0, 1, 0],
        vec![0, 0, 0],
        vec![1, 1, 1],
        vec![0, 0, 1],
        vec![1, 0, 1],
        vec![0, 1, 1],
    ];
    let labels = vec![1, 0, 0, 0, 1, 1, 1, 1];
    let data = BinaryDataset::from_rows(rows, labels, 2);

    let built = build_flow_balanced(&data, 2).expect("model builds");
    println!(
        "model: {} variables, {} constraints",
        built.model.n_variables(),
        built.model.constraints.len()
    );

    let result = solve_mio(&built.model, None, &SolverConfig::default()).expect("solve");
    println!(
        "status {:?}, {} rows classified correctly, {} nodes explored",
        result.status,
        result.objective.unwrap(),
        result.stats.nodes_explored
    );

    let tree = extract_tree(&built, &result.incumbent.unwrap(), &data).expect("decode");
    println!("\nlearned tree:\n{}", tree.render());
    let evaluation = evaluate(&tree, &data);
    print!("{}", evaluation.report());
}
