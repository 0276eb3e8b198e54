//! Statistical-parity constraints at decreasing tolerance on an
//! instance where the protected group perfectly predicts the label, so
//! exact parity must cost accuracy.
//!
//! ```bash
//! cargo run --release -p arbor --example fairness_constraints
//! ```

use arbor::branchbound::{solve_mio, SolverConfig};
use arbor::constraints::{attach_fairness, FairnessKind, ObjectiveKind};
use arbor::dataset::BinaryDataset;
use arbor::formulations::{build_complete_flow, extract_tree};
use arbor::metrics::group_rates;

fn main() {
    // feature 0 is the protected attribute; group 0 is all-positive
    // and group 1 all-negative in the training labels
    let rows = vec![
        vec![0, 0],
        vec![0, 1],
        vec![0, 1],
        vec![1, 0],
        vec![1, 1],
        vec![1, 0],
    ];
    let labels = vec![1, 1, 1, 0, 0, 0];
    let groups: Vec<usize> = rows.iter().map(|r| r[0] as usize).collect();
    let group_names = vec!["a".to_string(), "b".to_string()];
    let data = BinaryDataset::from_rows(rows, labels, 2);

    println!("tolerance  correct  rate(a)  rate(b)");
    for delta in [1.0, 0.5, 0.34, 0.0] {
        let mut built = build_complete_flow(&data, 2, ObjectiveKind::Accuracy).expect("build");
        attach_fairness(
            &mut built,
            FairnessKind::StatisticalParity,
            delta,
            &groups,
            None,
            &data,
        )
        .expect("constraint");
        let result = solve_mio(&built.model, None, &SolverConfig::default()).expect("solve");
        let tree = extract_tree(&built, &result.incumbent.unwrap(), &data).expect("decode");
        let rates = group_rates(&tree, &data, &groups, &group_names);
        println!(
            "{delta:<10} {:<8} {:<8.2} {:.2}",
            result.objective.unwrap(),
            rates[0].positive_rate,
            rates[1].positive_rate
        );
    }
}
