//! On a skewed dataset, compare trees trained for plain accuracy,
//! balanced accuracy and worst-case accuracy, all on the complete-flow
//! formulation that tracks misclassified rows.
//!
//! ```bash
//! cargo run --release -p arbor --example imbalanced_objectives
//! ```

use arbor::branchbound::{solve_mio, SolverConfig};
use arbor::constraints::{set_objective, ObjectiveKind};
use arbor::dataset::BinaryDataset;
use arbor::formulations::{build_complete_flow, extract_tree};
use arbor::metrics::evaluate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    // 36 negatives, 6 positives; the positive pocket needs two tests
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..36 {
        rows.push(vec![
            rng.gen_range(0..=1),
            rng.gen_range(0..=1),
            rng.gen_range(0..=1),
        ]);
        labels.push(0);
    }
    for _ in 0..6 {
        rows.push(vec![1, 1, rng.gen_range(0..=1)]);
        labels.push(1);
    }
    let data = BinaryDataset::from_rows(rows, labels, 2);

    for objective in [
        ObjectiveKind::Accuracy,
        ObjectiveKind::BalancedAccuracy,
        ObjectiveKind::WorstCaseAccuracy,
    ] {
        let mut built = build_complete_flow(&data, 2, ObjectiveKind::Accuracy).expect("build");
        set_objective(&mut built, objective, &data).expect("objective");
        let result = solve_mio(&built.model, None, &SolverConfig::default()).expect("solve");
        let tree = extract_tree(&built, &result.incumbent.unwrap(), &data).expect("decode");
        let evaluation = evaluate(&tree, &data);
        println!(
            "{objective:?}: accuracy {:.3}, balanced {:.3}, worst-case {:.3}",
            evaluation.accuracy, evaluation.balanced_accuracy, evaluation.worst_case_accuracy
        );
    }
}
