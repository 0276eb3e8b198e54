//! Sweep the split penalty and watch the optimal tree shrink from the
//! full depth-3 tree to a single leaf.
//!
//! ```bash
//! cargo run --release -p arbor --example regularized_tree
//! ```

use arbor::benders::{solve_benders, BendersVariant};
use arbor::branchbound::SolverConfig;
use arbor::dataset::BinaryDataset;
use arbor::metrics::count_correct;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<u8>> = (0..30)
        .map(|_| (0..4).map(|_| rng.gen_range(0..=1)).collect())
        .collect();
    // labels depend strongly on feature 0 and weakly on feature 1
    let labels: Vec<usize> = rows
        .iter()
        .map(|r| {
            if rng.gen_bool(0.15) {
                usize::from(r[1] == 1)
            } else {
                usize::from(r[0] == 1)
            }
        })
        .collect();
    let data = BinaryDataset::from_rows(rows, labels, 2);

    println!("lambda  splits  correct  objective");
    for lambda in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.0] {
        let outcome = solve_benders(
            &data,
            3,
            lambda,
            BendersVariant::Regularized,
            &SolverConfig::default(),
            false,
        )
        .expect("solve");
        let tree = &outcome.tree;
        println!(
            "{lambda:<7} {:<7} {:<8} {:.3}",
            tree.n_splits(),
            count_correct(tree, &data),
            outcome.result.objective.unwrap()
        );
    }
}
