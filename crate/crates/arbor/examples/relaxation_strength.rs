//! Compare the linear relaxations of the flow formulation and the
//! axis-aligned big-M baseline. The flow bound is never weaker, and on
//! instances with contradictory duplicate rows it is strictly tighter.
//!
//! ```bash
//! cargo run --release -p arbor --example relaxation_strength
//! ```

use arbor::branchbound::{solve_mio, SolverConfig};
use arbor::dataset::BinaryDataset;
use arbor::formulations::{build_flow_balanced, build_oct_baseline, lp_bound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    println!("instance  rows  flow-LP   baseline-LP  optimum  root-improvement");
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_rows = 10 + (seed as usize) % 4;
        let mut rows: Vec<Vec<u8>> = (0..n_rows)
            .map(|_| (0..3).map(|_| rng.gen_range(0..=1)).collect())
            .collect();
        let mut labels: Vec<usize> = (0..n_rows).map(|_| rng.gen_range(0..2)).collect();
        if seed % 2 == 0 {
            // contradictory twins with all-zero features: every
            // fractional relaxation still routes them down one spine
            rows[0] = vec![0, 0, 0];
            rows[1] = vec![0, 0, 0];
            labels[0] = 0;
            labels[1] = 1;
        }
        let data = BinaryDataset::from_rows(rows, labels, 2);

        let flow = build_flow_balanced(&data, 2).expect("flow model");
        let baseline = build_oct_baseline(&data, 2, 0.0, true).expect("baseline model");
        let flow_lp = lp_bound(&flow.model).expect("flow bound");
        let baseline_lp = lp_bound(&baseline.model).expect("baseline bound");
        let result = solve_mio(&flow.model, None, &SolverConfig::default()).expect("optimum");
        let optimum = result.objective.unwrap();
        let miss_lp = n_rows as f64 - flow_lp;
        let miss_mio = n_rows as f64 - optimum;
        let improvement = if miss_lp > 1e-9 { miss_mio / miss_lp } else { 1.0 };
        println!(
            "{seed:<9} {n_rows:<5} {flow_lp:<9.3} {baseline_lp:<12.3} {optimum:<8} {improvement:.2}"
        );
        assert!(flow_lp <= baseline_lp + 1e-6);
    }
}
