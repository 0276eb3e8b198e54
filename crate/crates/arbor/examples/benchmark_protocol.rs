//! Run the benchmark harness programmatically: random splits, penalty
//! calibration on the held-out calibration part, retraining on train
//! plus calibration, and a delimiter-separated report.
//!
//! ```bash
//! cargo run --release -p arbor --example benchmark_protocol
//! ```

use std::io::Write;

use arbor::cli::{cmd_benchmark, BenchmarkEngine, ExperimentPlan};

fn main() {
    let dir = std::env::temp_dir().join("arbor_benchmark_protocol");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("signals.csv");
    let mut file = std::fs::File::create(&path).expect("create csv");
    writeln!(file, "s1,s2,s3,s4,y").unwrap();
    for i in 0..40 {
        let bits: Vec<u8> = (0..4).map(|b| ((i * 11 + 3 * b) % 7 % 2) as u8).collect();
        let label = if (i % 5) == 0 {
            1 - (bits[0] & bits[1])
        } else {
            bits[0] & bits[1]
        };
        writeln!(file, "{},{},{},{},{label}", bits[0], bits[1], bits[2], bits[3]).unwrap();
    }
    drop(file);

    let plan = ExperimentPlan {
        datasets: vec![path],
        label: "y".into(),
        kinds: None,
        depths: vec![2],
        lambdas: vec![0.0, 0.1, 0.2],
        seeds: 3,
        engines: vec![BenchmarkEngine::Flow, BenchmarkEngine::Benders],
        time_limit: None,
        threads: 1,
    };
    let report = cmd_benchmark(&plan).expect("benchmark");
    print!("{report}");
}
