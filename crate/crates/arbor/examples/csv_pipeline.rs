//! The full tabular pipeline: write a CSV, load it, binarize the
//! categorical and integer columns, make a reproducible split, train on
//! the training part and score the held-out part.
//!
//! ```bash
//! cargo run --release -p arbor --example csv_pipeline
//! ```

use std::io::Write;

use arbor::benders::{solve_benders, BendersVariant};
use arbor::branchbound::SolverConfig;
use arbor::dataset::{binarize, load_csv, split, SplitSpec};
use arbor::metrics::evaluate;

fn main() {
    let dir = std::env::temp_dir().join("arbor_csv_pipeline");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("loans.csv");
    let mut file = std::fs::File::create(&path).expect("create csv");
    writeln!(file, "purpose,amount,cosigned,approved").unwrap();
    for i in 0..48 {
        let purpose = ["car", "home", "studies"][i % 3];
        let amount = 1 + (i * 7) % 5;
        let cosigned = (i / 3) % 2;
        // approvals favor cosigned small loans
        let approved = if cosigned == 1 && amount <= 3 {
            "yes"
        } else if purpose == "home" && amount <= 2 {
            "yes"
        } else {
            "no"
        };
        writeln!(file, "{purpose},{amount},{cosigned},{approved}").unwrap();
    }
    drop(file);

    let table = load_csv(&path, "approved", None).expect("load");
    let data = binarize(&table).expect("binarize");
    println!(
        "{} rows, {} raw columns -> {} binary features:",
        data.n_rows(),
        table.columns.len(),
        data.n_features()
    );
    for name in &data.feature_names {
        println!("  {name}");
    }

    let spec = SplitSpec::new(7, (0.5, 0.25, 0.25)).expect("fractions");
    let (train, cal, test) = split(&data, &spec).expect("split");
    println!(
        "\nsplit sizes: train {}, calibration {}, test {}",
        train.n_rows(),
        cal.n_rows(),
        test.n_rows()
    );

    let fit = train.union(&cal);
    let outcome = solve_benders(
        &fit,
        2,
        0.05,
        BendersVariant::Regularized,
        &SolverConfig::default(),
        false,
    )
    .expect("train");
    println!("\nlearned tree:\n{}", outcome.tree.render());

    let evaluation = evaluate(&outcome.tree, &test);
    println!("held-out performance:");
    print!("{}", evaluation.report());
}
