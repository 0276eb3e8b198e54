//! Command-line front end: `train`, `predict`, `evaluate`, `benchmark`
//! and `relax` subcommands over the library.
//!
//! Exit codes: 0 success, 2 usage error, 3 solver failure, 4 time limit
//! without an incumbent. `ARBOR_TIME_LIMIT` (seconds) supplies the
//! default time limit when `--time-limit` is absent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::benders::{solve_master, BendersVariant};
use crate::branchbound::{solve_mio, MioResult, MioStatus, SolverConfig};
use crate::constraints::{
    attach_fairness, attach_rate_floor, attach_regularizer, set_objective, FairnessKind,
    ObjectiveKind, RateFloor, Regularizer,
};
use crate::dataset::{
    binarize, column_levels, encode_with, labels_with, load_csv, load_csv_unlabeled,
    parse_kind_spec, split_indices, BinaryDataset, RawTable, SplitSpec,
};
use crate::formulations::{
    build_complete_flow, build_flow_balanced, build_flow_regularized, build_oct_baseline,
    extract_tree, lp_bound, BuiltModel,
};
use crate::metrics::{count_correct, evaluate, group_rates};
use crate::tree::TrainedTree;

pub const TIME_LIMIT_ENV: &str = "ARBOR_TIME_LIMIT";

const EXIT_USAGE: i32 = 2;
const EXIT_SOLVER: i32 = 3;
const EXIT_TIME_LIMIT: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
    TimeLimitNoIncumbent,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::TimeLimitNoIncumbent => EXIT_TIME_LIMIT,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Solver(m) => m.clone(),
            CliError::TimeLimitNoIncumbent => {
                "time limit reached before any feasible tree was found".into()
            }
        }
    }
}

macro_rules! usage {
    ($($arg:tt)*) => { CliError::Usage(format!($($arg)*)) };
}

macro_rules! solver {
    ($($arg:tt)*) => { CliError::Solver(format!($($arg)*)) };
}

#[derive(Parser)]
#[command(
    name = "arbor",
    version,
    about = "Provably optimal depth-bounded classification trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tree and write it as JSON
    Train(TrainArgs),
    /// Predict classes for a dataset with a trained tree
    Predict(PredictArgs),
    /// Evaluate a trained tree on a labeled dataset
    Evaluate(EvaluateArgs),
    /// Run the multi-seed benchmark harness
    Benchmark(BenchmarkArgs),
    /// Compare linear relaxation bounds of the formulations
    Relax(RelaxArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with a header row, comma separated, UTF-8
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column
    #[arg(long)]
    label: String,
    /// Column kind overrides, e.g. color=cat,age=int,flag=bin
    #[arg(long)]
    kinds: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    /// Predictions at maximum depth only
    Flow,
    /// Prunable tree with a per-split penalty
    FlowReg,
    /// Per-class sinks, tracks misclassified rows
    Complete,
    /// Axis-aligned big-M baseline
    Oct,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    /// Solve the full formulation directly
    Flow,
    /// Benders decomposition with lazy min-cut separation
    Benders,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Accuracy,
    BalancedAccuracy,
    WorstCaseAccuracy,
    Sensitivity,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(value: ObjectiveArg) -> Self {
        match value {
            ObjectiveArg::Accuracy => ObjectiveKind::Accuracy,
            ObjectiveArg::BalancedAccuracy => ObjectiveKind::BalancedAccuracy,
            ObjectiveArg::WorstCaseAccuracy => ObjectiveKind::WorstCaseAccuracy,
            ObjectiveArg::Sensitivity => ObjectiveKind::SensitivityMax,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2)]
    depth: u32,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = FormulationArg::FlowReg)]
    formulation: FormulationArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Benders)]
    engine: EngineArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Accuracy)]
    objective: ObjectiveArg,
    /// Fairness constraint, kind:delta:column[:legitimate-column];
    /// kinds: stat-parity, cond-stat-parity, predictive-equality,
    /// equalized-odds, equal-opportunity
    #[arg(long)]
    fair: Option<String>,
    /// Exclude the protected column from branching features
    #[arg(long)]
    exclude_protected: bool,
    /// Minimum number of datapoints per leaf
    #[arg(long)]
    min_leaf: Option<u32>,
    /// Maximum number of branching nodes
    #[arg(long)]
    max_splits: Option<u32>,
    /// Maximum number of distinct features used
    #[arg(long)]
    max_features: Option<u32>,
    /// Recall floor in [0,1] (binary complete flow)
    #[arg(long)]
    min_recall: Option<f64>,
    /// Precision floor in [0,1] (binary complete flow)
    #[arg(long)]
    min_precision: Option<f64>,
    /// Specificity floor in [0,1] (binary complete flow)
    #[arg(long)]
    min_specificity: Option<f64>,
    /// Train/calibration/test fractions, e.g. 0.5,0.25,0.25; training
    /// then uses the train and calibration parts
    #[arg(long)]
    split: Option<String>,
    /// Seed for the split shuffle
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time limit in seconds
    #[arg(long)]
    time_limit: Option<f64>,
    /// Speculative parallel LP workers (1 = serial)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the final model in LP format for external cross-checks
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Log one line per generated cut
    #[arg(long)]
    log_cuts: bool,
    /// Output path for the trained tree
    #[arg(long, default_value = "tree.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained tree JSON
    #[arg(long)]
    tree: PathBuf,
    /// CSV file; a label column is not required
    #[arg(long)]
    data: PathBuf,
    /// Output CSV of predictions (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained tree JSON
    #[arg(long)]
    tree: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Report group-conditional rates for this column
    #[arg(long)]
    group: Option<String>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// One or more CSV files
    #[arg(long, value_delimiter = ',', required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    label: String,
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    depths: Vec<u32>,
    /// Regularization grid calibrated per split
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Number of random splits
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "flow,benders")]
    engines: Vec<EngineArg>,
    /// Time limit in seconds per solver run
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output file for the results table (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RelaxArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2)]
    depth: u32,
    #[arg(long)]
    time_limit: Option<f64>,
}

/// The benchmark harness configuration.
pub struct ExperimentPlan {
    pub datasets: Vec<PathBuf>,
    pub label: String,
    pub kinds: Option<String>,
    pub depths: Vec<u32>,
    pub lambdas: Vec<f64>,
    pub seeds: u64,
    pub engines: Vec<BenchmarkEngine>,
    pub time_limit: Option<Duration>,
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkEngine {
    Flow,
    Benders,
}

impl std::fmt::Display for BenchmarkEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchmarkEngine::Flow => write!(f, "flow"),
            BenchmarkEngine::Benders => write!(f, "benders"),
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default()).try_init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Benchmark(args) => cmd_benchmark_args(&args),
        Command::Relax(args) => cmd_relax(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {}", error.message());
            error.exit_code()
        }
    }
}

fn parse_kinds(spec: &Option<String>) -> Result<Option<BTreeMap<String, crate::dataset::ColumnKind>>, CliError> {
    match spec {
        None => Ok(None),
        Some(s) => parse_kind_spec(s).map(Some).map_err(|e| usage!("{e}")),
    }
}

fn load_dataset(args: &DataArgs) -> Result<(RawTable, BinaryDataset), CliError> {
    let kinds = parse_kinds(&args.kinds)?;
    let table =
        load_csv(&args.data, &args.label, kinds.as_ref()).map_err(|e| usage!("{e}"))?;
    let data = binarize(&table).map_err(|e| usage!("{e}"))?;
    Ok((table, data))
}

fn solver_config(time_limit: Option<f64>, threads: usize) -> SolverConfig {
    let from_env = std::env::var(TIME_LIMIT_ENV)
        .ok()
        .and_then(|v| v.parse::<f64>().ok());
    let seconds = time_limit.or(from_env);
    SolverConfig {
        time_limit: seconds.map(Duration::from_secs_f64),
        threads: threads.max(1),
        ..SolverConfig::default()
    }
}

struct FairnessRequest {
    kind: FairnessKind,
    delta: f64,
    protected: String,
    legitimate: Option<String>,
}

fn parse_fairness(spec: &str) -> Result<FairnessRequest, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(usage!(
            "fairness spec must be kind:delta:column[:legitimate-column], got {spec:?}"
        ));
    }
    let kind = match parts[0] {
        "stat-parity" => FairnessKind::StatisticalParity,
        "cond-stat-parity" => FairnessKind::ConditionalStatisticalParity,
        "predictive-equality" => FairnessKind::PredictiveEquality,
        "equalized-odds" => FairnessKind::EqualizedOdds,
        "equal-opportunity" => FairnessKind::EqualOpportunity,
        other => return Err(usage!("unknown fairness kind {other:?}")),
    };
    let delta: f64 = parts[1]
        .parse()
        .map_err(|_| usage!("fairness tolerance {:?} is not a number", parts[1]))?;
    if kind == FairnessKind::ConditionalStatisticalParity && parts.len() != 4 {
        return Err(usage!("conditional parity needs a legitimate-factor column"));
    }
    Ok(FairnessRequest {
        kind,
        delta,
        protected: parts[2].to_string(),
        legitimate: parts.get(3).map(|s| s.to_string()),
    })
}

fn parse_split(spec: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage!("split fractions must be numbers, got {spec:?}"))?;
    if parts.len() != 3 {
        return Err(usage!("split needs three fractions, got {spec:?}"));
    }
    Ok((parts[0], parts[1], parts[2]))
}

/// Outcome of one direct (non-decomposed) solve.
struct DirectOutcome {
    tree: TrainedTree,
    result: MioResult,
}

fn solve_direct(built: &BuiltModel, data: &BinaryDataset, config: &SolverConfig) -> Result<DirectOutcome, CliError> {
    let result = solve_mio(&built.model, None, config).map_err(|e| solver!("{e}"))?;
    let assignment = match (&result.incumbent, result.status) {
        (Some(assignment), _) => assignment.clone(),
        (None, MioStatus::TimeLimit) => return Err(CliError::TimeLimitNoIncumbent),
        (None, status) => return Err(solver!("no solution: {status:?}")),
    };
    let mut tree = extract_tree(built, &assignment, data).map_err(|e| solver!("{e}"))?;
    tree.stats.objective = result.objective.unwrap_or(f64::NAN);
    tree.stats.bound = result.bound;
    tree.stats.gap = result.gap;
    tree.stats.nodes_explored = result.stats.nodes_explored;
    tree.stats.cuts_added = result.stats.cuts_added;
    tree.stats.wall_seconds = result.stats.wall_seconds;
    Ok(DirectOutcome { tree, result })
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (table, mut data) = load_dataset(&args.data)?;

    let fairness = args.fair.as_deref().map(parse_fairness).transpose()?;
    let mut protected_groups = None;
    let mut legitimate_levels = None;
    if let Some(request) = &fairness {
        let (groups, _) =
            column_levels(&table, &request.protected).map_err(|e| usage!("{e}"))?;
        protected_groups = Some(groups);
        if let Some(legit) = &request.legitimate {
            let (levels, _) = column_levels(&table, legit).map_err(|e| usage!("{e}"))?;
            legitimate_levels = Some(levels);
        }
        if args.exclude_protected {
            data = data.drop_source_column(&request.protected);
        }
    }

    // optional split: train on the train and calibration parts
    let mut test_data = None;
    let mut train_rows: Vec<usize> = (0..data.n_rows()).collect();
    if let Some(spec) = &args.split {
        let fractions = parse_split(spec)?;
        let split_spec = SplitSpec::new(args.seed, fractions).map_err(|e| usage!("{e}"))?;
        let (train, cal, test) =
            split_indices(data.n_rows(), &split_spec).map_err(|e| usage!("{e}"))?;
        train_rows = train.into_iter().chain(cal).collect();
        test_data = Some(data.subset(&test));
    }
    let train_data = data.subset(&train_rows);
    let protected_groups = protected_groups
        .map(|g| train_rows.iter().map(|&i| g[i]).collect::<Vec<_>>());
    let legitimate_levels = legitimate_levels
        .map(|l| train_rows.iter().map(|&i| l[i]).collect::<Vec<_>>());

    let config = solver_config(args.time_limit, args.threads);
    let wants_side_constraints = fairness.is_some()
        || args.min_leaf.is_some()
        || args.min_recall.is_some()
        || args.min_precision.is_some()
        || args.min_specificity.is_some();

    let mut tree = match args.engine {
        EngineArg::Benders => {
            let variant = match args.formulation {
                FormulationArg::Flow => BendersVariant::Balanced,
                FormulationArg::FlowReg => BendersVariant::Regularized,
                FormulationArg::Complete | FormulationArg::Oct => {
                    return Err(usage!(
                        "the benders engine supports the flow and flow-reg formulations"
                    ));
                }
            };
            if wants_side_constraints || args.objective != ObjectiveArg::Accuracy {
                return Err(usage!(
                    "fairness, leaf-support, rate and objective options need --engine flow \
                     with --formulation complete"
                ));
            }
            let mut master =
                crate::benders::build_master(&train_data, args.depth, args.lambda, variant)
                    .map_err(|e| usage!("{e}"))?;
            apply_budgets(&mut master.built, args)?;
            if let Some(path) = &args.dump_lp {
                dump_lp(&master.built.model, path)?;
            }
            let outcome = solve_master(&master, &train_data, &config, args.log_cuts)
                .map_err(|e| match e {
                    crate::benders::BendersError::NoIncumbent(MioStatus::TimeLimit) => {
                        CliError::TimeLimitNoIncumbent
                    }
                    other => solver!("{other}"),
                })?;
            print_solve_summary(&outcome.result, &outcome.tree, &train_data);
            outcome.tree
        }
        EngineArg::Flow => {
            let objective = ObjectiveKind::from(args.objective);
            let mut built = match args.formulation {
                FormulationArg::Flow => {
                    if args.lambda != 0.0 {
                        return Err(usage!("the balanced formulation has no penalty term"));
                    }
                    build_flow_balanced(&train_data, args.depth)
                }
                FormulationArg::FlowReg => {
                    build_flow_regularized(&train_data, args.depth, args.lambda)
                }
                FormulationArg::Complete => {
                    build_complete_flow(&train_data, args.depth, objective)
                }
                FormulationArg::Oct => {
                    build_oct_baseline(&train_data, args.depth, args.lambda, false)
                }
            }
            .map_err(|e| usage!("{e}"))?;
            if args.objective != ObjectiveArg::Accuracy
                && args.formulation != FormulationArg::Complete
            {
                return Err(usage!(
                    "class-conditional objectives need --formulation complete"
                ));
            }
            if args.formulation != FormulationArg::Oct {
                apply_budgets(&mut built, args)?;
            } else if wants_side_constraints || args.max_splits.is_some() {
                return Err(usage!("side constraints attach to the flow formulations"));
            }
            if let Some(minimum) = args.min_leaf {
                attach_regularizer(&mut built, Regularizer::MinLeafSupport(minimum))
                    .map_err(|e| usage!("{e}"))?;
            }
            for floor in [
                args.min_recall.map(RateFloor::Recall),
                args.min_precision.map(RateFloor::Precision),
                args.min_specificity.map(RateFloor::Specificity),
            ]
            .into_iter()
            .flatten()
            {
                attach_rate_floor(&mut built, floor, &train_data).map_err(|e| usage!("{e}"))?;
            }
            if let (Some(request), Some(groups)) = (&fairness, &protected_groups) {
                attach_fairness(
                    &mut built,
                    request.kind,
                    request.delta,
                    groups,
                    legitimate_levels.as_deref(),
                    &train_data,
                )
                .map_err(|e| usage!("{e}"))?;
            }
            set_objective(&mut built, objective, &train_data).map_err(|e| usage!("{e}"))?;
            if let Some(path) = &args.dump_lp {
                dump_lp(&built.model, path)?;
            }
            let outcome = solve_direct(&built, &train_data, &config)?;
            print_solve_summary(&outcome.result, &outcome.tree, &train_data);
            outcome.tree
        }
    };

    if let Some(test) = &test_data {
        let eval = evaluate(&tree, test);
        println!("test_accuracy={:.4} test_rows={}", eval.accuracy, eval.n_rows);
    }
    tree.encoding = train_data.encoding_map.clone();
    tree.save(&args.out).map_err(|e| solver!("cannot write tree: {e}"))?;
    println!("tree written to {}", args.out.display());
    Ok(())
}

fn apply_budgets(built: &mut BuiltModel, args: &TrainArgs) -> Result<(), CliError> {
    if let Some(budget) = args.max_splits {
        attach_regularizer(built, Regularizer::SparsityBudget(budget))
            .map_err(|e| usage!("{e}"))?;
    }
    if let Some(budget) = args.max_features {
        attach_regularizer(built, Regularizer::FeatureBudget(budget))
            .map_err(|e| usage!("{e}"))?;
    }
    Ok(())
}

fn dump_lp(model: &crate::linopt::LinearModel, path: &Path) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| usage!("cannot create {}: {e}", path.display()))?;
    model.write_lp(&mut file).map_err(|e| solver!("{e}"))?;
    Ok(())
}

fn print_solve_summary(result: &MioResult, tree: &TrainedTree, data: &BinaryDataset) {
    let correct = count_correct(tree, data);
    let misclassified = data.n_rows() - correct;
    println!(
        "status={:?} objective={:.6} misclassified={} gap={:.6} nodes={} cuts={} time={:.3}s",
        result.status,
        result.objective.unwrap_or(f64::NAN),
        misclassified,
        result.gap,
        result.stats.nodes_explored,
        result.stats.cuts_added,
        result.stats.wall_seconds,
    );
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let tree = TrainedTree::load(&args.tree).map_err(|e| usage!("{e}"))?;
    if tree.encoding.is_empty() {
        return Err(usage!(
            "tree carries no feature encoding; it was trained on pre-binarized rows"
        ));
    }
    let table = load_csv_unlabeled(&args.data, None).map_err(|e| usage!("{e}"))?;
    let features = encode_with(&table, &tree.encoding).map_err(|e| usage!("{e}"))?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .map_err(|e| usage!("cannot create {}: {e}", path.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "prediction").map_err(|e| solver!("{e}"))?;
    for x in &features {
        let class = tree.predict(x);
        writeln!(out, "{}", tree.class_names[class]).map_err(|e| solver!("{e}"))?;
    }
    Ok(())
}

/// Re-encode a labeled table with a tree's stored feature encoding.
fn dataset_for_tree(
    tree: &TrainedTree,
    table: &RawTable,
    fallback: &BinaryDataset,
) -> Result<BinaryDataset, CliError> {
    if tree.encoding.is_empty() {
        if tree.feature_names != fallback.feature_names {
            return Err(usage!(
                "feature names of the tree and the dataset disagree: {:?} vs {:?}",
                tree.feature_names,
                fallback.feature_names
            ));
        }
        return Ok(fallback.clone());
    }
    let features = encode_with(table, &tree.encoding).map_err(|e| usage!("{e}"))?;
    let labels = labels_with(&table.labels, &tree.class_names).map_err(|e| usage!("{e}"))?;
    Ok(BinaryDataset {
        features,
        labels,
        feature_names: tree.feature_names.clone(),
        class_names: tree.class_names.clone(),
        encoding_map: tree.encoding.clone(),
        dropped: Vec::new(),
    })
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let tree = TrainedTree::load(&args.tree).map_err(|e| usage!("{e}"))?;
    let (table, fallback) = load_dataset(&args.data)?;
    let data = dataset_for_tree(&tree, &table, &fallback)?;
    let evaluation = evaluate(&tree, &data);
    print!("{}", evaluation.report());
    if let Some(group_column) = &args.group {
        let (groups, names) = column_levels(&table, group_column).map_err(|e| usage!("{e}"))?;
        if data.n_classes() != 2 {
            return Err(usage!("group rates need binary classification"));
        }
        for rates in group_rates(&tree, &data, &groups, &names) {
            println!(
                "group {}: size={} positive_rate={:.4} tpr={:.4} fpr={:.4}",
                rates.group,
                rates.size,
                rates.positive_rate,
                rates.true_positive_rate,
                rates.false_positive_rate
            );
        }
    }
    Ok(())
}

fn cmd_benchmark_args(args: &BenchmarkArgs) -> Result<(), CliError> {
    let plan = ExperimentPlan {
        datasets: args.data.clone(),
        label: args.label.clone(),
        kinds: args.kinds.clone(),
        depths: args.depths.clone(),
        lambdas: args
            .lambdas
            .clone()
            .unwrap_or_else(|| (0..10).map(|i| i as f64 / 10.0).collect()),
        seeds: args.seeds,
        engines: args
            .engines
            .iter()
            .map(|e| match e {
                EngineArg::Flow => BenchmarkEngine::Flow,
                EngineArg::Benders => BenchmarkEngine::Benders,
            })
            .collect(),
        time_limit: solver_config(args.time_limit, 1).time_limit,
        threads: args.threads,
    };
    let report = cmd_benchmark(&plan)?;
    match &args.out {
        Some(path) => std::fs::write(path, report)
            .map_err(|e| usage!("cannot write {}: {e}", path.display()))?,
        None => print!("{report}"),
    }
    Ok(())
}

struct CellStats {
    train_acc: Vec<f64>,
    test_acc: Vec<f64>,
    gap: Vec<f64>,
    time: Vec<f64>,
    lambdas: Vec<f64>,
    errors: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, variance.sqrt())
}

fn fmt_mean_std(values: &[f64]) -> String {
    let (mean, std) = mean_std(values);
    format!("{mean:.2}±{std:.2}")
}

/// Run the full benchmark protocol and render the results table:
/// per dataset, depth and engine, aggregates over the random splits
/// with the penalty weight calibrated on the calibration part.
pub fn cmd_benchmark(plan: &ExperimentPlan) -> Result<String, CliError> {
    if plan.depths.is_empty() || plan.lambdas.is_empty() || plan.engines.is_empty() {
        return Err(usage!("benchmark needs nonempty depth, lambda and engine grids"));
    }
    if plan.seeds == 0 {
        return Err(usage!("benchmark needs at least one seed"));
    }
    let kinds = parse_kinds(&plan.kinds)?;
    let mut report = String::from("# schema: arbor-benchmark-v1\n");
    report.push_str("dataset,depth,engine,seeds,lambda,train_acc,gap,time,test_acc,errors\n");
    for dataset_path in &plan.datasets {
        let table = load_csv(dataset_path, &plan.label, kinds.as_ref())
            .map_err(|e| usage!("{e}"))?;
        let data = binarize(&table).map_err(|e| usage!("{e}"))?;
        for &depth in &plan.depths {
            for &engine in &plan.engines {
                let mut stats = CellStats {
                    train_acc: Vec::new(),
                    test_acc: Vec::new(),
                    gap: Vec::new(),
                    time: Vec::new(),
                    lambdas: Vec::new(),
                    errors: 0,
                };
                for seed in 0..plan.seeds {
                    match run_benchmark_cell(&data, depth, engine, seed, plan) {
                        Ok(cell) => {
                            stats.train_acc.push(cell.0);
                            stats.gap.push(cell.1);
                            stats.time.push(cell.2);
                            stats.test_acc.push(cell.3);
                            stats.lambdas.push(cell.4);
                        }
                        Err(error) => {
                            log::warn!(
                                target: "arbor::benchmark",
                                "cell {} depth={} engine={} seed={} failed: {}",
                                dataset_path.display(),
                                depth,
                                engine,
                                seed,
                                error.message()
                            );
                            stats.errors += 1;
                        }
                    }
                }
                let (lambda_mean, _) = mean_std(&stats.lambdas);
                report.push_str(&format!(
                    "{},{},{},{},{:.2},{},{},{},{},{}\n",
                    dataset_path.display(),
                    depth,
                    engine,
                    plan.seeds,
                    lambda_mean,
                    fmt_mean_std(&stats.train_acc),
                    fmt_mean_std(&stats.gap),
                    fmt_mean_std(&stats.time),
                    fmt_mean_std(&stats.test_acc),
                    stats.errors,
                ));
            }
        }
    }
    Ok(report)
}

fn train_for_benchmark(
    data: &BinaryDataset,
    depth: u32,
    lambda: f64,
    engine: BenchmarkEngine,
    config: &SolverConfig,
) -> Result<(TrainedTree, MioResult), CliError> {
    match engine {
        BenchmarkEngine::Benders => {
            let outcome = crate::benders::solve_benders(
                data,
                depth,
                lambda,
                BendersVariant::Regularized,
                config,
                false,
            )
            .map_err(|e| solver!("{e}"))?;
            Ok((outcome.tree, outcome.result))
        }
        BenchmarkEngine::Flow => {
            let built =
                build_flow_regularized(data, depth, lambda).map_err(|e| solver!("{e}"))?;
            let outcome = solve_direct(&built, data, config)?;
            Ok((outcome.tree, outcome.result))
        }
    }
}

/// (train accuracy, gap, seconds, test accuracy, calibrated lambda)
fn run_benchmark_cell(
    data: &BinaryDataset,
    depth: u32,
    engine: BenchmarkEngine,
    seed: u64,
    plan: &ExperimentPlan,
) -> Result<(f64, f64, f64, f64, f64), CliError> {
    let spec = SplitSpec::new(seed, (0.5, 0.25, 0.25)).map_err(|e| usage!("{e}"))?;
    let (train_rows, cal_rows, test_rows) =
        split_indices(data.n_rows(), &spec).map_err(|e| usage!("{e}"))?;
    let train = data.subset(&train_rows);
    let cal = data.subset(&cal_rows);
    let test = data.subset(&test_rows);
    let config = SolverConfig {
        time_limit: plan.time_limit,
        threads: plan.threads.max(1),
        ..SolverConfig::default()
    };

    // calibrate the penalty on the calibration part
    let mut best: Option<(f64, f64)> = None; // (lambda, calibration accuracy)
    for &lambda in &plan.lambdas {
        let (tree, _) = train_for_benchmark(&train, depth, lambda, engine, &config)?;
        let accuracy = count_correct(&tree, &cal) as f64 / cal.n_rows() as f64;
        if best.map_or(true, |(_, incumbent)| accuracy > incumbent) {
            best = Some((lambda, accuracy));
        }
    }
    let (lambda, _) = best.expect("lambda grid is nonempty");

    // retrain on train plus calibration and report on the test part
    let retrain = train.union(&cal);
    let (tree, result) = train_for_benchmark(&retrain, depth, lambda, engine, &config)?;
    let train_acc = count_correct(&tree, &retrain) as f64 / retrain.n_rows() as f64;
    let test_acc = count_correct(&tree, &test) as f64 / test.n_rows() as f64;
    Ok((train_acc, result.gap, result.stats.wall_seconds, test_acc, lambda))
}

fn cmd_relax(args: &RelaxArgs) -> Result<(), CliError> {
    let (_, data) = load_dataset(&args.data)?;
    let n_rows = data.n_rows() as f64;
    let flow = build_flow_balanced(&data, args.depth).map_err(|e| usage!("{e}"))?;
    let oct = build_oct_baseline(&data, args.depth, 0.0, true).map_err(|e| usage!("{e}"))?;
    let flow_bound = lp_bound(&flow.model).map_err(|e| solver!("{e}"))?;
    let oct_bound = lp_bound(&oct.model).map_err(|e| solver!("{e}"))?;
    // normalize both to misclassification counts for comparability
    println!(
        "flow relaxation: correct<={flow_bound:.6} misclassified>={:.6}",
        n_rows - flow_bound
    );
    println!(
        "baseline relaxation: correct<={oct_bound:.6} misclassified>={:.6}",
        n_rows - oct_bound
    );
    let config = solver_config(args.time_limit, 1);
    let result = solve_mio(&flow.model, None, &config).map_err(|e| solver!("{e}"))?;
    let optimum = result
        .objective
        .ok_or(CliError::TimeLimitNoIncumbent)?;
    let miss_mio = n_rows - optimum;
    let miss_lp = n_rows - flow_bound;
    println!("flow optimum: correct={optimum:.6} misclassified={miss_mio:.6}");
    let ratio = if miss_lp > 1e-9 {
        miss_mio / miss_lp
    } else if miss_mio > 1e-9 {
        f64::INFINITY
    } else {
        1.0
    };
    println!("root improvement: {ratio:.4}");
    Ok(())
}
