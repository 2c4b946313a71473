use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use funcgnn::corpus::{
    build_graphs, builtin_programs, label_all_pairs, load_program_dir, summarize, MiniProgram,
};
use funcgnn::ged::{
    exact_ged, hed_ged_lower, lsap_ged_upper, normalize_similarity, EditCostModel, GedResult,
    DEFAULT_BUDGET, DEFAULT_EXACT_NODE_LIMIT,
};
use funcgnn::graph::{read_graph, read_pair_dataset, write_pair_dataset, GraphPairRecord};
use funcgnn::model::{Model, ModelConfig};
use funcgnn::train::{
    compare_runtimes, evaluate_methods, read_loss_csv, split_dataset, train_with_progress,
    write_loss_csv, EvalOptions, Method, TrainConfig,
};
use funcgnn::Error;

const CONFIG_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "funcgnn",
    version,
    about = "Program similarity with graph edit distance and a graph neural network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build CFGs for programs and their mutants and label every ordered pair.
    GenCorpus(GenCorpusArgs),
    /// Edit distance and similarity of two graph files.
    Ged(GedArgs),
    /// Train a model on a pair dataset.
    Train(TrainArgs),
    /// Compare methods on a pair dataset.
    Eval(EvalArgs),
    /// Predict the similarity of two graph files.
    Predict(PredictArgs),
    /// Time funcgnn inference against lsap and exact search.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Directory of `.mini` sources.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    src: Option<PathBuf>,
    /// Use the bundled programs instead of --src.
    #[arg(long)]
    builtin: bool,
    /// Keep only the first N programs (default: all).
    #[arg(long)]
    programs: Option<usize>,
    /// Mutants per program.
    #[arg(long, default_value_t = 4)]
    mutants: usize,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    /// Pairs whose larger graph has at most this many nodes get exact labels.
    #[arg(long, default_value_t = DEFAULT_EXACT_NODE_LIMIT)]
    exact_limit: usize,
    /// Seed for mutant sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threads used for labeling.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GedMethod {
    Exact,
    Lsap,
    Hed,
}

#[derive(Args)]
struct GedArgs {
    #[arg(long)]
    g1: PathBuf,
    #[arg(long)]
    g2: PathBuf,
    #[arg(long, value_enum, default_value_t = GedMethod::Exact)]
    method: GedMethod,
    /// Expanded-state budget for exact search.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subset {
    Train,
    Test,
    All,
}

/// Which records of a dataset to use. Must match the split used in training.
#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    subset: Subset,
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON file with optional `model` and `train` sections (default: built-in defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint file for the best-test model.
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV (default: `<out>.loss.csv`).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Overrides the split, shuffle and initialization seeds (default: from config, else 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the epoch count (default: from config, else 100).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    split: SplitArgs,
    /// Needed when funcgnn is among the methods.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated subset of exact, lsap, hed, funcgnn.
    #[arg(long, value_delimiter = ',', default_value = "exact,lsap,hed,funcgnn")]
    methods: Vec<String>,
    /// Threads for an extra parallel pass of the classical methods.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Pairs larger than this are not run through exact.
    #[arg(long, default_value_t = DEFAULT_EXACT_NODE_LIMIT)]
    exact_limit: usize,
    /// Loss curve CSV to include in the report.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    g1: PathBuf,
    #[arg(long)]
    g2: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EXACT_NODE_LIMIT)]
    exact_limit: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Each time is the fastest of this many passes.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    version: Option<u32>,
    model: ModelConfig,
    train: TrainConfig,
}

enum Failure {
    Usage(String),
    Data(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) => Failure::Usage(msg),
            Error::BudgetExhausted { .. }
            | Error::NonFinite(_)
            | Error::NonScalarLoss(_)
            | Error::Diverged { .. }
            | Error::Shape { .. }
            | Error::NegativeGed(_) => Failure::Compute(msg),
            _ => Failure::Data(msg),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::GenCorpus(a) => gen_corpus(a),
        Command::Ged(a) => ged(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn pool(workers: usize) -> std::result::Result<rayon::ThreadPool, Failure> {
    if workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Compute(e.to_string()))
}

fn gen_corpus(a: GenCorpusArgs) -> CliResult {
    let mut programs: Vec<MiniProgram> = match &a.src {
        Some(dir) => load_program_dir(dir)?,
        None => builtin_programs(),
    };
    if let Some(n) = a.programs {
        if n == 0 || n > programs.len() {
            return Err(Failure::Usage(format!(
                "--programs must be in 1..={}",
                programs.len()
            )));
        }
        programs.truncate(n);
    }
    if programs.is_empty() {
        return Err(Failure::Data("no programs found".into()));
    }
    let graphs = build_graphs(&programs, a.mutants, a.seed)?;
    let records = pool(a.workers)?
        .install(|| label_all_pairs(&graphs, &EditCostModel::default(), a.exact_limit))?;
    write_pair_dataset(&records, &a.out)?;
    let summary = summarize(&graphs, &records);
    if a.json {
        return print_json(&summary);
    }
    println!("graphs      {}", summary.graphs);
    println!("pairs       {}", summary.pairs);
    println!(
        "nodes       min {} mean {:.2} max {}",
        summary.min_nodes, summary.mean_nodes, summary.max_nodes
    );
    println!(
        "labels      exact {} lsap {}",
        summary.exact_pairs, summary.lsap_pairs
    );
    let bins: Vec<String> = summary
        .similarity_histogram
        .iter()
        .map(usize::to_string)
        .collect();
    println!("similarity  {}", bins.join(" "));
    Ok(())
}

#[derive(Serialize)]
struct GedOutput {
    method: &'static str,
    distance: f64,
    kind: funcgnn::ged::GedKind,
    similarity: f64,
    expanded_states: Option<u64>,
    elapsed_s: f64,
}

fn ged(a: GedArgs) -> CliResult {
    let g1 = read_graph(&a.g1)?;
    let g2 = read_graph(&a.g2)?;
    let costs = EditCostModel::default();
    let start = Instant::now();
    let (name, result): (&'static str, GedResult) = match a.method {
        GedMethod::Exact => ("exact", exact_ged(&g1, &g2, &costs, a.budget)?),
        GedMethod::Lsap => ("lsap", lsap_ged_upper(&g1, &g2, &costs)?),
        GedMethod::Hed => ("hed", hed_ged_lower(&g1, &g2, &costs)?),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let out = GedOutput {
        method: name,
        distance: result.distance,
        kind: result.kind,
        similarity: normalize_similarity(result.distance, g1.node_count(), g2.node_count())?,
        expanded_states: result.expanded_states,
        elapsed_s,
    };
    if a.json {
        return print_json(&out);
    }
    println!("method      {}", out.method);
    println!("distance    {}", out.distance);
    let kind = serde_json::to_value(out.kind).map_err(|e| Failure::Data(e.to_string()))?;
    println!("kind        {}", kind.as_str().unwrap_or_default());
    println!("similarity  {:.6}", out.similarity);
    println!("elapsed     {:.6} s", out.elapsed_s);
    Ok(())
}

fn read_config(path: &Path) -> std::result::Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    match config.version {
        None | Some(CONFIG_VERSION) => Ok(config),
        Some(v) => Err(Failure::Data(format!(
            "{}: config version {v} is not supported",
            path.display()
        ))),
    }
}

fn load_dataset(path: &Path) -> std::result::Result<Vec<GraphPairRecord>, Failure> {
    let records = read_pair_dataset(path)?;
    if records.is_empty() {
        return Err(Failure::Data(format!(
            "{}: dataset is empty",
            path.display()
        )));
    }
    Ok(records)
}

fn select(split: &SplitArgs) -> std::result::Result<Vec<GraphPairRecord>, Failure> {
    let records = load_dataset(&split.data)?;
    if split.subset == Subset::All {
        return Ok(records);
    }
    let (train, test) = split_dataset(&records, split.split_ratio, split.seed)?;
    let chosen = if split.subset == Subset::Train {
        train
    } else {
        test
    };
    if chosen.is_empty() {
        return Err(Failure::Data("the selected subset is empty".into()));
    }
    Ok(chosen)
}

#[derive(Serialize)]
struct TrainSummary {
    checkpoint: PathBuf,
    loss_csv: PathBuf,
    train_pairs: usize,
    test_pairs: usize,
    epochs_run: usize,
    best_epoch: usize,
    best_test_mse: Option<f64>,
    stopped_early: bool,
    elapsed_s: f64,
}

fn train(a: TrainArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => read_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.model.seed = seed;
        config.train.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        config.train.epochs = epochs;
    }
    config.train.checkpoint_path = Some(a.out.clone());
    let records = load_dataset(&a.data)?;
    let (train_set, test_set) =
        split_dataset(&records, config.train.split_ratio, config.train.seed)?;
    let outcome = train_with_progress(
        &train_set,
        &test_set,
        &config.model,
        &config.train,
        &mut |l| match l.test_mse {
            Some(t) => eprintln!(
                "epoch {:4}  train {:.6}  test {:.6}",
                l.epoch, l.train_mse, t
            ),
            None => eprintln!("epoch {:4}  train {:.6}", l.epoch, l.train_mse),
        },
    )?;
    outcome.model.save(&a.out)?;
    let loss_csv = a.loss_csv.unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    write_loss_csv(&outcome.curve, &loss_csv)?;
    let summary = TrainSummary {
        checkpoint: a.out,
        loss_csv,
        train_pairs: train_set.len(),
        test_pairs: test_set.len(),
        epochs_run: outcome.curve.last().map_or(0, |l| l.epoch),
        best_epoch: outcome.best_epoch,
        best_test_mse: outcome
            .curve
            .iter()
            .find(|l| l.epoch == outcome.best_epoch)
            .and_then(|l| l.test_mse),
        stopped_early: outcome.stopped_early,
        elapsed_s: outcome.elapsed.as_secs_f64(),
    };
    if a.json {
        return print_json(&summary);
    }
    println!("checkpoint  {}", summary.checkpoint.display());
    println!("loss curve  {}", summary.loss_csv.display());
    println!(
        "best epoch  {} of {}",
        summary.best_epoch, summary.epochs_run
    );
    if let Some(m) = summary.best_test_mse {
        println!("test MSE    {m:.6}");
    }
    println!("elapsed     {:.1} s", summary.elapsed_s);
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let methods = a
        .methods
        .iter()
        .map(|m| m.trim().parse::<Method>())
        .collect::<funcgnn::Result<Vec<_>>>()?;
    let model = match &a.checkpoint {
        Some(path) => Some(Model::load(path)?),
        None if methods.contains(&Method::Funcgnn) => {
            return Err(Failure::Usage(
                "--checkpoint is required for funcgnn".into(),
            ));
        }
        None => None,
    };
    let records = select(&a.split)?;
    let opts = EvalOptions {
        methods,
        workers: a.workers,
        exact_budget: a.budget,
        exact_node_limit: Some(a.exact_limit),
        costs: EditCostModel::default(),
    };
    let mut report = evaluate_methods(&records, model.as_ref(), &opts)?;
    if let Some(curve) = &a.curve {
        report.loss_curve = read_loss_csv(curve)?;
    }
    let json = report.to_json()?;
    if let Some(out) = &a.out {
        std::fs::write(out, &json).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    }
    if a.json {
        println!("{json}");
    } else {
        print!("{}", report.table());
        if let Some(asym) = report.funcgnn_asymmetry {
            println!("funcgnn mean |y(i,j) - y(j,i)|: {asym:.3e}");
        }
    }
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let model = Model::load(&a.checkpoint)?;
    let g1 = read_graph(&a.g1)?;
    let g2 = read_graph(&a.g2)?;
    let similarity = model.predict(&g1, &g2)?;
    if a.json {
        return print_json(&serde_json::json!({ "similarity": similarity }));
    }
    println!("{similarity:.6}");
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult {
    let model = Model::load(&a.checkpoint)?;
    let records = select(&a.split)?;
    let c = compare_runtimes(&records, &model, a.exact_limit, a.budget, a.repeats)?;
    if a.json {
        return print_json(&c);
    }
    println!(
        "{} pairs: funcgnn {:.4} s, lsap {:.4} s, {:.1}x",
        c.pairs, c.funcgnn_s, c.lsap_s, c.lsap_speedup
    );
    println!(
        "{} pairs with at most {} nodes: funcgnn {:.4} s, exact {:.4} s, {:.1}x",
        c.small_pairs, c.node_limit, c.funcgnn_small_s, c.exact_small_s, c.exact_speedup
    );
    if c.exact_budget_failures > 0 {
        println!(
            "exact ran out of budget on {} pairs",
            c.exact_budget_failures
        );
    }
    Ok(())
}
