mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tensor_logic::datalog::Engine;
use tensor_logic::embed::Normalization;
use tensor_logic::kg::CapitalPolicy;

#[derive(Parser)]
#[command(name = "tensor-logic", version, about = "Datalog closure, relation-matrix embeddings, and filtered-ranking evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transitive closure of a genealogy under a two-rule Datalog program.
    Closure(ClosureArgs),
    /// Train entity embeddings and relation matrices on the countries facts.
    TrainGeo(TrainGeoArgs),
    /// Chain relation matrices from a subject and rank every entity.
    InferGeo(InferGeoArgs),
    /// Train the superposition model on TSV triples.
    TrainKg(TrainKgArgs),
    /// Rank every entity as the end of a two-hop path.
    ComposePredict(ComposePredictArgs),
    /// Filtered link-prediction metrics of a trained superposition model.
    EvalKg(EvalKgArgs),
    /// Sample two-hop composition paths and remove their shortcut edges.
    BuildBench(BuildBenchArgs),
    /// Composition metrics of a trained superposition model on a benchmark.
    EvalComp(EvalCompArgs),
    /// Finite-difference check of both models' gradients on random toy data.
    Gradcheck(GradcheckArgs),
    /// Run a whole experiment from a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct ClosureArgs {
    #[arg(long)]
    persons: Option<PathBuf>,
    #[arg(long)]
    relationships: Option<PathBuf>,
    /// Program file, or inline rules. Defaults to the Parent/Ancestor program.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long, default_value = "seminaive")]
    engine: Engine,
    #[arg(long, default_value_t = tensor_logic::datalog::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Per-iteration new-edge counts as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Check containment, closure and acyclicity of the result.
    #[arg(long)]
    verify: bool,
    /// Person id or unique display name; repeatable.
    #[arg(long)]
    lineage: Vec<String>,
    /// Also print every ancestor and descendant name.
    #[arg(long)]
    full_lineage: bool,
}

#[derive(Args)]
struct TrainGeoArgs {
    #[arg(long)]
    countries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "primary")]
    capital_policy: CapitalPolicyArg,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.005)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "after-step")]
    normalization: NormalizationArg,
    /// Skip unit-length rescaling of entity embeddings entirely.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value = "geo-model.ckpt")]
    model_out: PathBuf,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CapitalPolicyArg {
    Primary,
    AllListed,
}

impl From<CapitalPolicyArg> for CapitalPolicy {
    fn from(a: CapitalPolicyArg) -> Self {
        match a {
            CapitalPolicyArg::Primary => CapitalPolicy::Primary,
            CapitalPolicyArg::AllListed => CapitalPolicy::AllListed,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum NormalizationArg {
    AfterStep,
    InitOnly,
}

impl From<NormalizationArg> for Normalization {
    fn from(a: NormalizationArg) -> Self {
        match a {
            NormalizationArg::AfterStep => Normalization::AfterStep,
            NormalizationArg::InitOnly => Normalization::InitOnly,
        }
    }
}

#[derive(Args)]
struct InferGeoArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    subject: String,
    /// Comma-separated relation names.
    #[arg(long, value_delimiter = ',', default_value = "is_capital_of,is_located_in")]
    chain: Vec<String>,
    #[arg(long, default_value_t = 5)]
    topk: usize,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Args)]
struct TrainKgArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    wd: f64,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    temp: f64,
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    validate_every: usize,
    /// Validate on a fixed random subset of this many triples.
    #[arg(long)]
    valid_sample: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "kg-model.ckpt")]
    model_out: PathBuf,
    /// Benchmark file whose shortcut edges are removed from training.
    #[arg(long)]
    remove_edges: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct ComposePredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    head: String,
    #[arg(long)]
    r1: String,
    #[arg(long)]
    r2: String,
    #[arg(long, default_value_t = 10)]
    topk: usize,
}

#[derive(Args)]
struct EvalKgArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Further TSV files whose triples are filtered as known-true.
    #[arg(long, value_delimiter = ',')]
    filter_splits: Vec<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildBenchArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n_valid: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "bench.jsonl")]
    bench_out: PathBuf,
    #[arg(long)]
    reduced_train_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCompArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    bench: PathBuf,
    /// Original TSV splits to filter against (the shortcut edges are always filtered).
    #[arg(long, value_delimiter = ',')]
    filter_splits: Vec<PathBuf>,
    /// Evaluate the validation paths instead of the test paths.
    #[arg(long)]
    valid: bool,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    entities: usize,
    #[arg(long, default_value_t = 6)]
    dim: usize,
    #[arg(long, default_value_t = 12)]
    facts: usize,
    #[arg(long, default_value_t = 0.5)]
    temp: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Reuse a saved composition benchmark (exp3b).
    #[arg(long)]
    bench: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
