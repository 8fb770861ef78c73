//! `carss` command-line tool.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error (unreadable or
//! malformed inputs, size caps), 4 runtime error.

mod commands;
mod render;
mod report;
mod solvers;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "carss",
    about = "Cooperative subpath-synthesis TSP toolkit",
    version
)]
struct Cli {
    /// Worker threads for instance-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate uniform random instances and write them as native files.
    Generate(GenerateArgs),
    /// Train both policies with independent REINFORCE + POMO baselines.
    Train(TrainArgs),
    /// Solve instances with a named solver, emitting per-instance CSV.
    Solve(SolveArgs),
    /// Run several solvers and aggregate a benchmark report.
    Bench(BenchArgs),
    /// Render one solved instance as an SVG drawing.
    Render(RenderArgs),
    /// Print model layer shapes and parameter counts.
    Describe(DescribeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Vertex count per instance.
    #[arg(long)]
    n: usize,
    /// Number of instances.
    #[arg(long)]
    count: usize,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML training config (all keys optional; see README).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the checkpoint and training log.
    #[arg(long, default_value = "train_out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Solver: fi, ri, ni, 2opt, nn, held-karp, brute-force, carss.
    #[arg(long)]
    algo: String,
    /// Instance files or directories of instance files.
    #[arg(long, num_args = 1.., conflicts_with_all = ["n", "count"])]
    instances: Vec<PathBuf>,
    /// Generate instances of this size instead of reading files.
    #[arg(long, requires = "count")]
    n: Option<usize>,
    /// Number of generated instances.
    #[arg(long, requires = "n")]
    count: Option<usize>,
    /// Root seed (instance generation and solver randomness).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Policy checkpoint (required for --algo carss).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Agent count for carss (defaults to the checkpoint's K).
    #[arg(long)]
    k: Option<usize>,
    /// Extra sampled-start rollouts per instance for carss.
    #[arg(long, default_value_t = 0)]
    rollouts: usize,
    /// Sample actions in extra rollouts instead of greedy decoding.
    #[arg(long, default_value_t = false)]
    sample: bool,
    /// Write per-instance CSV here (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write rollout traces (JSON lines, one block per instance).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write tour files into this directory.
    #[arg(long)]
    tours: Option<PathBuf>,
    /// Record wall-clock times in the CSV (off keeps output
    /// bit-reproducible).
    #[arg(long, default_value_t = false)]
    timings: bool,
    /// Debug dump of the first instance's initial vertex-agent assignment
    /// as vertex,agent,distance CSV (carss only).
    #[arg(long)]
    dump_assignment: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated solver list.
    #[arg(long, value_delimiter = ',')]
    algos: Vec<String>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    rollouts: usize,
    /// Directory for bench_rows.csv and bench_report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    timings: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Instance file to solve and draw.
    #[arg(long, conflicts_with = "n")]
    instance: Option<PathBuf>,
    /// Generate one instance of this size instead.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Policy checkpoint; without one a freshly initialized (untrained)
    /// policy is used.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Render a previously exported trace instead of solving; coordinates
    /// come from --instance.
    #[arg(long, conflicts_with_all = ["n", "checkpoint"], requires = "instance")]
    from_trace: Option<PathBuf>,
    /// Also write the rollout trace next to the SVG.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output SVG path.
    #[arg(long, default_value = "tour.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct DescribeArgs {
    /// Describe the model stored in a checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Describe the model of a training config.
    #[arg(long, conflicts_with = "checkpoint")]
    config: Option<PathBuf>,
}

/// Error classes mapped to exit codes.
#[derive(Debug)]
pub enum AppError {
    /// Bad inputs: unreadable/malformed files, size caps, unknown names.
    Data(String),
    /// Internal failures: divergence, invariant violations, I/O on output.
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Data(m) => write!(f, "data error: {m}"),
            AppError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Data(_) => 3,
            AppError::Runtime(_) => 4,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

impl From<carss_core::Error> for AppError {
    fn from(e: carss_core::Error) -> Self {
        use carss_core::Error as E;
        match e {
            E::NonFiniteInput
            | E::InvalidSize { .. }
            | E::InvalidBaseline { .. }
            | E::Parse { .. }
            | E::Unsupported(_)
            | E::TooLarge(_)
            | E::InvalidAgentCount { .. }
            | E::InvalidStart { .. }
            | E::Io(_) => AppError::Data(e.to_string()),
            _ => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<carss_nn::NnError> for AppError {
    fn from(e: carss_nn::NnError) -> Self {
        use carss_nn::NnError as N;
        match e {
            N::Checkpoint(_) | N::Io(_) => AppError::Data(e.to_string()),
            _ => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<carss_model::ModelError> for AppError {
    fn from(e: carss_model::ModelError) -> Self {
        use carss_model::ModelError as M;
        match e {
            M::Config(_) => AppError::Data(e.to_string()),
            M::Core(c) => c.into(),
            M::Nn(n) => n.into(),
            M::Io(io) => AppError::Data(io.to_string()),
            M::Diverged { .. } => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Solve(args) => commands::solve(args),
        Command::Bench(args) => commands::bench(args),
        Command::Render(args) => commands::render(args),
        Command::Describe(args) => commands::describe(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("carss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
