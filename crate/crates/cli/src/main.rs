//! `stoc` command-line front end: generate planted graphs, tune, cluster,
//! score and benchmark.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stoc::{RunOptions, TopologicalBackend, Variant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<stoc::Error> for CliError {
    fn from(e: stoc::Error) -> Self {
        match e {
            stoc::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<stoc::LoadError> for CliError {
    fn from(e: stoc::LoadError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<stoc::synth::SynthError> for CliError {
    fn from(e: stoc::synth::SynthError) -> Self {
        match e {
            stoc::synth::SynthError::Infeasible(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stoc", version, about = "Semantic-topological clustering of attributed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted-partition graph (edges, attributes, schema, truth).
    Generate(GenerateArgs),
    /// Derive τ and l from the attraction ratios and print the report as JSON.
    Tune(TuneArgs),
    /// Cluster a graph and write `<id>\t<cluster>` rows plus metadata.
    Cluster(ClusterArgs),
    /// Score an existing clustering file.
    Metrics(MetricsArgs),
    /// Print the empirical distance distribution as `<distance>\t<fraction>` rows.
    DistanceCdf(DistanceCdfArgs),
    /// Compare variants over a grid of attraction ratios.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edge list: two whitespace-separated node ids per line.
    #[arg(long)]
    edges: PathBuf,
    /// Attribute table with a header row; the first column is the node id.
    #[arg(long)]
    attrs: PathBuf,
    /// Schema: `<column> <quantitative|categorical|categorical-set:<d>>` per line.
    #[arg(long)]
    schema: PathBuf,
    /// Keep quantitative values as given (they must lie in [0, 1]).
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Stoc,
    Sc,
    Toc,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Stoc => Variant::Stoc,
            VariantArg::Sc => Variant::Sc,
            VariantArg::Toc => Variant::Toc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Exact,
    Sketch,
}

impl From<BackendArg> for TopologicalBackend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => TopologicalBackend::Exact,
            BackendArg::Sketch => TopologicalBackend::Sketch,
        }
    }
}

#[derive(Debug, Args)]
struct TuningArgs {
    #[arg(long, default_value_t = 0.4)]
    alpha_s: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha_t: f64,
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    /// Fixed threshold; skips τ tuning.
    #[arg(long)]
    tau: Option<f64>,
    /// Fixed hop radius; skips the l search.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 10)]
    l_max: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Stoc)]
    variant: VariantArg,
    /// Compare quantitative values by exact match only.
    #[arg(long)]
    discretize: bool,
    /// Topological backend; exact up to 10 000 nodes, sketches above when unset.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

impl TuningArgs {
    fn run_options(&self) -> RunOptions {
        RunOptions {
            variant: self.variant.into(),
            alpha_s: self.alpha_s,
            alpha_t: self.alpha_t,
            epsilon: self.epsilon,
            l_max: self.l_max,
            discretize_quantitative: self.discretize,
            backend: self.backend.map(Into::into),
            tau: self.tau,
            l: self.l,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 4)]
    communities: usize,
    /// Nodes per community.
    #[arg(long, default_value_t = 500)]
    size: usize,
    /// Quantitative attributes; community centers lie on a lattice in this
    /// many dimensions.
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 0.05)]
    p_in: f64,
    #[arg(long, default_value_t = 0.002)]
    p_out: f64,
    /// Probability that a node's label is swapped for another community's.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Half-width of the uniform quantitative value range around each center.
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// File name stem of the written files.
    #[arg(long, default_value = "planted")]
    name: String,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Clustering output; metadata goes to `<out>.meta.json`. With several
    /// runs, run `i` is written to `<out>.<i>`.
    #[arg(long)]
    out: PathBuf,
    /// Independent clustering passes with seeds `rng-seed + i`.
    #[arg(long, default_value_t = 1)]
    runs: usize,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Clustering file with `<id>\t<cluster>` rows.
    #[arg(long)]
    clustering: PathBuf,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistanceKind {
    Semantic,
    Topological,
    Combined,
}

#[derive(Debug, Args)]
struct DistanceCdfArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = DistanceKind::Semantic)]
    kind: DistanceKind,
    /// Hop radius for topological distances.
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    #[arg(long)]
    discretize: bool,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Use every pair instead of a sample (small graphs only).
    #[arg(long)]
    all_pairs: bool,
    /// Node-count ceiling for --all-pairs.
    #[arg(long, default_value_t = stoc::oracle::DEFAULT_LIMIT_N)]
    limit: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Attraction ratios, used for both α_S and α_T.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.4, 0.6, 0.8, 0.9])]
    alphas: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [VariantArg::Stoc, VariantArg::Sc, VariantArg::Toc])]
    variants: Vec<VariantArg>,
    /// Also run SToC with quantitative values compared by exact match.
    #[arg(long)]
    discretize: bool,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    #[arg(long, default_value_t = 10)]
    l_max: usize,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Tune(args) => commands::tune(&args),
        Command::Cluster(args) => commands::cluster(&args),
        Command::Metrics(args) => commands::metrics(&args),
        Command::DistanceCdf(args) => commands::distance_cdf(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stoc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
