use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narrative_core::{ErrorKind, Metric, SolverChoice, Weighting};

mod bundle;
mod commands;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] narrative_core::Error),
    #[error("io: cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let kind = match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => ErrorKind::Io,
            CliError::Usage(_) => ErrorKind::Validation,
        };
        kind.exit_code() as u8
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
core_from!(
    narrative_core::CorpusError,
    narrative_core::SemanticError,
    narrative_core::PathError,
    narrative_core::TakensError,
    narrative_core::TestkitError,
    narrative_core::MinPathError,
    narrative_core::RunStatsError
);

/// Narrative ensembles as paths in semantic space: ingest, embed, analyze
/// action and ordering, and estimate delay-embedding dimension.
#[derive(Debug, Parser)]
#[command(name = "narrative", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus directory and write the validation report.
    Ingest(IngestArgs),
    /// Build LSA paragraph embeddings for a corpus.
    Embed(EmbedArgs),
    /// Generate a synthetic corpus or embedding set.
    Synth(SynthArgs),
    /// Ordered vs shuffled analysis: average paths, action, MST, TSP, runs.
    Analyze(AnalyzeArgs),
    /// Correlation dimension against embedding dimension, ordered and shuffled.
    Dimension(DimensionArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Directory of narrative `.txt` files.
    #[arg(long)]
    dir: PathBuf,
    /// Group config as a JSON file path or inline JSON,
    /// e.g. '{"n":20,"anchor_a":1,"anchor_b":20}'.
    #[arg(long)]
    group_config: String,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedOptions {
    /// Embedding dimension; clamped to the matrix rank if larger.
    #[arg(long, default_value_t = narrative_core::semantic::DEFAULT_DIMS)]
    dims: usize,
    #[arg(long, default_value_t = Weighting::LogEntropy)]
    weighting: Weighting,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    embed: EmbedOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Brownian-bridge embedding set.
    Bridge,
    /// Topic-pool text corpus.
    Text,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Bridge)]
    kind: SynthKind,
    /// Full spec as JSON (file path or inline); overrides the shape flags.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, default_value_t = 500)]
    narratives: usize,
    #[arg(long, default_value_t = 20)]
    paragraphs: usize,
    /// Bridge dimension.
    #[arg(long, default_value_t = 50)]
    dims: usize,
    /// Bridge per-step noise norm as a multiple of the mean anchor step.
    #[arg(long, default_value_t = 3.0)]
    noise_ratio: f64,
    /// Bridge per-component step sigma; overrides --noise-ratio.
    #[arg(long)]
    sigma: Option<f64>,
    /// Words per pool in the text lexicon.
    #[arg(long, default_value_t = 40)]
    pool_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Corpus directory (embedded with LSA).
    #[arg(long, requires = "group_config", conflicts_with = "embeddings")]
    dir: Option<PathBuf>,
    #[arg(long)]
    group_config: Option<String>,
    /// Precomputed embedding file; needs --group-meta.
    #[arg(long, requires = "group_meta")]
    embeddings: Option<PathBuf>,
    /// Group metadata JSON (ids, n_paragraphs, anchors) for --embeddings.
    #[arg(long)]
    group_meta: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedOptions,
    #[arg(long, default_value_t = Metric::SqEuclidean)]
    metric: Metric,
    #[arg(long, default_value = "auto")]
    tsp: SolverChoice,
    #[arg(long, default_value_t = narrative_core::minpath::DEFAULT_RESTARTS)]
    restarts: usize,
    /// TSP start, 1-based position (default: first of the range).
    #[arg(long)]
    start: Option<usize>,
    /// TSP end, 1-based position (default: last of the range).
    #[arg(long)]
    end: Option<usize>,
    /// Analyzed slice of the path, 1-based inclusive, e.g. 1..20.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep anchor paragraphs in place in the shuffled control.
    #[arg(long)]
    pin_anchors: bool,
    /// Run tolerance: steps within [1-gap, gap] continue a run.
    #[arg(long, default_value_t = 1)]
    run_gap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DimensionArgs {
    /// Single-column CSV series.
    #[arg(long, conflicts_with_all = ["lorenz", "text"])]
    series: Option<PathBuf>,
    /// Use the x coordinate of a Lorenz trajectory.
    #[arg(long, conflicts_with = "text")]
    lorenz: bool,
    /// Long text file; the series is each paragraph's first LSA coordinate.
    #[arg(long)]
    text: Option<PathBuf>,
    #[arg(long, default_value_t = Weighting::LogEntropy)]
    weighting: Weighting,
    #[arg(long, default_value_t = 1)]
    m_min: usize,
    #[arg(long, default_value_t = 10)]
    m_max: usize,
    /// Delay in samples (default: first autocorrelation zero; 10 for --lorenz).
    #[arg(long)]
    tau: Option<usize>,
    /// Lorenz samples kept after the transient.
    #[arg(long, default_value_t = 20_000)]
    points: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Embed(a) => commands::embed(a),
        Command::Synth(a) => commands::synth(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Dimension(a) => commands::dimension(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
