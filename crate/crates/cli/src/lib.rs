//! `simrag` command-line front-end.

pub mod commands;
pub mod settings;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use simrag_core::baselines::{Metric, Tokenizer};
use simrag_core::llm::ProviderKind;
use simrag_core::prompt::ExampleSelection;
use simrag_core::DatasetFormat;

use settings::Layer;

/// Process exit codes. `validate` uses 1 for malformed data; the other
/// commands use the category codes below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Malformed = 1,
    Config = 2,
    Transport = 3,
    Data = 4,
    Degenerate = 5,
}

impl Category {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(category: Category, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            category,
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

#[derive(Debug, Parser)]
#[command(name = "simrag", version, about = "Evaluate chat models on sentence-pair similarity scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load the dataset and print its split counts.
    Validate,
    /// Score the test split once.
    Run,
    /// Vary the temperature with everything else fixed.
    SweepTemp,
    /// Vary the number of few-shot examples at a fixed temperature.
    SweepExamples,
    /// Every temperature crossed with every example count.
    Grid,
    /// String-similarity baselines on the test split.
    Baseline,
    /// Regenerate SVG plots from persisted sweep results.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Run => "run",
            Command::SweepTemp => "sweep-temp",
            Command::SweepExamples => "sweep-examples",
            Command::Grid => "grid",
            Command::Baseline => "baseline",
            Command::Report => "report",
        }
    }
}

/// Flags shared by all commands. Unset flags fall back to `SIMRAG_<NAME>`
/// environment variables, then to the `--config` JSON file, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// JSON config file with the same keys as the long flags (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset TSV file, or directory of per-split files with --format pre-split.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// single-file or pre-split.
    #[arg(long, global = true)]
    pub format: Option<DatasetFormat>,
    /// http or mock; defaults to mock unless SIMRAG_API_KEY is set.
    #[arg(long, global = true)]
    pub provider: Option<ProviderKind>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of few-shot examples.
    #[arg(long, global = true)]
    pub examples: Option<usize>,
    /// random or first-k.
    #[arg(long, global = true)]
    pub selection: Option<ExampleSelection>,
    #[arg(long, global = true)]
    pub selection_seed: Option<u64>,
    /// Re-asks after a badly formatted answer.
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Worker threads for pairs, cells and baselines.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Baseline metric; all metrics when omitted.
    #[arg(long, global = true)]
    pub metric: Option<Metric>,
    /// Gram length for the q-gram metrics.
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// whitespace or lowercase_whitespace.
    #[arg(long, global = true)]
    pub tokenizer: Option<Tokenizer>,
    /// JSON score table for the mock provider; echoes the dataset when omitted.
    #[arg(long, global = true)]
    pub mock_table: Option<PathBuf>,
    #[arg(long, global = true)]
    pub malformed_rate: Option<f64>,
    #[arg(long, global = true)]
    pub noise_sigma: Option<f64>,
    /// Simulated mock latency per call.
    #[arg(long, global = true)]
    pub latency_ms: Option<u64>,
    /// Maximum requests per second to the provider.
    #[arg(long, global = true)]
    pub rate_limit: Option<f64>,
    #[arg(long, global = true)]
    pub timeout_secs: Option<f64>,
    /// Comma-separated temperatures for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
    /// Comma-separated example counts for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

impl Opts {
    pub fn layer(&self) -> Layer {
        Layer {
            dataset: self.dataset.clone(),
            format: self.format,
            provider: self.provider,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            seed: self.seed,
            examples: self.examples,
            selection: self.selection,
            selection_seed: self.selection_seed,
            max_retries: self.max_retries,
            parallelism: self.parallelism,
            out: self.out.clone(),
            metric: self.metric,
            q: self.q,
            tokenizer: self.tokenizer,
            mock_table: self.mock_table.clone(),
            malformed_rate: self.malformed_rate,
            noise_sigma: self.noise_sigma,
            latency_ms: self.latency_ms,
            rate_limit: self.rate_limit,
            timeout_secs: self.timeout_secs,
            temperatures: self.temperatures.clone(),
            sizes: self.sizes.clone(),
        }
    }
}
