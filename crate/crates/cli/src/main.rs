//! `parasynth`: command-line driver for the corpus pipeline.
//!
//! Exit status is 0 on success, 2 when a run completed with a paragraph
//! shortfall and 1 on any error. Logs go to stderr as one JSON object per
//! line; results go to files, or to stdout for reporting commands.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "parasynth", version, about = "Synthetic parallel corpus pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "PARASYNTH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run identifier; defaults to the config's `run_id` or one derived from
    /// the config fingerprint.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Skip stages the manifest already records as complete.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Binds a role to another backend profile, as `ROLE=BACKEND_ID`.
    #[arg(long = "backend", global = true, value_name = "ROLE=ID")]
    pub backends: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run several stages in pipeline order (all of them by default).
    Run {
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
    /// Generate target-language paragraphs.
    Generate {
        /// Restricts the run to these languages.
        #[arg(long = "lang")]
        langs: Vec<String>,
        /// Accepted paragraphs to aim for per language.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Split, language-filter and decontaminate generated paragraphs.
    Process {
        /// Evaluation sets to decontaminate against, as `LANG=FILE`.
        #[arg(long = "eval-sets", num_args = 1.., value_name = "LANG=FILE")]
        eval_sets: Vec<String>,
        #[arg(long = "lang")]
        langs: Vec<String>,
    },
    /// Back-translate kept sentences into the high-resource language.
    Backtranslate {
        #[arg(long, value_enum)]
        mode: Option<BtModeArg>,
        /// Example pool for prompted modes.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Decontaminate the high-resource side and write the final pairs.
    Assemble,
    /// Retrieve the most similar pool entries for each query line.
    Select {
        /// JSONL pool; `pairs.jsonl` files qualify.
        #[arg(long)]
        pool: PathBuf,
        /// One query per line.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Pool side the index is built over.
        #[arg(long, value_enum, default_value_t = KeyArg::Hrl)]
        key: KeyArg,
        /// Also persist the index to this file.
        #[arg(long)]
        save_index: Option<PathBuf>,
    },
    /// Score hypothesis files, or compute corpus statistics for a run when
    /// no hypothesis is given.
    Evaluate {
        #[arg(long, requires = "reference")]
        hyp: Option<PathBuf>,
        #[arg(long = "ref", id = "reference")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "hyp")]
        hyp_b: Option<PathBuf>,
        /// Paired bootstrap test between `--hyp` and `--hyp-b`.
        #[arg(long, requires = "hyp_b")]
        significance: bool,
        #[arg(long, value_enum)]
        metric: Vec<MetricArg>,
    },
    /// Iterated back-translation with an external trainer.
    Selfloop {
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        trainer_cmd: Option<String>,
        /// Evaluation set (`{source, reference}` JSONL).
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
    },
    /// Print the per-language dataset table.
    Stats {
        /// Manifest to read instead of the configured run's.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check the configuration and, if the run exists, its manifest and data.
    Validate,
    /// Write an offline workspace on mock backends, optionally running it.
    Demo {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long = "lang", default_values_t = ["hau_Latn".to_owned(), "npi_Deva".to_owned()])]
        langs: Vec<String>,
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Also run every stage.
        #[arg(long)]
        run: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BtModeArg {
    Mt,
    Fewshot,
    Student,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KeyArg {
    Hrl,
    Lrl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Chrf,
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("PARASYNTH_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match commands::dispatch(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            tracing::error!(error = format!("{e:#}"), "command failed");
            eprintln!("error: {e:#}");
            ExitCode::from(commands::Status::Error as u8)
        }
    }
}
