//! Command-line front end: argument parsing, run context and the subcommands.
//!
//! `run` maps every outcome onto the process exit code:
//! 0 success, 1 operational error, 2 rejected, 3 incomplete.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod context;

pub use config::RunConfig;
pub use context::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Rejected,
    Incomplete,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Rejected => 2,
            Status::Incomplete => 3,
        }
    }
}

/// Exit code for operational errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, Parser)]
#[command(name = "retroholdout", version, about = "Validate retro-holdout datasets and measure benchmark inflation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML, or JSON by extension). Defaults to ./retroholdout.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root to read earlier commands' outputs (evaluation summaries) from; defaults to the output root.
    #[arg(long, global = true)]
    pub inputs_root: Option<PathBuf>,
    /// Upper bound on concurrent requests and worker threads.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Serve embeddings from the cache and chat replies from transcripts only.
    #[arg(long, global = true)]
    pub offline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Target,
    Retro,
    Both,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate dataset files and write them as normalized JSONL.
    Ingest {
        /// Dataset files; the configured target and retro when omitted.
        paths: Vec<PathBuf>,
        /// `jsonl` or `csv`; inferred from the extension when omitted.
        #[arg(long)]
        format: Option<String>,
    },
    /// Embed every entry of both datasets into the cache.
    Embed,
    /// Evaluate one model on the datasets.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "both")]
        dataset: RoleArg,
        /// `standard`, `top_k`, `five_shot` or `helpful`; overrides the config.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        repeats: Option<u32>,
    },
    /// Run the indistinguishability tests and print the verdict.
    Suite,
    /// Per-model inflation from paired evaluation summaries.
    Inflation {
        /// Models to include; every configured model when omitted.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Output formats: json, csv, svg_scatter, svg_bars.
        #[arg(long, value_delimiter = ',', default_value = "json,csv,svg_scatter,svg_bars")]
        formats: Vec<String>,
        /// Variant directory the summaries were written under.
        #[arg(long, default_value = "standard")]
        variant: String,
    },
    /// Reports for iterating on a retro-holdout.
    #[command(subcommand)]
    Iterate(IterateCommand),
    /// Human distinguishability survey.
    #[command(subcommand)]
    Survey(SurveyCommand),
    /// Null calibration: split one dataset at random many times and count rejections.
    Calibrate {
        #[arg(long, value_enum, default_value = "target")]
        dataset: RoleArg,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-run a recorded command offline and compare its outputs byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum IterateCommand {
    /// Most different n-grams between the datasets.
    Ngram {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Histograms of internal cosine similarity.
    Hist {
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Most similar internal pairs.
    Pairs {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        dataset: RoleArg,
    },
    /// 2-D projection of both datasets' embeddings.
    Project,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SurveyCommand {
    /// Draw a survey form (seeded by --seed) and its answer key.
    Generate,
    /// Score responses against answer keys.
    Score {
        /// Responses CSV: participant_id,test_index,chosen_entry_index[,form_id].
        #[arg(long)]
        responses: PathBuf,
        #[arg(long = "key", required = true)]
        keys: Vec<PathBuf>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, recorded) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

/// Runs a parsed command. `argv` is recorded in the run manifest for replay.
pub fn execute(cli: Cli, argv: Vec<String>) -> anyhow::Result<Status> {
    if let Command::Replay { manifest } = &cli.command {
        return commands::replay::run(&cli.global, manifest);
    }
    let ctx = Context::new(&cli.global, argv)?;
    commands::dispatch(&ctx, &cli.command)
}
