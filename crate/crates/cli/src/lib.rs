//! `cropmix` subcommands: `sample`, `stats`, `bench`, `replay`.
//!
//! Reports go to stdout as JSON; diagnostics go to stderr. Exit status is 0
//! on success, 1 for usage, config or I/O errors, and 2 when `replay` finds
//! an output that does not match its manifest.

pub mod bench;
mod common;
pub mod replay;
pub mod sample;
pub mod stats;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use common::{load_config, thread_pool};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cropmix",
    version,
    about = "Multi-scale crop-and-mix image preprocessing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate augmented samples from an image folder.
    Sample(SampleArgs),
    /// Plan-only sampling statistics (crop counts, areas, weights).
    Stats(StatsArgs),
    /// Time baseline random-resized-crop against the configured pipeline.
    Bench(BenchArgs),
    /// Regenerate samples from their manifests and verify the raw outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Pipeline config file (TOML); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub count: u64,
    /// Comma-separated subset of `png,raw`.
    #[arg(long, default_value = "raw")]
    pub formats: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub count: u64,
    /// Image folder whose first image sets the source shape (3x512x512 if
    /// omitted).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    /// Baseline against itself.
    Rrc,
    /// Configured crop-and-mix pipeline against baseline.
    Cropmix,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub count: u64,
    #[arg(long, value_enum, default_value_t = BenchMode::Cropmix)]
    pub mode: BenchMode,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Image folder the samples were generated from.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory holding `sample_<i>.json` manifests and `.cmtx` outputs.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Sample(a) => sample::run(&a).map(|r| {
            print_json(&r);
            EXIT_OK
        }),
        Command::Stats(a) => stats::run(&a).map(|r| {
            print_json(&r);
            EXIT_OK
        }),
        Command::Bench(a) => bench::run(&a).map(|r| {
            print_json(&r);
            EXIT_OK
        }),
        Command::Replay(a) => replay::run(&a).map(|r| {
            print_json(&r);
            if r.mismatched.is_empty() {
                EXIT_OK
            } else {
                eprintln!(
                    "mismatch: sample {} ({} of {} differ)",
                    r.mismatched[0],
                    r.mismatched.len(),
                    r.checked
                );
                EXIT_MISMATCH
            }
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn print_json<T: serde::Serialize>(report: &T) {
    println!(
        "{}",
        serde_json::to_string(report).expect("report serializes")
    );
}
