mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Branching Markov chains, spines and branching interlacements.
#[derive(Debug, Parser)]
#[command(name = "bqp", version)]
pub struct Cli {
    /// Model file; the built-in reference models (A, A1, B, C) when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact quantities of a model: m, Q, spectral radius, G, h, p^h, Q^B, decorability.
    Inspect(InspectArgs),
    /// Sample plain, biased or spine trees.
    Simulate(SimulateArgs),
    /// Sample branching interlacements and compare occupations with exact targets.
    Interlace(InterlaceArgs),
    /// Run the acceptance matrix.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model name in the config file (defaults to the first model).
    #[arg(long)]
    pub model: Option<String>,
    /// Norming region, comma separated (defaults to the model's `B` line).
    #[arg(long = "B", value_delimiter = ',')]
    pub region: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_generations: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_population: usize,
    /// Output file (simulate) or directory (interlace); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Terms of the decorability series.
    #[arg(long, default_value_t = 500)]
    pub depth: usize,
    /// Reference state of the symmetric decorability series.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateKind {
    Bmc,
    Biased,
    Spine,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub kind: SimulateKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Starting state.
    #[arg(long)]
    pub x: String,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct InterlaceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sampling region containing B; defaults to B.
    #[arg(long = "Bprime", value_delimiter = ',')]
    pub bprime: Vec<String>,
    /// Excessive measure: `green-row <state>`, `green-row:<state>`, or a file of `state value` lines.
    #[arg(long)]
    pub nu: String,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    /// Number of independent replicas.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Multiplies every replica count of the matrix.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Criteria to run, comma separated (all when omitted).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
    /// Debug: multiply h off B by this factor in the spine checks.
    #[arg(long)]
    pub corrupt_h: Option<f64>,
    /// Also write the CSV summary here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
