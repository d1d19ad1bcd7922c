use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hegrad_core::casestudies::Topology;

#[derive(Debug, Parser)]
#[command(
    name = "hegrad",
    version,
    about = "Encrypted distributed projected-gradient simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a problem in the clear or under one of the two protocols.
    Run(RunArgs),
    /// Replay an embedded two-agent walkthrough and check every value.
    Golden(GoldenArgs),
    /// Time a problem over a ladder of key lengths.
    Bench(BenchArgs),
    /// Analyse a gradient family for input-output inference.
    Ioi(IoiArgs),
    /// Build the demand-response problem file.
    BuildDr(BuildArgs),
    /// Build the optimal power flow problem file.
    BuildOpf(BuildArgs),
    /// Generate key material.
    Keygen(KeygenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Plain,
    Alg1,
    Alg2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WalkthroughArg {
    Alg1,
    Alg2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Ring,
    Star,
    Path,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Ring => Topology::Ring,
            TopologyArg::Star => Topology::Star,
            TopologyArg::Path => Topology::Path,
        }
    }
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for keys and blinding; falls back to HEGRAD_SEED, then 0.
    #[arg(long, env = "HEGRAD_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Plain)]
    pub scheme: SchemeArg,
    /// Key length for generated keys.
    #[arg(long, default_value_t = 256)]
    pub bits: u64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Directory for the trajectory, transcript, timing and deviation files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Format of the timing and deviation files.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Use keys from `hegrad keygen` instead of generating them.
    #[arg(long)]
    pub key_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GoldenArgs {
    #[arg(value_enum)]
    pub which: WalkthroughArg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Alg1)]
    pub scheme: SchemeArg,
    /// Comma-separated key lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [500u64, 1000, 2000, 3000, 4000])]
    pub bits: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct IoiArgs {
    /// Family file, or a problem file whose gradients are at most quadratic.
    #[arg(long)]
    pub problem: PathBuf,
    /// One-based adversary; every agent when absent.
    #[arg(long)]
    pub adversary: Option<usize>,
    /// Override the simulated horizon.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Configuration file; a synthetic network is used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TopologyArg::Ring)]
    pub topology: TopologyArg,
    #[arg(long, default_value_t = 14)]
    pub size: usize,
    /// Supply buses of the synthetic demand-response network.
    #[arg(long, default_value_t = 3)]
    pub supply: usize,
    /// Problem file to write; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 256)]
    pub bits: u64,
    /// Number of keypairs for the public-key protocol.
    #[arg(long, default_value_t = 1)]
    pub agents: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
