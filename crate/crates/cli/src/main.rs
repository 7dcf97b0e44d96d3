//! `rcache`: run caching algorithms on traces, generate traces and reduction
//! instances, and run the verification suites.

mod error;
mod gen;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rcache_core::oracle::OracleLimits;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "rcache", version, about = "Caching with per-agent reserves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on a trace file.
    Run(RunArgs),
    /// Write a generated trace (or a reduction instance).
    Gen(GenArgs),
    /// Run the property suites on seeded random instances.
    Verify(VerifyArgs),
    /// Convert a schedule between the reserves and public-private models.
    Equiv(EquivArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Offline,
    Oracle,
    Fractional,
    Rounded,
    Lru,
}

/// Oracle size caps. Unset flags fall back to `RCACHE_ORACLE_LIMITS`
/// (e.g. `pages=9,k=5,len=14`), then to the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct LimitArgs {
    /// Largest number of distinct pages the exact oracle accepts.
    #[arg(long)]
    max_pages: Option<usize>,
    /// Largest cache size the exact oracle accepts.
    #[arg(long)]
    max_k: Option<usize>,
    /// Longest trace the exact oracle accepts.
    #[arg(long)]
    max_len: Option<usize>,
}

impl LimitArgs {
    pub fn resolve(&self) -> Result<OracleLimits, CliError> {
        let mut l = OracleLimits::from_env()
            .map_err(|e| CliError::Validation(format!("{}: {e}", OracleLimits::ENV)))?;
        l.max_pages = self.max_pages.unwrap_or(l.max_pages);
        l.max_k = self.max_k.unwrap_or(l.max_k);
        l.max_len = self.max_len.unwrap_or(l.max_len);
        Ok(l)
    }
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long)]
    trace: PathBuf,
    /// Seed for sampling an integral run from the rounded distribution.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the per-step invariants of the chosen algorithm.
    #[arg(long)]
    audit: bool,
    /// Also compute the exact optimum and the ratio.
    #[arg(long)]
    opt: bool,
    /// Write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the eviction schedule (offline, oracle, lru).
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Zipf,
    Uniform,
    Adversarial,
    Hardness,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, default_value_t = 4)]
    pages_per_agent: usize,
    #[arg(long, default_value_t = 100)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cache size; defaults to the reserve sum plus two.
    #[arg(long)]
    k: Option<usize>,
    /// Per-agent reserves, comma separated; defaults to `--reserve` for every agent.
    #[arg(long, value_delimiter = ',')]
    reserves: Option<Vec<usize>>,
    /// Reserve applied to every agent when `--reserves` is absent.
    #[arg(long, default_value_t = 1)]
    reserve: usize,
    /// DIMACS formula (hardness only).
    #[arg(long)]
    cnf: Option<PathBuf>,
    /// Truth assignment as DIMACS literals, e.g. `1 -2 -3 4` (hardness only).
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Output trace; stdout when absent. Hardness side files are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// offline, exhaustive, fractional, rounding, equiv, hardness or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Sampled runs per instance in the rounding suite.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// CSV output file.
    #[arg(long, default_value = "rcache-verify.csv")]
    out: PathBuf,
    /// Directory for minimized counterexample traces.
    #[arg(long, default_value = ".")]
    dump_dir: PathBuf,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    /// Reserves schedule to public-private schedule.
    ToPp,
    /// Public-private schedule to reserves schedule.
    ToReserves,
}

#[derive(Args)]
pub struct EquivArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    direction: Direction,
    /// Input schedule; without it the offline algorithm (to-pp) or the exact
    /// public-private optimum (to-reserves) supplies one.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Output schedule; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run::cmd_run(&a),
        Command::Gen(a) => gen::cmd_gen(&a),
        Command::Verify(a) => verify::cmd_verify(&a),
        Command::Equiv(a) => run::cmd_equiv(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rcache: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
