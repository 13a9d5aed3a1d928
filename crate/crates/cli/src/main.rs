//! `cnflab`: generate formulas, compute exact solution statistics, and run learning and
//! structure experiments. Every command prints a JSON envelope echoing its config.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cnflab", version, about = "Exact experiments on learning CNF formulas from uniform solutions")]
struct Cli {
    /// Worker threads; affects wall time only, never output bytes.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Write a formula from a named family as DIMACS plus a JSON sidecar.
    Generate(GenerateArgs),
    /// List all satisfying assignments.
    Enumerate(EnumerateArgs),
    /// Count satisfying assignments exactly.
    Count(FileArgs),
    /// Draw uniform satisfying assignments.
    Sample(SampleArgs),
    /// Exact marginal Pr[x = True] of every variable.
    Marginal(FileArgs),
    /// Exact total-variation distance between two uniform solution distributions.
    Tv(TvArgs),
    /// One learning trial against a known formula.
    Learn(LearnArgs),
    /// Sample-complexity sweep from a JSON config.
    Sweep(SweepArgs),
    /// Exact resilience θ over size-k candidate clauses.
    Resilience(ResilienceArgs),
    /// Well-behavedness property report.
    Props(PropsArgs),
    /// Estimate how often the revealing process yields a nice result.
    RevealSim(RevealSimArgs),
    /// Check the gadget counting bounds exactly.
    GadgetVerify(GadgetVerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Family {
    Disjoint,
    Gadget,
    Hard,
    Random,
    Linear,
    Counterexample,
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    k: usize,
    /// Variable count (disjoint, random, linear).
    #[arg(long)]
    n: Option<usize>,
    /// Layers (gadget, hard).
    #[arg(long)]
    ell: Option<usize>,
    /// Blocks (hard).
    #[arg(long)]
    m: Option<usize>,
    /// Block index; bit j restricts block j (hard).
    #[arg(long)]
    index: Option<u64>,
    /// Add the restricting clause (gadget).
    #[arg(long)]
    restricted: bool,
    /// Clause density (random).
    #[arg(long)]
    alpha: Option<f64>,
    /// Maximum variable degree (linear).
    #[arg(long)]
    d: Option<usize>,
    /// Requested clause count (linear).
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// DIMACS output path; the sidecar goes to `<out>.json`. Prints DIMACS when absent.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct FileArgs {
    file: String,
    /// Largest variable count to enumerate.
    #[arg(long, default_value_t = cnflab::solutions::DEFAULT_MAX_VARS)]
    max_vars: usize,
}

#[derive(Args, Debug, Serialize)]
struct EnumerateArgs {
    #[command(flatten)]
    input: FileArgs,
    /// Fail when there are more solutions than this.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    input: FileArgs,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct TvArgs {
    a: String,
    b: String,
    #[arg(long, default_value_t = cnflab::solutions::DEFAULT_MAX_VARS)]
    max_vars: usize,
}

#[derive(Args, Debug, Serialize)]
struct LearnArgs {
    #[command(flatten)]
    input: FileArgs,
    /// Learner clause width.
    #[arg(long)]
    k: usize,
    /// Number of samples.
    #[arg(long)]
    t: usize,
    #[arg(long)]
    seed: u64,
    /// Also compute the exact TV distance to the learned formula.
    #[arg(long)]
    tv: bool,
    /// Write the learned formula as DIMACS here.
    #[arg(long)]
    learned_out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    config: String,
    /// CSV output path; overrides `out` in the config. The CSV is inlined when neither is set.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct ResilienceArgs {
    #[command(flatten)]
    input: FileArgs,
    #[arg(long)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
struct PropsArgs {
    file: String,
    #[arg(long)]
    k: usize,
    /// Clause density; defaults to clauses / variables.
    #[arg(long)]
    alpha: Option<f64>,
    /// Named parameter preset.
    #[arg(long, default_value = cnflab::structure::ASYMPTOTIC_PRESET)]
    preset: String,
    /// JSON object overriding preset fields.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 3)]
    growth_ell: usize,
    #[arg(long, default_value_t = 3)]
    expansion_ell: usize,
    #[arg(long, default_value_t = 3)]
    degree_one_size: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_subsets: u64,
}

#[derive(Args, Debug, Serialize)]
struct RevealSimArgs {
    file: String,
    /// JSON config: clause, position, trials, seed, params.
    config: String,
}

#[derive(Args, Debug, Serialize)]
struct GadgetVerifyArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    ell: usize,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation or config: exit 2.
    Usage(String),
    /// Valid request the inputs cannot satisfy: exit 1.
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Usage(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("thread pool is configured once");
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
