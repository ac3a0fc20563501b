use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;
mod svg;

use config::JobConfig;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Incomplete(String),
    Integration(String),
    VerifyFailed,
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Incomplete(_) => 2,
            CliError::Integration(_) => 3,
            CliError::VerifyFailed => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<sle0::Error> for CliError {
    fn from(e: sle0::Error) -> Self {
        use sle0::Error as E;
        match e {
            E::InvalidInput(_) | E::NonRealCoefficients | E::DegreeZero => {
                CliError::Input(e.to_string())
            }
            E::IncompleteEnumeration { .. } | E::PatternNotFound(_) => {
                CliError::Incomplete(e.to_string())
            }
            other => CliError::Integration(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sle0",
    version,
    about = "Multiple SLE(0) pole solver, null-vector functions, real loci and Loewner flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stationary relation and list every solution with its pattern.
    Poles(JobArgs),
    /// Evaluate U, log Z and the null-vector and Ward residuals.
    Nullvec(JobArgs),
    /// Trace the real locus of each solution in the upper half-plane.
    Locus(JobArgs),
    /// Integrate the Loewner flow of one solution.
    Evolve(JobArgs),
    /// Run the invariant suites and report pass/fail per check.
    Verify(JobArgs),
}

#[derive(Args, Debug, Clone)]
struct JobArgs {
    /// JSON job file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated critical points, e.g. -3,0,1,2.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// "all", "neighbor", "rainbow" or a one-based pair list like [[1,4],[2,3]].
    #[arg(long)]
    pattern: Option<String>,
    /// Growth speeds: one value, a comma-separated list, or a JSON piecewise schedule.
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<String>,
    /// Final capacity time.
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Tracked points as JSON pairs, e.g. [[1,2],[0,3]].
    #[arg(long, allow_hyphen_values = true)]
    tracked: Option<String>,
    /// Comma-separated output formats among csv, json, svg.
    #[arg(long)]
    outputs: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random starts of the pole solver.
    #[arg(long)]
    budget: Option<usize>,
    /// Directory for output files; without it only JSON is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl JobArgs {
    fn job(&self) -> Result<JobConfig, CliError> {
        let base = match &self.config {
            Some(p) => JobConfig::load(p)?,
            None => JobConfig::default(),
        };
        let flags = JobConfig {
            x: self
                .x
                .as_deref()
                .map(|s| config::parse_list("x", s))
                .transpose()?,
            pattern: self
                .pattern
                .as_deref()
                .map(config::parse_pattern)
                .transpose()?,
            nu: self.nu.as_deref().map(config::parse_nu).transpose()?,
            t_end: self.t_end,
            dt: self.dt,
            tracked: self
                .tracked
                .as_deref()
                .map(config::parse_tracked)
                .transpose()?,
            outputs: self
                .outputs
                .as_deref()
                .map(config::parse_outputs)
                .transpose()?,
            seed: self.seed,
            budget: self.budget,
        };
        Ok(base.overridden_by(flags))
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SLE0_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Input(format!(
            "SLE0_THREADS: expected a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("out: {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Input(format!("out: {}: {e}", path.display())))
}

type Handler = fn(&JobConfig, Option<&Path>) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (args, f): (&JobArgs, Handler) = match &cli.command {
        Command::Poles(a) => (a, commands::poles),
        Command::Nullvec(a) => (a, commands::nullvec),
        Command::Locus(a) => (a, commands::locus),
        Command::Evolve(a) => (a, commands::evolve),
        Command::Verify(a) => (a, commands::verify),
    };
    let job = args.job()?;
    f(&job, args.out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Input(m)
                | CliError::Incomplete(m)
                | CliError::Integration(m)
                | CliError::Internal(m) => {
                    eprintln!("error: {m}")
                }
                CliError::VerifyFailed => eprintln!("verification failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
