//! `scomp`: solve composite self-concordant problems, compare step-size
//! strategies and subsolvers, and convert traces.
//!
//! Exit codes: 0 converged / success, 2 stopped at the iteration cap,
//! 1 any error (one `error: <reason>: <detail>` line on stderr).

mod commands;
mod error;
mod instance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scomp::prox_newton::LineSearch;

use commands::{cmd_compare_ls, cmd_compare_sub, cmd_export, cmd_solve, parse_seeds, parse_strategies, Format, SolveRequest, SweepRequest};
use error::{CliError, CliResult};
use instance::{Method, ProblemKind, Settings, Source, Synthetic};

#[derive(Parser)]
#[command(name = "scomp", version, about = "Proximal Newton and proximal gradient solvers for composite self-concordant problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its trace.
    Solve(SolveArgs),
    /// Compare Newton step-size strategies over a seed set (CSV table).
    CompareLs(CompareLsArgs),
    /// Compare graph-lasso solvers over a seed set (CSV table).
    CompareSub(CompareSubArgs),
    /// Convert a trace between JSON and CSV.
    Export(ExportArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "graphlasso")]
    problem: ProblemKind,
    /// Regularization weight (default depends on the problem).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Data file: .mtx or .csv (graphlasso), .pgm (poisson), .csv with a `y` column (hetlasso).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic generator parameters, e.g. `p=10,density=0.2,seed=7`.
    #[arg(long)]
    synthetic: Option<String>,
}

impl ProblemArgs {
    fn source(&self) -> CliResult<Source> {
        Ok(match (&self.input, &self.synthetic) {
            (Some(p), _) => Source::File(p.clone()),
            (None, Some(s)) => Source::Synthetic(Synthetic::parse(s)?),
            (None, None) => Source::Synthetic(Synthetic::default()),
        })
    }

    fn rho(&self) -> f64 {
        self.rho.unwrap_or_else(|| self.problem.default_rho())
    }

    fn settings(&self, strategy: LineSearch) -> Settings {
        Settings { eps: self.eps, max_iter: self.max_iter, strategy }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Solver (default depends on the problem).
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Newton step-size strategy: nols|btkls|e-btkls|fwls.
    #[arg(long)]
    strategy: Option<String>,
    /// Overrides the synthetic `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace output file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CompareLsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "dpngs")]
    method: Method,
    /// Comma-separated strategies (at least two).
    #[arg(long, default_value = "nols,btkls,e-btkls,fwls")]
    strategy: String,
    /// Seed set: `a..b`, `a..=b` or `a,b,c`.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareSubArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated methods (at least two).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dpngs,newton,proxgrad1")]
    method: Vec<Method>,
    /// Strategy for the Newton methods.
    #[arg(long, default_value = "nols")]
    strategy: String,
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Trace file (.json or .csv).
    #[arg(long)]
    input: PathBuf,
    /// Target format.
    #[arg(long, value_enum)]
    format: Format,
    /// Method name recorded when importing a CSV table.
    #[arg(long, default_value = "imported")]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn single_strategy(s: &Option<String>) -> CliResult<LineSearch> {
    match s {
        None => Ok(LineSearch::NoLS),
        Some(s) => s.parse().map_err(|e: scomp::Error| CliError::Usage(e.to_string())),
    }
}

fn dispatch(cmd: Command) -> CliResult<ExitCode> {
    match cmd {
        Command::Solve(a) => {
            let method = a.method.unwrap_or_else(|| a.problem.problem.default_method());
            if a.strategy.is_some() && !method.uses_strategy() {
                return Err(CliError::Usage(format!("--strategy applies to newton|dpngs, not '{}'", method.name())));
            }
            let req = SolveRequest {
                problem: a.problem.problem,
                method,
                source: a.problem.source()?,
                rho: a.problem.rho(),
                seed: a.seed,
                settings: a.problem.settings(single_strategy(&a.strategy)?),
                out: a.out,
                format: a.format,
            };
            Ok(if cmd_solve(&req)? { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::CompareLs(a) => {
            let strategies = parse_strategies(&a.strategy)?;
            let req = SweepRequest {
                problem: a.problem.problem,
                source: a.problem.source()?,
                rho: a.problem.rho(),
                seeds: parse_seeds(&a.seeds)?,
                settings: a.problem.settings(LineSearch::NoLS),
                out: a.out,
            };
            cmd_compare_ls(&req, a.method, &strategies)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CompareSub(a) => {
            let req = SweepRequest {
                problem: a.problem.problem,
                source: a.problem.source()?,
                rho: a.problem.rho(),
                seeds: parse_seeds(&a.seeds)?,
                settings: a.problem.settings(single_strategy(&Some(a.strategy))?),
                out: a.out,
            };
            cmd_compare_sub(&req, &a.method)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Export(a) => {
            cmd_export(&a.input, a.format, &a.method, &a.out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
