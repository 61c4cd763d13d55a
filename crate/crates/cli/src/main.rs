mod commands;
mod error;
mod expr;
mod problem;
mod report;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{Mode, Params, ProbeArgs};
use crate::error::CliError;
use crate::problem::{parse_problem, Problem};
use crate::report::{render, Format, Report};

/// Environment variable holding the default tolerance.
const TOL_ENV: &str = "SADDLEKIT_TOL";

#[derive(Parser)]
#[command(
    name = "saddlekit",
    version,
    about = "Saddle points, duality gaps and constructive perturbations on finite metric spaces"
)]
struct Cli {
    /// Absolute tolerance for inequality checks [default: options.tolerance, then $SADDLEKIT_TOL, then 1e-12].
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Re-derive every asserted postcondition from the definitions.
    #[arg(long, global = true, value_enum)]
    verify: Option<VerifyMode>,
    /// Write the report here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Exhaustive,
}

#[derive(Subcommand)]
enum Command {
    /// Value functions, duality gap, assumptions and saddle points.
    Analyze { problem: PathBuf },
    /// Certify or refute one saddle point.
    SaddleCheck {
        problem: PathBuf,
        /// Point as x,y (1-based indices like x2,y1, or labels).
        #[arg(long)]
        at: String,
    },
    /// The ε-saddle set (requires zero gap).
    EpsSaddle {
        problem: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Build a perturbation with verified postconditions.
    Perturb {
        problem: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        at: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        eps2: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Series terms for the well-posed sharpener.
        #[arg(long)]
        terms: Option<u32>,
    },
    /// Diameter of ε-saddle sets along a decreasing ε grid.
    Wellposed {
        problem: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
    },
    /// Search for small perturbations that move solutions out of a neighbourhood.
    ProbeUsc {
        problem: PathBuf,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Centre of the target neighbourhood [default: first saddle point].
        #[arg(long)]
        at: Option<String>,
        /// Radius of the target neighbourhood in the max-metric.
        #[arg(long, default_value_t = 0.0)]
        radius: f64,
        /// Probe joint perturbations z(x,y) instead of s(x) + u(y).
        #[arg(long)]
        joint: bool,
    },
    /// f(x,y) = x - y sampled on (0,1) × (0,1].
    Counterexample {
        #[arg(long)]
        n: usize,
    },
}

fn env_tolerance() -> Result<Option<f64>, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(s) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| *t >= 0.0 && t.is_finite())
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("{TOL_ENV}={s:?} is not a tolerance"))),
        Err(_) => Ok(None),
    }
}

fn tolerance(flag: Option<f64>, problem: Option<&Problem>) -> Result<f64, CliError> {
    if let Some(t) = flag {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!(
                "--tol must be finite and >= 0, got {t}"
            )));
        }
        return Ok(t);
    }
    if let Some(t) = problem.and_then(|p| p.options.tolerance) {
        return Ok(t);
    }
    Ok(env_tolerance()?.unwrap_or(saddlekit::DEFAULT_TOLERANCE))
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let load = |p: &Path| parse_problem(p);
    let (problem, result): (Option<Problem>, _) = match cli.command {
        Command::Counterexample { n } => {
            let tol = tolerance(cli.tol, None)?;
            (None, commands::counterexample(n, tol))
        }
        Command::Analyze { problem } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let r = commands::analyze(&p, tol);
            (Some(p), r)
        }
        Command::SaddleCheck { problem, at } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let r = commands::saddle_check(&p, &at, tol);
            (Some(p), r)
        }
        Command::EpsSaddle { problem, eps } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let r = commands::eps_saddle(&p, eps, tol);
            (Some(p), r)
        }
        Command::Perturb {
            problem,
            mode,
            at,
            eps,
            eps1,
            eps2,
            delta,
            terms,
        } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let params = Params {
                eps,
                eps1,
                eps2,
                delta,
                terms,
            };
            let r = commands::perturb(&p, mode, &at, params, tol);
            (Some(p), r)
        }
        Command::Wellposed { problem, eps_grid } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let r = commands::wellposed(&p, eps_grid, tol);
            (Some(p), r)
        }
        Command::ProbeUsc {
            problem,
            rho,
            trials,
            seed,
            at,
            radius,
            joint,
        } => {
            let p = load(&problem)?;
            let tol = tolerance(cli.tol, Some(&p))?;
            let args = ProbeArgs {
                rho,
                trials,
                seed,
                at,
                radius,
                joint,
            };
            let r = commands::probe_usc(&p, args, tol);
            (Some(p), r)
        }
    };
    let mut report = result?;
    if cli.verify == Some(VerifyMode::Exhaustive) {
        verify::exhaustive(&mut report, problem.as_ref());
    }
    Ok(report)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = cli.format;
    let output = cli.output.clone();
    let outcome = run(cli).and_then(|report| {
        emit(&render(&report, format)?, output.as_deref())?;
        match &report.verification {
            Some(v) if !v.failures.is_empty() => Err(CliError::Verify(v.failures.join("; "))),
            _ => Ok(()),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("saddlekit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
