//! `ptcurved` command-line interface.

mod commands;
mod input;
mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::table::{Format, Report};

pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<ptcurved::Error> for CliError {
    fn from(e: ptcurved::Error) -> Self {
        use ptcurved::Error as E;
        let code = match e {
            E::StepUnderflow { .. }
            | E::NotAnEigenvalue { .. }
            | E::ContourThroughZero(_)
            | E::PhaseRefinementOverflow(_)
            | E::NonConvergence { .. }
            | E::PairingFailure { .. }
            | E::QrNonConvergence { .. }
            | E::BranchAmbiguity { .. }
            | E::UnpairedEigenvalue(_)
            | E::DegenerateEigenvalue(_) => EXIT_NONCONVERGENCE,
            E::Domain { .. } | E::InvalidParameter(_) | E::ConstraintViolation(_) | E::InvalidCurvature(_) | E::NoRealSolution(_) => {
                EXIT_CONFIG
            }
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ptcurved", version, about = "Spectra of PT-symmetric waveguides on curved strips")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Output file (standard output if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Residual tolerance for accepting eigenvalues.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Seed for randomized check suites.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Problem and boundary-condition flags shared by all commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// Gaussian curvature: -1, 0 or +1.
    #[arg(long, allow_hyphen_values = true)]
    pub curvature: Option<String>,
    /// Half-width of the strip (accepts `pi/4`).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Partial-wave index.
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<String>,
    /// Separated conditions: imaginary coupling.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Separated conditions: real coupling.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Connected conditions: off-diagonal entry b > 0.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Connected conditions: entry c with 1 + bc >= 0.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// Connected conditions: phase in [-pi, pi).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Number of lowest eigenvalues the default search box should hold.
    #[arg(long)]
    pub n_eigs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_max: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Oracle,
    Transform,
    PtPairs,
    Adjoint,
    ClosedForm,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Transform => "transform",
            Suite::PtPairs => "pt-pairs",
            Suite::Adjoint => "adjoint",
            Suite::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certified eigenvalues of one partial wave.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Eigenvalue branches along alpha or phi.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Swept parameter: alpha or phi.
        #[arg(long)]
        param: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<String>,
        #[arg(long)]
        step: Option<String>,
        /// Comma-separated partial waves, e.g. `0,1,2`.
        #[arg(long)]
        m_list: Option<String>,
    },
    /// Cross-checks with pass/fail against fixed tolerances.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Extra randomized cases drawn with `--seed`.
        #[arg(long)]
        random_cases: Option<String>,
        /// Oracle grid intervals.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Finite-difference oracle against shooting.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Grid intervals of the coarse grid.
        #[arg(long)]
        grid: Option<String>,
        /// Use the raw grid values instead of Richardson extrapolation.
        #[arg(long)]
        no_extrapolate: bool,
    },
    /// Strip spectrum as the union of partial waves |m| <= m_max.
    Spectrum2d {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        m_max: Option<String>,
    },
}

fn events_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.events.csv"))
}

/// Writes `text` to `path` through a temporary file, so that a failed run
/// leaves no partial output.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    let fail = |e: std::io::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    std::fs::write(&tmp, text).map_err(fail)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        fail(e)
    })
}

fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let (main, side) = match format {
        Format::Json => (report.json(), None),
        Format::Csv => (report.table.to_csv(), report.side.as_ref().map(|(_, t)| t.to_csv())),
    };
    match out {
        Some(path) => {
            if let Some(side) = &side {
                write_atomic(&events_path(path), side)?;
            }
            write_atomic(path, &main)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let mut text = main;
            if let Some(side) = side {
                text.push('\n');
                text.push_str(&side);
            }
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::config(format!("cannot write output: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = input::Config::load(cli.config.as_deref())?;
    let format = match cli.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => match cfg.text("format", &None)?.as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(CliError::config(format!("unknown format '{other}', expected csv or json"))),
        },
    };
    let out = match &cli.out {
        Some(p) => Some(p.clone()),
        None => cfg.text("out", &None)?.map(PathBuf::from),
    };
    let global = commands::Global {
        tol: cfg.real("tol", &cli.tol)?,
        seed: cfg.int("seed", &cli.seed)?.unwrap_or(0) as u64,
    };
    if let Some(t) = global.tol {
        if !(t > 0.0) {
            return Err(CliError::config(format!("--tol must be positive, got {t}")));
        }
    }
    let (report, passed) = match &cli.command {
        Command::Solve { problem } => (commands::solve(&cfg, &global, problem)?, true),
        Command::Sweep { problem, param, from, to, step, m_list } => {
            let range = commands::SweepRange { param, from, to, step, m_list };
            (commands::sweep(&cfg, &global, problem, &range)?, true)
        }
        Command::Verify { suite, problem, random_cases, grid } => commands::verify(&cfg, &global, *suite, problem, random_cases, grid)?,
        Command::Oracle { problem, grid, no_extrapolate } => (commands::oracle(&cfg, &global, problem, grid, *no_extrapolate)?, true),
        Command::Spectrum2d { problem, m_max } => (commands::spectrum2d(&cfg, &global, problem, m_max)?, true),
    };
    emit(&report, format, out.as_deref())?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("ptcurved: verification failed");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
        Err(e) => {
            eprintln!("ptcurved: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
