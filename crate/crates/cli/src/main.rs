//! `phonomog` command-line front end. Writes CSV in GPa, g/cm³ and mm/µs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::MethodChoice;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration, or bad flags. Exit code 2.
    Config(String),
    /// A solver failed. Exit code 3.
    Numerical(phonomog::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure in {}: {e}", module_of(e)),
        }
    }
}

impl From<phonomog::Error> for CliError {
    fn from(e: phonomog::Error) -> Self {
        CliError::Numerical(e)
    }
}

fn module_of(e: &phonomog::Error) -> &'static str {
    use phonomog::Error::*;
    match e {
        Divergence { .. }
        | ShiftsExhausted { .. }
        | PruningResidual { .. }
        | SingularSchur
        | NotHermitian { .. }
        | NotConverged { .. }
        | MonodromyOverflow { .. } => "mm-solver",
        SingularPwe { .. } | PweTooLarge { .. } => "pwe-solver",
        Symmetry(_) | NegativeEigenvalue(_) => "homogenizer",
        InvalidCell(_) | CoordinateOutOfRange(_) => "unit-cell",
        SingularLattice { .. } | NotPositiveDefinite(_) | NonUnitDirection(_) => "elastic-tensor",
        InvalidArgument(_) | Unsupported(_) => "homogenizer",
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "phonomog",
    version,
    about = "Effective elastic moduli of 3D periodic composites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// CSV destination (default: the config's output.path, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override solver.method.
    #[arg(long, global = true)]
    method: Option<MethodChoice>,
    /// Override solver.n, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Treat warnings (inconsistent Christoffel matrices, shift redraws) as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// All 21 effective constants and speeds per (method, N).
    Moduli,
    /// Speeds and c11/c66 along x₁ over the [sweep] grid, with bounds.
    Sweep,
    /// Speeds, matrix side, timing and residuals per (method, N).
    Convergence,
    /// Voigt, MM N = 0 and Hashin–Shtrikman bounds per direction.
    Bounds,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = config::RunConfig::load(&path)?;
    if let Some(m) = cli.method {
        cfg.solver.method = m;
    }
    if let Some(n) = cli.n_list {
        if n.is_empty() {
            return Err(CliError::Config("--n-list is empty".into()));
        }
        cfg.solver.n = n;
    }
    let mut opts = cfg.options()?;
    opts.strict = cli.strict;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let csv = pool.install(|| match cli.command {
        Command::Moduli => commands::moduli(&cfg, &opts),
        Command::Sweep => commands::sweep(&cfg, &opts),
        Command::Convergence => commands::convergence(&cfg, &opts),
        Command::Bounds => commands::bounds(&cfg, &opts),
    })?;
    let out = cli.out.or_else(|| cfg.output.path.clone());
    match out {
        Some(p) => std::fs::write(&p, csv).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHONOMOG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phonomog: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Numerical(_) => 3,
            })
        }
    }
}
