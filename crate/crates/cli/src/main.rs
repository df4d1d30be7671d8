use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wicklab::lattice::ZeroMode;
use wicklab_cli::commands::{self, LatticeArgs, Outcome, Settings};
use wicklab_cli::{BackendChoice, CliError, Problem};

#[derive(Parser, Debug)]
#[command(name = "wicklab", version, about = "Wick expansions of finite-dimensional integrals")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Highest power of hbar kept in the series.
    #[arg(long, global = true)]
    order: Option<i32>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,
    /// Comparison tolerance for float checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Recorded in the report; no command draws random numbers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Quadrature nodes on the critical manifold.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Comma-separated hbar values.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expand about a nondegenerate critical point.
    Expand { problem: PathBuf },
    /// Compare the series before and after a change of variables.
    Transform { problem: PathBuf },
    /// Check that total derivatives expand to zero.
    CheckIbp { problem: PathBuf },
    /// Expand about a critical manifold.
    MorseBott { problem: PathBuf },
    /// Gauge-fixed expansion on a slice.
    GaugeSlice { problem: PathBuf },
    /// Compare the weighted gauge fixing with the slice.
    GaugeWeighted { problem: PathBuf },
    /// Numerically compare the full integral with volume times the sliced one.
    FpVolume { problem: PathBuf },
    /// Sweep hbar and compare partial sums with numerical integrals.
    Asymptotics { problem: PathBuf },
    /// Order-by-order cancellation on a periodic lattice.
    LatticeDemo {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value = "1")]
        spacing: String,
        #[arg(long, default_value_t = ZeroMode::MeanZero)]
        zero_mode: ZeroMode,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("WICKLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn emit(out: &Outcome, target: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let mut report = out.report.clone();
    if let Some(obj) = report.as_object_mut() {
        obj.insert("seed".into(), seed.into());
    }
    let text = serde_json::to_string_pretty(&report)?;
    match (target, &out.csv) {
        (None, _) => println!("{text}"),
        (Some(path), None) => write(path, &text)?,
        (Some(path), Some(csv)) => {
            write(path, csv)?;
            write(&path.with_extension("json"), &text)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let g = &cli.global;
    let settings = Settings {
        order: g.order,
        backend: g.backend,
        tolerance: g.tolerance,
        nodes: g.nodes,
        grid: g.grid.clone(),
        seed: g.seed,
    };
    let load = |p: &Path| -> Result<Problem, CliError> {
        let problem = Problem::from_path(p)?;
        problem.validate()?;
        Ok(problem)
    };
    let outcome = match &cli.command {
        Command::Expand { problem } => commands::expand(&load(problem)?, &settings)?,
        Command::Transform { problem } => commands::transform(&load(problem)?, &settings)?,
        Command::CheckIbp { problem } => commands::check_ibp(&load(problem)?, &settings)?,
        Command::MorseBott { problem } => commands::morse_bott(&load(problem)?, &settings)?,
        Command::GaugeSlice { problem } => commands::gauge_slice(&load(problem)?, &settings)?,
        Command::GaugeWeighted { problem } => commands::gauge_weighted(&load(problem)?, &settings)?,
        Command::FpVolume { problem } => commands::fp_volume(&load(problem)?, &settings)?,
        Command::Asymptotics { problem } => commands::asymptotics(&load(problem)?, &settings)?,
        Command::LatticeDemo { n, dim, spacing, zero_mode } => commands::lattice_demo(
            &LatticeArgs { n: *n, dim: *dim, spacing: spacing.clone(), zero_mode: *zero_mode },
            &settings,
        )?,
    };
    emit(&outcome, g.out.as_deref(), g.seed)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    configure_threads();
    match run(Cli::parse()) {
        Ok(o) if o.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
