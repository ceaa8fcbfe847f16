//! `peerflow`: command-line frontend for the two-tier peering market solver.
//!
//! Subcommands: `solve` (equilibrium at a fixed strategy), `optimize`
//! (profit, welfare, or allocation-constrained welfare), `sweep` (optimize
//! along a parameter grid, CSV output), `validate` (oracle cross-checks),
//! and `check-conditions` (boundary-regime tests for the configured model).
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 solver error.

mod commands;
mod config;
mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, OptimizeObjective};
use config::{RunConfig, SweepAxis, SweepConfig};

#[derive(Parser)]
#[command(
    name = "peerflow",
    version,
    about = "Two-tier peering market: equilibrium solves, optimal strategies, parameter sweeps"
)]
struct Cli {
    /// Configuration file (flat `key = value` lines, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the report or CSV here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the configured seed used by randomized cross-checks.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the congestion equilibrium at a fixed strategy.
    Solve {
        /// User subscription price.
        #[arg(long)]
        p: f64,
        /// Paid-peering price.
        #[arg(long)]
        q: f64,
        /// Capacity share of the paid tier, in [0, 1].
        #[arg(long)]
        r: f64,
    },
    /// Search for an optimal strategy under the configured model.
    Optimize {
        #[arg(long, value_enum)]
        objective: ObjectiveChoice,
    },
    /// Optimize along a parameter grid and emit one CSV row per point.
    Sweep {
        /// Model parameter to sweep.
        #[arg(long, value_enum)]
        axis: Option<AxisChoice>,
        /// Grid start (defaults to the axis's built-in range).
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Grid end.
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        /// Number of grid points (at least 2).
        #[arg(long)]
        points: Option<u32>,
    },
    /// Cross-check the solver against independent oracles.
    Validate,
    /// Evaluate the boundary-regime conditions for the configured model.
    CheckConditions {
        /// Scan-grid resolution.
        #[arg(long, default_value_t = 1000)]
        grid: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveChoice {
    Profit,
    Welfare,
    WelfareConstrained,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisChoice {
    Alpha,
    Beta,
    C,
}

impl From<AxisChoice> for SweepAxis {
    fn from(axis: AxisChoice) -> SweepAxis {
        match axis {
            AxisChoice::Alpha => SweepAxis::Alpha,
            AxisChoice::Beta => SweepAxis::Beta,
            AxisChoice::C => SweepAxis::C,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match cli.command {
        Command::Solve { p, q, r } => with_out(cli.out.as_deref(), |w| {
            commands::cmd_solve(&cfg, p, q, r, w)
        }),
        Command::Optimize { objective } => {
            let objective = match objective {
                ObjectiveChoice::Profit => OptimizeObjective::Profit,
                ObjectiveChoice::Welfare => OptimizeObjective::Welfare,
                ObjectiveChoice::WelfareConstrained => OptimizeObjective::WelfareConstrained,
            };
            with_out(cli.out.as_deref(), |w| {
                commands::cmd_optimize(&cfg, objective, w)
            })
        }
        Command::Sweep {
            axis,
            from,
            to,
            points,
        } => {
            let grid = resolve_sweep(&cfg, axis.map(SweepAxis::from), from, to, points);
            // The sweep CSV honors the configured output path when no
            // --out flag overrides it; reports of other commands do not.
            let path = cli
                .out
                .clone()
                .or_else(|| cfg.output.as_ref().map(PathBuf::from));
            with_out(path.as_deref(), |w| sweep::cmd_sweep(&cfg, &grid, w))
        }
        Command::Validate => with_out(cli.out.as_deref(), |w| commands::cmd_validate(&cfg, w)),
        Command::CheckConditions { grid } => with_out(cli.out.as_deref(), |w| {
            commands::cmd_check_conditions(&cfg, grid, w)
        }),
    }
}

/// Merge command-line sweep flags over the configured grid. Changing the
/// axis without giving an explicit range selects that axis's built-in range.
fn resolve_sweep(
    cfg: &RunConfig,
    axis: Option<SweepAxis>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<u32>,
) -> SweepConfig {
    let mut grid = cfg.sweep;
    if let Some(axis) = axis {
        if axis != grid.axis {
            let (lo, hi) = axis.default_range();
            grid.axis = axis;
            grid.from = lo;
            grid.to = hi;
        }
    }
    if let Some(v) = from {
        grid.from = v;
    }
    if let Some(v) = to {
        grid.to = v;
    }
    if let Some(v) = points {
        grid.points = v;
    }
    grid
}

/// Run `f` against the chosen destination: a freshly created file when a
/// path is given, stdout otherwise.
fn with_out<F>(path: Option<&Path>, f: F) -> Result<u8, CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<u8, CliError>,
{
    match path {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut writer = BufWriter::new(file);
            let code = f(&mut writer)?;
            writer.flush().map_err(|e| CliError::Io(e.to_string()))?;
            Ok(code)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}
