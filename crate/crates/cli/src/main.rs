//! `visc`: run the solver and the structural checks from model files.
//!
//! Exit status is 0 when every invoked check passes, 2 when a check fails
//! and 1 for configuration or input errors.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use visc_core::Error;

#[derive(Parser, Debug)]
#[command(name = "visc", version, about = "Monotone solver and structural checks for a degenerate pricing PDE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory; created if missing.
    #[arg(long, default_value = "visc-out")]
    pub out: PathBuf,
    /// Seed for every sampled quantity; recorded in each artifact.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the pricing equation on a grid and check the barrier sandwich.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        scheme: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sampled model validation, barrier residuals and structure checks of
    /// the reformulated Hamiltonian.
    CheckConditions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Radius for gradients and matrices in the structure checks.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Barrier table and constants.
    Barriers {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Euler flow of `f' = Γ(f)` and divergence scores of `∫ dr/Γ`.
    OsgoodDemo {
        /// `linear:L`, `power:γ` or `xlog`.
        #[arg(long)]
        gamma: String,
        #[arg(long, default_value_t = 1e-3)]
        f0: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_flow: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Refinement study over nested grids.
    Convergence {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated grid files, coarsest first.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<PathBuf>,
        #[arg(long)]
        scheme: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Solver against the Monte Carlo estimate at one point (ρ = 0 models).
    OracleCompare {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 200_000)]
        paths: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Grid file; defaults to a uniform grid on the model box.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// `Ψ` and its inverse on sampled points of a gauge's domain.
    TransformRoundtrip {
        /// Gauge identifier, e.g. `shift-sq` or `affine-sq:1,0.5`.
        #[arg(long)]
        gauge: String,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 0.0)]
        eps0: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("VISC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("VISC_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Solve { model, grid, scheme, common } => commands::solve(&model, &grid, scheme.as_deref(), &common),
        Command::CheckConditions { model, samples, radius, common } => {
            commands::check_conditions(&model, samples, radius, &common)
        }
        Command::Barriers { model, points, common } => commands::barriers(&model, points, &common),
        Command::OsgoodDemo { gamma, f0, dt, t_flow, common } => commands::osgood_demo(&gamma, f0, dt, t_flow, &common),
        Command::Convergence { model, grids, scheme, common } => {
            commands::convergence(&model, &grids, scheme.as_deref(), &common)
        }
        Command::OracleCompare { model, point, t, paths, steps, grid, common } => {
            commands::oracle_compare(&model, &point, t, paths, steps, grid.as_deref(), &common)
        }
        Command::TransformRoundtrip { gauge, a, b, eps0, samples, common } => {
            commands::transform_roundtrip(&gauge, a, b, eps0, samples, &common)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        // a model that violates a standing condition is a scientific failure
        Err(Error::Model(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
