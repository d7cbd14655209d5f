//! Command-line driver: forward Green's-data generation, single-site
//! inversion, invariant verification, and the exponential-locality probe.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::GlobalOpts;

#[derive(Parser)]
#[command(
    name = "matweyl",
    about = "Weyl-Titchmarsh theory for matrix-valued Jacobi, Schrodinger, and Dirac operators: Green's data from coefficients and coefficients back from Green's data at one site",
    version
)]
struct Cli {
    /// Tolerance scale applied to verification thresholds
    #[arg(long, global = true, default_value_t = 1.0)]
    tol: f64,

    /// Starting node count for contour quadratures
    #[arg(long, global = true, default_value_t = 64)]
    nodes: usize,

    /// Ray angle arg(z) used when generating spectral points
    #[arg(long, global = true, default_value_t = 3.0 * std::f64::consts::FRAC_PI_4)]
    ray_angle: f64,

    /// Seed for all randomized draws
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Jacobi Green's data at one lattice site along a ray
    Forward {
        /// Operator file (kind = jacobi)
        operator: PathBuf,
        /// Reference site k0
        #[arg(long, default_value_t = 0)]
        site: i64,
        /// Explicit points "re,im;re,im;..." (overrides the ray grid)
        #[arg(long)]
        z: Option<String>,
        /// Smallest modulus on the ray
        #[arg(long, default_value_t = 10.0)]
        zmin: f64,
        /// Largest modulus on the ray
        #[arg(long, default_value_t = 1e5)]
        zmax: f64,
        /// Number of ray points
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// Output sample file
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct Jacobi coefficients from sampled Green's data
    Invert {
        /// Sample file written by `forward`
        samples: PathBuf,
        /// Data case: i (g0, G01), ii (g0, G01+G10), iii (g0, g1, A(k0))
        #[arg(long, default_value = "i")]
        case: String,
        /// Hints file (JSON with "a0" for case iii)
        #[arg(long)]
        hints: Option<PathBuf>,
        /// Output report file
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites against an operator file
    Verify {
        operator: PathBuf,
        /// Shorter randomized sweeps
        #[arg(long)]
        quick: bool,
    },
    /// Sample continuum diagonal Green's data (g, g') at a grid point
    ContinuumForward {
        /// Operator file (kind = schrodinger or dirac)
        operator: PathBuf,
        /// Evaluation point (must lie on the grid)
        #[arg(long, default_value_t = 0.0)]
        point: f64,
        /// Explicit points "re,im;..." (overrides the ray grid)
        #[arg(long)]
        z: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        zmin: f64,
        #[arg(long, default_value_t = 100.0)]
        zmax: f64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Recover continuum Weyl matrices pointwise from (g, g') samples
    ContinuumInvert {
        samples: PathBuf,
        /// Hints file (JSON with "b11"/"b12" at x0 for Dirac)
        #[arg(long)]
        hints: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fit the exponential agreement radius between two continuum operators
    ProbeLocal {
        operator1: PathBuf,
        operator2: PathBuf,
        /// Probe point (must lie on both grids)
        #[arg(long, default_value_t = 0.0)]
        point: f64,
        #[arg(long, default_value_t = 1.0)]
        zmin: f64,
        #[arg(long, default_value_t = 100.0)]
        zmax: f64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a deterministic demo operator file
    MakeDemo {
        /// jacobi-free, jacobi, schrodinger, or dirac
        #[arg(long, default_value = "jacobi")]
        kind: String,
        /// Matrix dimension
        #[arg(long, default_value_t = 2)]
        dim: usize,
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = GlobalOpts {
        tol_scale: cli.tol,
        nodes: cli.nodes,
        ray_angle: cli.ray_angle,
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Forward {
            operator,
            site,
            z,
            zmin,
            zmax,
            count,
            out,
        } => commands::resolve_points(z, *zmin, *zmax, *count, opts.ray_angle).and_then(|pts| {
            let out = out
                .clone()
                .unwrap_or_else(|| commands::default_out(operator, "samples"));
            commands::cmd_forward(&opts, operator, *site, pts, &out)
        }),
        Command::Invert {
            samples,
            case,
            hints,
            out,
        } => {
            let out = out
                .clone()
                .unwrap_or_else(|| commands::default_out(samples, "report"));
            commands::cmd_invert(&opts, samples, case, hints.as_deref(), &out)
        }
        Command::Verify { operator, quick } => {
            match commands::cmd_verify(&opts, operator, *quick) {
                Ok(true) => return ExitCode::SUCCESS,
                Ok(false) => return ExitCode::from(1),
                Err(e) => Err(e),
            }
        }
        Command::ContinuumForward {
            operator,
            point,
            z,
            zmin,
            zmax,
            count,
            out,
        } => commands::resolve_points(z, *zmin, *zmax, *count, opts.ray_angle).and_then(|pts| {
            let out = out
                .clone()
                .unwrap_or_else(|| commands::default_out(operator, "samples"));
            commands::cmd_continuum_forward(&opts, operator, *point, pts, &out)
        }),
        Command::ContinuumInvert {
            samples,
            hints,
            out,
        } => {
            let out = out
                .clone()
                .unwrap_or_else(|| commands::default_out(samples, "weyl"));
            commands::cmd_continuum_invert(&opts, samples, hints.as_deref(), &out)
        }
        Command::ProbeLocal {
            operator1,
            operator2,
            point,
            zmin,
            zmax,
            count,
            out,
        } => commands::cmd_probe_local(
            &opts,
            operator1,
            operator2,
            *point,
            *zmin,
            *zmax,
            *count,
            out.as_deref(),
        ),
        Command::MakeDemo { kind, dim, out } => commands::cmd_make_demo(&opts, kind, *dim, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            commands::emit_error(&e);
            ExitCode::from(commands::exit_code_for(&e) as u8)
        }
    }
}
