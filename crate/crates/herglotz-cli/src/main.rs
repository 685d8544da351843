use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herglotz_cli::commands::{cmd_asymptotics, cmd_kernel, cmd_norms, cmd_reproduce, cmd_synth, cmd_verify_gram};
use herglotz_cli::config::DEFAULT_SEED;
use herglotz_cli::{CliError, CliResult, Dim, ParamFlags, RunConfig, Status};

/// Verification suites and field/kernel evaluation for elastic Herglotz waves.
///
/// Exit status: 0 pass, 1 tolerance failure, 2 usage or config error,
/// 3 I/O error, 4 reported but not judged.
#[derive(Parser)]
#[command(name = "herglotz", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Spatial dimension.
    #[arg(long, global = true, default_value_t = 3)]
    dim: u8,

    /// Truncation degree (l_max in 3D, n_max in 2D); the default depends on the verb.
    #[arg(long = "lmax", global = true)]
    l_max: Option<u32>,

    #[arg(long, global = true)]
    kp: Option<f64>,

    #[arg(long, global = true)]
    ks: Option<f64>,

    #[arg(long, global = true)]
    lambda: Option<f64>,

    #[arg(long, global = true)]
    mu: Option<f64>,

    #[arg(long, global = true)]
    rho: Option<f64>,

    #[arg(long, global = true)]
    omega: Option<f64>,

    /// Tolerance override; the default depends on the verb.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Output file (a directory for asymptotics); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Closed Gram forms, Hansen gradient Gram and conventions against quadrature.
    VerifyGram {
        /// Sphere radii, comma separated.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,

        /// Flip the sign of N on the quadrature side (negative control).
        #[arg(long)]
        perturb_convention: bool,
    },
    /// Radial integral decay, overlap decay and fitted rates.
    Asymptotics,
    /// Reproducing kernel at a pair of points.
    Kernel {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,

        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// Reproducing residuals of a coefficient field at seeded random points.
    Reproduce {
        /// Coefficient field JSON.
        #[arg(long)]
        field: PathBuf,

        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Herglotz synthesis of a far-field pattern on a grid of points.
    Synth {
        /// Far-field pattern JSON.
        #[arg(long)]
        farfield: PathBuf,

        /// CSV with columns x, y, z.
        #[arg(long)]
        grid: PathBuf,

        /// Append the finite-difference Navier residual.
        #[arg(long)]
        residual: bool,
    },
    /// Hilbert norms and L–N overlaps per degree.
    Norms,
}

fn config(c: &Common) -> CliResult<RunConfig> {
    let flags = ParamFlags {
        kp: c.kp,
        ks: c.ks,
        lambda: c.lambda,
        mu: c.mu,
        rho: c.rho,
        omega: c.omega,
    };
    let mut cfg = RunConfig::new(Dim::from_flag(c.dim)?, &flags)?;
    cfg.l_max = c.l_max;
    cfg.tol = c.tol;
    cfg.seed = c.seed;
    cfg.out = c.out.clone();
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<Status> {
    let cfg = config(&cli.common)?;
    match &cli.verb {
        Verb::VerifyGram {
            radii,
            perturb_convention,
        } => cmd_verify_gram(&cfg, radii.as_deref(), *perturb_convention),
        Verb::Asymptotics => cmd_asymptotics(&cfg),
        Verb::Kernel { x, y } => cmd_kernel(&cfg, x, y),
        Verb::Reproduce { field, samples } => cmd_reproduce(&cfg, field, *samples),
        Verb::Synth {
            farfield,
            grid,
            residual,
        } => cmd_synth(&cfg, farfield, grid, *residual),
        Verb::Norms => cmd_norms(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,herglotz=error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(s) => ExitCode::from(s.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run with --help for usage");
            }
            ExitCode::from(e.code() as u8)
        }
    }
}
