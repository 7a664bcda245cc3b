use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memwave_cli::{cmd_bisect, cmd_certify, cmd_exponents, cmd_run, cmd_sweep, BisectArgs, CertifyArgs, ExponentsArgs};

#[derive(Parser)]
#[command(name = "memwave", version, about = "Wave equations with a fractional memory nonlinearity")]
struct Cli {
    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Store u every K accepted steps (needed by `certify`)
        #[arg(long, value_name = "K")]
        snapshots: Option<usize>,
        #[arg(long)]
        svg: bool,
    },
    /// Run the cartesian product of a sweep plan
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Bisect the data amplitude between no blow-up (lo) and blow-up (hi) before t_end
    Bisect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tabulate the critical exponents
    Exponents {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [1u32, 2, 3, 4, 5, 6])]
        n: Vec<u32>,
        /// Explicit γ values; defaults to 0.05, 0.10, ..., 0.95
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Evaluate the blow-up certificates on a stored run
    Certify {
        #[arg(long)]
        run_dir: PathBuf,
        /// Where certificate.json goes (default: the run directory)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t_scale: Option<f64>,
        #[arg(long)]
        spatial_scale: Option<f64>,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        surrogate_c: f64,
        #[arg(long, default_value_t = 20)]
        kato_terms: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let outcome = match cli.command {
        Command::Run { config, out, snapshots, svg } => cmd_run(&config, &out, snapshots, svg),
        Command::Sweep { config, out } => cmd_sweep(&config, &out, threads),
        Command::Bisect { config, lo, hi, tol, out } => cmd_bisect(&BisectArgs { config, lo, hi, tol, out }),
        Command::Exponents { n, gamma, out, svg } => {
            let gamma = if gamma.is_empty() { (1..20).map(|i| i as f64 * 0.05).collect() } else { gamma };
            cmd_exponents(&ExponentsArgs { n, gamma, out, svg })
        }
        Command::Certify { run_dir, out, t_scale, spatial_scale, ell, eta, surrogate_c, kato_terms } => {
            cmd_certify(&CertifyArgs { run_dir, out, t_scale, spatial_scale, ell, eta, surrogate_c, kato_terms })
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
