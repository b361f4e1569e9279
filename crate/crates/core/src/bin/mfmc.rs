use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfmc::harness::{self, HarnessError, PbsOptions, DEFAULT_TOL};
use mfmc::pbs::DEFAULT_PARTITIONS;
use mfmc::text::fmt_real;

#[derive(Parser, Debug)]
#[command(name = "mfmc", version, about = "Markov model of a microfluidic molecular-communication channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pulse or continuous response: CSV `k,t,z_obs,z_out`
    Run {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Keep the full state vector every STRIDE steps
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Channel impulse response: CSV `i,t,g`
    Cir {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Equilibrium gain h'(I-Q)^-1 b and the equilibrium output for u0
    Equilibrium {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Particle-based simulation compared against the model
    Pbs {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        particles: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_PARTITIONS)]
        partitions: usize,
    },
    /// Parameter sweep: one CSV per point plus summary.csv
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Power-iteration estimate of the spectral radius of Q, with Collatz-Wielandt bounds
    Spectral {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        iters: usize,
    },
    /// Triplet listing of Q, psi, b and h
    Dump {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            scenario,
            output,
            stride,
        } => {
            if stride == Some(0) {
                return Err(HarnessError::Invalid("`--stride` must be at least 1".into()));
            }
            harness::cmd_run(&scenario, output.as_deref(), stride).map(drop)
        }
        Command::Cir { scenario, output } => harness::cmd_cir(&scenario, output.as_deref()).map(drop),
        Command::Equilibrium { scenario, tol } => {
            let eq = harness::cmd_equilibrium(&scenario, tol)?;
            print!("{}", eq.to_csv());
            Ok(())
        }
        Command::Pbs {
            scenario,
            output,
            particles,
            seed,
            partitions,
        } => {
            let opts = PbsOptions {
                particles,
                seed,
                partitions,
            };
            let report = harness::cmd_pbs(&scenario, output.as_deref(), opts)?;
            eprintln!(
                "max |residual| = {}, within 3 sigma: {:.2}% of {} steps",
                fmt_real(report.max_abs_residual),
                100.0 * report.within_3sigma,
                report.residuals.len()
            );
            Ok(())
        }
        Command::Sweep { sweep, output, tol } => {
            let rows = harness::cmd_sweep(&sweep, &output, tol)?;
            eprintln!("{} sweep points written to {}", rows.len(), output.display());
            Ok(())
        }
        Command::Spectral {
            scenario,
            tol,
            iters,
        } => {
            let rep = harness::cmd_spectral(&scenario, iters, tol)?;
            if !rep.converged {
                eprintln!("warning: power iteration did not converge in {iters} iterations");
            }
            println!(
                "rho,lower,upper,converged\n{},{},{},{}",
                fmt_real(rep.estimate),
                fmt_real(rep.lower),
                fmt_real(rep.upper),
                rep.converged
            );
            Ok(())
        }
        Command::Dump { scenario, output } => harness::cmd_dump(&scenario, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
