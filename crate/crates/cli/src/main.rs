use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prescurv_cli::{cmd_curvature, cmd_solve, cmd_spectrum, cmd_verify, configure_threads, exit, CliResult};

#[derive(Parser)]
#[command(name = "prescurv", version, about = "Prescribed negative curvature solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the conformal exponent and write the result directory.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the background curvature and its orthogonal-coordinate variants.
    Curvature {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest Dirichlet eigenpairs of the metric Laplacian.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the invariant checks on a solve directory.
    Verify { dir: PathBuf },
}

fn run(cli: Cli) -> CliResult<i32> {
    configure_threads()?;
    match cli.command {
        Command::Solve { config, out } => {
            let o = cmd_solve(&config, out.as_deref())?;
            let r = &o.report;
            println!(
                "converged={} iters={} S={:e} b_l2={:e} checks_ok={} -> {}",
                r.converged,
                r.iters,
                r.s_final,
                r.b_l2_final,
                r.checks_ok,
                o.dir.display()
            );
            Ok(o.exit_code)
        }
        Command::Curvature { config, out } => {
            let o = cmd_curvature(&config, out.as_deref())?;
            println!(
                "K0 in [{:e}, {:e}] -> {}",
                o.summary.k0_min,
                o.summary.k0_max,
                o.dir.display()
            );
            if let Some(orth) = &o.summary.orthogonal {
                println!("{}", orth.sample.note);
            }
            Ok(exit::OK)
        }
        Command::Spectrum { config, k, out } => {
            let o = cmd_spectrum(&config, k, out.as_deref())?;
            println!("lambda = {:?} -> {}", o.summary.lambdas, o.dir.display());
            Ok(exit::OK)
        }
        Command::Verify { dir } => {
            let r = cmd_verify(&dir)?;
            for c in &r.checks {
                println!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name);
            }
            if !r.passed {
                eprintln!("failed checks: {}", r.failed().join(", "));
            }
            Ok(r.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let code = run(Cli::parse()).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
