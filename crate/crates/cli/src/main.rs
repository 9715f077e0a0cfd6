use std::path::PathBuf;
use std::process::ExitCode;

use backreact_cli::{exit, run, verify, Injection, RunConfig, Scope};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "backreact", version, about = "Semiclassical backreaction of a scalar field on flat FLRW spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact and numerical self-checks; exits 1 on any FAIL.
    Verify {
        /// series, hadamard, subtraction, quadrature, dynamics or all.
        #[arg(long, default_value = "all")]
        scope: Scope,
        /// Perturb one catalog coefficient before certification, as `series:p,q:n/d`.
        #[arg(long)]
        inject: Option<Injection>,
    },
    /// Integrate a JSON run configuration and write CSV trajectories.
    Run {
        config: PathBuf,
        /// Output directory; overrides the `out` field of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify { scope, inject } => {
            let report = verify(scope, inject.as_ref());
            print!("{}", report.render());
            if report.passed() {
                exit::OK
            } else {
                exit::VERIFY_FAILED
            }
        }
        Command::Run { config, out } => {
            let result = RunConfig::load(&config).and_then(|cfg| {
                let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
                run(&cfg, &dir)
            });
            match result {
                Ok(o) => {
                    println!(
                        "wrote {} rows to {} ({} accepted, {} rejected steps)",
                        o.rows,
                        o.out.display(),
                        o.stats.accepted,
                        o.stats.rejected
                    );
                    exit::OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
