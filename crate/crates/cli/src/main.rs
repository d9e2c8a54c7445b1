use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use epred::convergence::SweepParam;
use epred_cli::{cmd_run, cmd_sweep, cmd_verify, exit_code, parse_values, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "epred", version, about = "Euler-Poincaré simulations and invariance verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Dt,
    #[value(name = "N")]
    N,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a system and write its trajectory.
    Run { config: PathBuf },
    /// Run verification checks.
    Verify { config: PathBuf },
    /// Convergence sweep over the time step or grid size.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values, e.g. 4e-3,2e-3,1e-3
        #[arg(long)]
        values: String,
    },
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config } => cmd_run(&RunConfig::load(&config)?),
        Command::Verify { config } => cmd_verify(&RunConfig::load(&config)?),
        Command::Sweep { config, param, values } => {
            let values = parse_values(&values)?;
            let param = match param {
                Param::Dt => SweepParam::Dt,
                Param::N => SweepParam::N,
            };
            cmd_sweep(&RunConfig::load(&config)?, param, &values)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(exit_code(dispatch(cli)) as u8)
}
