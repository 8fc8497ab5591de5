use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use damage_cli::commands::{
    convergence_command, run_command, stability_command, sweep_command, t0_command, verify_command,
};
use damage_cli::config::{parse_config, parse_number};
use damage_cli::{CliError, EXIT_PARSE};

#[derive(Parser)]
#[command(
    name = "damage-sim",
    version,
    about = "Quasi-static complete-damage simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "damage-out")]
    output_dir: PathBuf,
    /// `section.key=value` or `key=value` overrides, applied after the file.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory.
    Run(Common),
    /// Existence time and tabulated barrier.
    T0 {
        #[arg(long, value_parser = parse_number)]
        delta: f64,
        #[arg(long, value_parser = parse_number)]
        eps: f64,
        #[arg(long, value_parser = parse_number, default_value = "1")]
        c3: f64,
        #[arg(long, value_parser = parse_number, default_value = "1")]
        horizon: f64,
        #[arg(long, default_value = "damage-out")]
        output_dir: PathBuf,
    },
    /// Check the invariants of a trajectory directory written by `run`.
    Verify { dir: PathBuf },
    /// Runs over the δ × z₀ amplitude × load amplitude grid.
    Sweep(Common),
    /// Grid and time-step refinement study.
    Convergence(Common),
    /// Growth of perturbations of the initial damage.
    Stability(Common),
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    let with_config = |c: &Common| parse_config(c.config.as_deref(), &c.overrides);
    match cmd {
        Command::Run(c) => run_command(&with_config(&c)?, &c.output_dir),
        Command::T0 {
            delta,
            eps,
            c3,
            horizon,
            output_dir,
        } => t0_command(delta, eps, c3, horizon, &output_dir),
        Command::Verify { dir } => verify_command(&dir),
        Command::Sweep(c) => sweep_command(&with_config(&c)?, &c.output_dir),
        Command::Convergence(c) => convergence_command(&with_config(&c)?, &c.output_dir),
        Command::Stability(c) => stability_command(&with_config(&c)?, &c.output_dir),
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var("DAMAGE_SIM_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Parse(format!(
            "DAMAGE_SIM_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::Parse(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome = thread_pool().and_then(|pool| match pool {
        Some(p) => p.install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    });
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
