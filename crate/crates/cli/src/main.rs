use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdpp_cli::{load_config, CliError, Command, Key, RunConfig, Setting};

#[derive(Parser)]
#[command(name = "sdpp", version, about = "Stochastic delayed two-prey/one-predator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one sample path and write `t,x,y,z`.
    Simulate(Common),
    /// Run a replicate set, write per-gridpoint statistics and check the predicted regime.
    Ensemble(Common),
    /// Evaluate the closed-form criteria and print the hypothesis trace.
    Classify(Common),
    /// Measure convergence of the noise-free scheme against a fine reference.
    Convergence(Common),
    /// Repeat simulate or ensemble over a list of parameter values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the RNG seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output file (directory for `sweep`).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn prepare(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => sdpp_cli::parse_config("")?,
    };
    if let Some(seed) = common.seed {
        cfg.override_key(Key::Seed, Setting::Count(seed))?;
    }
    if let Some(out) = &common.out {
        cfg.override_key(Key::Output, Setting::Path(out.clone()))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, common) = match &cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Ensemble(c) => (Command::Ensemble, c),
        Cmd::Classify(c) => (Command::Classify, c),
        Cmd::Convergence(c) => (Command::Convergence, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = prepare(common).and_then(|cfg| sdpp_cli::run(command, &cfg, &mut out));
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdpp {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
