//! `ledgerscope` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input or arguments, 2 for
//! internal failures. Every run echoes its full configuration as
//! `config.json`, which `ledgerscope replay` accepts.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, DiscoverArgs, EvalArgs, FocusArgs, InjectArgs, RunConfig, SmurfArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ledgerscope",
    version,
    about = "Smurfing detection, attention routing and distribution discovery for ledgers"
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "AUTOAUDIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect sender → intermediaries → receiver structures
    Smurf(SmurfArgs),
    /// Find the window whose behaviour changed most and explain it
    Focus(FocusArgs),
    /// Month × pair projection, petal clusters and power-law fits
    Discover(DiscoverArgs),
    /// Write a ledger with a planted pattern and decoys
    Inject(InjectArgs),
    /// Accuracy sweep of the detector and its ablations
    Eval(EvalArgs),
    /// Rerun a saved config.json
    Replay {
        config: PathBuf,
        /// Write outputs here instead of the recorded location
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read_config(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: invalid config: {e}", path.display())))?;
    Ok(file.run)
}

fn execute(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("cannot start thread pool: {e}")))?;
    }
    let mut cfg = match cli.command {
        Command::Smurf(a) => RunConfig::Smurf(a),
        Command::Focus(a) => RunConfig::Focus(a),
        Command::Discover(a) => RunConfig::Discover(a),
        Command::Inject(a) => RunConfig::Inject(a),
        Command::Eval(a) => RunConfig::Eval(a),
        Command::Replay { config, output } => {
            let mut cfg = read_config(&config)?;
            if let Some(out) = output {
                cfg.set_output(out);
            }
            log::info!("replaying {}", config.display());
            cfg
        }
    };
    if let Some(input) = cfg.input() {
        if !input.is_file() {
            return Err(CliError::Input(format!(
                "input file {} does not exist",
                input.display()
            )));
        }
    }
    cfg.absolutize()
        .map_err(|e| CliError::Input(format!("cannot resolve {}: {e}", cfg.output().display())))?;
    commands::run(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(2),
    }
}
