mod cmd_eval;
mod cmd_minmax;
mod cmd_train;
mod config;
mod error;
mod output;
mod policies;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser, Debug)]
#[command(
    name = "stackgame",
    version,
    about = "Constrained min-max solvers and Stackelberg pursuit games"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overwrite an existing run in the output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a coupled min-max benchmark.
    Minmax(cmd_minmax::MinmaxArgs),
    /// Train leader and follower policies on the reach-avoid game.
    Train(cmd_train::TrainArgs),
    /// Evaluate policies.
    Eval(cmd_eval::EvalArgs),
}

/// Loads the configuration and prepares the output directory.
pub struct Run {
    pub cfg: RunConfig,
    pub out: OutDir,
}

impl Run {
    fn open(
        common: &Common,
        adjust: impl FnOnce(&mut RunConfig) -> Result<(), CliError>,
    ) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(common.config.as_deref())?.with_seed(common.seed);
        adjust(&mut cfg)?;
        let out = OutDir::prepare(&common.out, common.force)?;
        out.write("config.resolved", cfg.to_toml())?;
        Ok(Self { cfg, out })
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Minmax(a) => cmd_minmax::run(&cli.common, a),
        Command::Train(a) => cmd_train::run(&cli.common, a),
        Command::Eval(a) => cmd_eval::run(&cli.common, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
