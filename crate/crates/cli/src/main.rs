use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robust_frontier_cli::{execute, Command, ExperimentKind, Invocation};

#[derive(Parser)]
#[command(name = "robust-frontier", version, about = "Robust mean-variance frontiers from data")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Bootstrap frontier for the configured experiment.
    FrontierBootstrap(Common),
    /// Out-of-sample frontier by simulation (newsvendor, toy).
    FrontierOos(Common),
    /// Pick a radius with the configured rule.
    Calibrate(Common),
    /// Run a full experiment suite.
    RunSuite {
        /// newsvendor, portfolio, logistic or toy
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// KEY=VALUE override, may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn invocation(self) -> Invocation {
        Invocation { config: self.config, seed: self.seed, out: self.out, overrides: self.overrides }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::FrontierBootstrap(c) => execute(&Command::FrontierBootstrap, &c.invocation()),
        Sub::FrontierOos(c) => execute(&Command::FrontierOos, &c.invocation()),
        Sub::Calibrate(c) => execute(&Command::Calibrate, &c.invocation()),
        Sub::RunSuite { name, common } => {
            ExperimentKind::parse(&name).and_then(|k| execute(&Command::RunSuite(k), &common.invocation()))
        }
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("robust-frontier: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
