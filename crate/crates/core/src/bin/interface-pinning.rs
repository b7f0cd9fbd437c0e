use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interface_pinning::cli::{self, RunConfig};

#[derive(Parser)]
#[command(version, about = "Pinned interface experiments")]
struct Args {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or an emitted manifest.json
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set chain.seed=7`
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List experiments and the results they probe
    List,
}

fn run(config: PathBuf, set: Vec<String>) -> interface_pinning::Result<i32> {
    let cfg = RunConfig::load(&config, &set)?;
    let outcome = cli::run(&cfg, cli::workers_from_env()?)?;
    for c in &outcome.report.checks {
        println!("{:<12} {}: {}", c.verdict.to_string(), c.name, c.detail);
    }
    println!("{} -> {}", outcome.report.verdict, outcome.dir.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match Args::parse().command {
        None | Some(Command::List) => {
            print!("{}", cli::format_list());
            ExitCode::SUCCESS
        }
        Some(Command::Run { config, set }) => match run(config, set) {
            Ok(code) => ExitCode::from(code as u8),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
