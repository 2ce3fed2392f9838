use std::path::PathBuf;

use clap::{Parser, Subcommand};

use ubgd::cli;

/// Backtracking / unbounded-backtracking gradient descent experiments.
#[derive(Parser)]
#[command(name = "ubgd", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run; writes a trace CSV and an audit JSON.
    Run { config: PathBuf },
    /// Run several schemes from the same start and tabulate them.
    Compare {
        config: PathBuf,
        /// Comma-separated, e.g. `backtracking,unbounded,hybrid:5,standard:0.1`.
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<String>,
    },
    /// Finite-difference gradient and Lipschitz checks on the corpus.
    Check {
        #[arg(default_value = "all")]
        name: String,
    },
    /// List corpus objectives.
    List,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() {
                cli::EXIT_USAGE
            } else {
                cli::EXIT_OK
            });
        }
    };
    let code = match args.command {
        Command::Run { config } => cli::cmd_run(&config),
        Command::Compare { config, schemes } => cli::cmd_compare(&config, &schemes),
        Command::Check { name } => cli::cmd_check(&name),
        Command::List => cli::cmd_list(),
    };
    std::process::exit(code);
}
