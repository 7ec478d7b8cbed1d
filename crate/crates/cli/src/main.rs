use std::process::ExitCode;

use clap::Parser;
use indegree_cli::{run, Cli, CliError, ExperimentConfig, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match resolve(cli).and_then(|cfg| run(&cfg)) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn resolve(cli: Cli) -> Result<ExperimentConfig, CliError> {
    match (cli.config, cli.command) {
        (Some(_), Some(_)) => Err(CliError::Config("--config cannot be combined with a subcommand".into())),
        (Some(path), None) => ExperimentConfig::from_file(&path),
        (None, Some(command)) => Ok(ExperimentConfig {
            seed: cli.seed,
            output_dir: cli.output_dir,
            command,
        }),
        (None, None) => Err(CliError::Config("a subcommand or --config is required".into())),
    }
}
