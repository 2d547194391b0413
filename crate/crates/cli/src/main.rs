use std::io::Write;
use std::process::ExitCode;

use threestage_cli::{list_families, parse_arguments, run_experiment, verify_families, Command, UsageError};

fn main() -> ExitCode {
    let command = match parse_arguments(std::env::args_os()) {
        Ok(command) => command,
        Err(UsageError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (output, ok) = match command {
        Command::ListFamilies => (list_families(), true),
        Command::VerifyFamilies => verify_families(),
        Command::Run(config) => match run_experiment(&config).and_then(|r| r.render()) {
            Ok(text) => (text, true),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
    };
    if std::io::stdout().write_all(output.as_bytes()).is_err() {
        return ExitCode::FAILURE;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
