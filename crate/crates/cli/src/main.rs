mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::FitPpca(a) => commands::fit_ppca(a),
        Command::Attack(a) => commands::attack_dataset(a),
        Command::ExcessRisk(a) => commands::excess_risk(a),
        Command::Shift(a) => commands::shift(a),
        Command::Demo2d(a) => commands::demo2d(a),
        Command::Spectra(a) => commands::spectra(a),
        Command::Verify(a) => commands::run_verify(a),
    }
}

/// A clap diagnostic folded onto one line, keeping the part that names the flag.
fn one_line(text: &str) -> String {
    text.lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("tip:"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut argv: Vec<String> = std::env::args().collect();
    if let Some(path) = args::config_path(&argv) {
        let merged = std::fs::read_to_string(&path)
            .map_err(|e| format!("config {}: {e}", path.display()))
            .and_then(|text| args::merge_config(&argv, &text));
        match merged {
            Ok(m) => argv = m,
            Err(e) => {
                eprintln!("error: invalid parameter `config`: {e}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e.render().to_string()));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
