use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = holeburn_cli::Cli::parse();
    match holeburn_cli::run(&cli, std::env::args().skip(1).collect()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
