use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use kmed_cli::{process_env, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &process_env()) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.output.as_bytes());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("kmed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
