mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, Command};
use lrss_core::Error;

fn exit_code(err: &Error) -> u8 {
    if err.is_invalid_argument() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    let result = match cli.command {
        Command::Replay(args) => manifest::replay(&args),
        cmd => commands::run(cmd),
    };
    match result {
        Ok(summary) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary.json).expect("summary serializes"));
            } else {
                for line in &summary.lines {
                    println!("{line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
