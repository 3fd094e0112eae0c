use clap::{Parser, Subcommand};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ncdp-sim", about = "Random-access collision recovery experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key=value config file.
    Run {
        /// Path to the config file.
        config: String,
        /// Override a config key, e.g. --set slots=100. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<String>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run {
            config,
            set,
            out,
            seed,
        } => match ncdp::cli::run_from_file(&config, &set, seed) {
            Ok(csv) => {
                let write_result = match out {
                    Some(path) => std::fs::write(&path, csv),
                    None => std::io::stdout().write_all(csv.as_bytes()),
                };
                if let Err(e) = write_result {
                    eprintln!("error: cannot write output: {e}");
                    return ExitCode::FAILURE;
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
