mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("PARATENSOR_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::KernelDemo(a) => commands::kernel_demo_cmd(a),
        Command::ConeDemo(a) => commands::cone_demo_cmd(a),
        Command::CzSplit(a) => commands::cz_split_cmd(a),
        Command::Regularity(a) => commands::regularity_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("paratensor: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
