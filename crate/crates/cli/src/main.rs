mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dcov::DcovError;

use args::{Cli, Command};

/// Usage problems exit with 2, problems with the data with 1.
fn exit_code(err: &DcovError) -> u8 {
    match err {
        DcovError::InvalidParameter(_)
        | DcovError::InvalidExponent(_)
        | DcovError::UnknownColumn(_)
        | DcovError::OverlappingColumns(_)
        | DcovError::DuplicateColumn(_)
        | DcovError::EmptySelection
        | DcovError::NotUnivariate(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = match &cli.command {
        Command::Stats(a) => commands::stats(a),
        Command::Test(a) => commands::test(a),
        Command::RankTest(a) => commands::rank(a),
        Command::Jackknife(a) => commands::jackknife_cmd(a),
        Command::Theory(t) => commands::theory(t),
        Command::Power(a) => commands::power(a),
    };
    match result {
        Ok(report) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if let Err(e) = report.write(cli.format, &mut lock).and_then(|_| lock.flush()) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
