use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;
use rimu_cli::{run, Cli};

/// `RIMU_OPT_LOG` selects the stderr log level: quiet (default), info or debug.
fn init_logging() {
    let level = match std::env::var("RIMU_OPT_LOG").as_deref() {
        Ok("info") => LevelFilter::Info,
        Ok("debug") => LevelFilter::Debug,
        _ => LevelFilter::Off,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    // clap's own usage-error code is 2, which here means "not converged".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("rimu-opt: {e}");
            ExitCode::from(1)
        }
    }
}
