//! Command-line driver for the staged pipeline:
//! `cluster` -> `patterns` -> `calibrate` -> `score`, plus `simulate`.

mod args;
mod commands;
mod geojson;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, ais_anomaly::Error::Config("--threads must be at least 1".into()));
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Cluster(a) => commands::cluster(&a),
        Command::Patterns(a) => commands::patterns(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Score(a) => commands::score(&a),
        Command::Simulate(a) => commands::simulate(&a),
    }
}

fn error_json(e: &anyhow::Error) -> String {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<ais_anomaly::Error>())
        .map_or("error", |e| e.kind());
    serde_json::json!({ "error": { "kind": kind, "message": format!("{e:#}") } }).to_string()
}
