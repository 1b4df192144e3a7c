mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use softlabel_core::Error;

use args::{Cli, Command, RunConfig};

fn init_logging(level: args::LogLevel) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level.filter()).format_timestamp(None);
    if let Ok(spec) = std::env::var("SOFTLABEL_LOG") {
        builder.parse_filters(&spec);
    }
    let _ = builder.try_init();
}

fn load_config(path: &std::path::Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

fn execute(cli: Cli) -> Result<(), Error> {
    let cfg = match cli.command {
        Command::Repro(r) => load_config(&r.config)?,
        command => RunConfig {
            global: cli.global,
            command,
        },
    };
    init_logging(cfg.global.log_level);
    if let Some(n) = cfg.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("--threads: {e}")))?;
    }
    if let Some(path) = &cli.save_config {
        let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    commands::run(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
