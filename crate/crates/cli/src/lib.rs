//! Command-line front end for `rkl`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

pub use commands::{Cli, Command};
pub use config::RunConfig;
pub use error::CliError;

/// Flags folded into the override list, applied after any `--set`.
fn overrides(cli: &Cli) -> Vec<String> {
    let mut all = cli.set.clone();
    if let Some(seed) = cli.seed {
        all.push(format!("seed={seed}"));
    }
    if let Some(path) = &cli.data {
        all.push(format!(
            "data.path={}",
            Value::from(path.to_string_lossy().into_owned())
        ));
    }
    if let Command::SynthData { lambda: Some(l) } = &cli.command {
        all.push(format!("synth.lambda={l}"));
    }
    all
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    RunConfig::load(cli.config.as_deref(), &overrides(cli))
}

/// Run one command and write `summary.json`; returns the summary path.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let cfg = resolve_config(cli)?;
    let hash = cfg.hash();
    log::info!("{} with config {} (seed {})", cli.command.name(), &hash[..12], cfg.seed);
    let outcome = commands::run(&cli.command, &cfg, &cli.out)?;
    let summary = json!({
        "command": cli.command.name(),
        "seed": cfg.seed,
        "config_hash": hash,
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "wall_seconds": start.elapsed().as_secs_f64(),
        "metrics": outcome.metrics,
        "artifacts": outcome.artifacts.iter().map(|p| p.to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let path = cli.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Data {
        module: "cli",
        cause: format!("cannot write {}: {e}", path.display()),
    })?;
    Ok(path)
}
