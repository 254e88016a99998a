mod args;
mod commands;

use args::{Cli, Command};
use clap::Parser;
use commands::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::ExitCode;

/// Overlays the flags given on the command line onto the config file.
fn merge<T: Serialize + DeserializeOwned>(
    explicit: &T,
    config: Option<&Path>,
    command: &str,
) -> CliResult<(T, serde_json::Value)> {
    let mut base = match config {
        None => serde_json::Value::Object(Default::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            // a block named after the subcommand wins over a flat file
            match v.get(command) {
                Some(block) if block.is_object() => block.clone(),
                _ => v,
            }
        }
    };
    if !base.is_object() {
        return Err(CliError::Config("config file must hold a JSON object".into()));
    }
    let given = serde_json::to_value(explicit).expect("arguments serialize");
    if let (Some(b), serde_json::Value::Object(g)) = (base.as_object_mut(), given) {
        for (k, v) in g {
            if !v.is_null() {
                b.insert(k, v);
            }
        }
    }
    let merged: T = serde_json::from_value(base.clone()).map_err(|e| {
        CliError::Config(format!(
            "{}: {e}",
            config.map(|p| p.display().to_string()).unwrap_or_default()
        ))
    })?;
    let canonical = serde_json::to_value(&merged).expect("arguments serialize");
    Ok((merged, canonical))
}

fn hash(command: &str, config: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_string(config).expect("config serializes").as_bytes());
    hex::encode(h.finalize())
}

fn threads(cli: &Cli) -> CliResult<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("SLE_LAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|e| CliError::Config(format!("SLE_LAB_THREADS='{v}': {e}"))),
        Err(_) => Ok(None),
    }
}

macro_rules! dispatch {
    ($cli:expr, $args:expr, $f:path) => {{
        let name = $cli.command.name();
        let (merged, canonical) = merge($args, $cli.config.as_deref(), name)?;
        let h = hash(name, &canonical);
        let out = commands::output(&$cli.out, name, canonical, h);
        $f(&merged, &out)
    }};
}

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(n) = threads(cli)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => dispatch!(cli, a, commands::simulate_cmd),
        Command::Limit(a) => dispatch!(cli, a, commands::limit_cmd),
        Command::Hull(a) => dispatch!(cli, a, commands::hull_cmd),
        Command::Curves(a) => dispatch!(cli, a, commands::curves_cmd),
        Command::Converge(a) => dispatch!(cli, a, commands::converge_cmd),
        Command::Freeconv(a) => dispatch!(cli, a, commands::freeconv_cmd),
        Command::SupportTime(a) => dispatch!(cli, a, commands::support_time_cmd),
        Command::Moments(a) => dispatch!(cli, a, commands::moments_cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sle-lab: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(1),
                CliError::Numeric(_) | CliError::Io(_) => ExitCode::from(2),
            }
        }
    }
}
