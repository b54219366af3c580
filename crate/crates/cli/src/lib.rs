//! Configuration-driven front end for the `mpsolve` pipeline.
//!
//! Every run reads one TOML config, writes its reports and artifacts into the
//! configured output directory, and records a `<command>.manifest.json` with
//! the SHA-256 of the config bytes, the verdicts and the exit code.

pub mod commands;
pub mod config;
pub mod report;

use std::path::Path;

pub use commands::{Command, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PASS, EXIT_VERDICT};

use crate::config::{load, Setup};
use crate::report::{sha256_hex, Manifest};

/// Worker threads from `SOLVER_THREADS`; unset means the rayon default.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SOLVER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SOLVER_THREADS = {raw:?} is not a positive integer"))?;
    // a pool already built in this process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run one subcommand against a config file and return the process exit code.
pub fn run(cmd: Command, config_path: &Path) -> i32 {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    let loaded = match load(config_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cfg = &loaded.config;
    let out = cfg.output_dir();
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    let outcome = match Setup::build(cfg) {
        Ok(setup) => commands::execute(cmd, cfg, &setup),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let manifest = Manifest {
        command: cmd.name().into(),
        config_sha256: sha256_hex(&loaded.bytes),
        seed: cfg.seed,
        exit_code: outcome.code,
        verdicts: outcome.verdicts.clone(),
        constants: outcome.constants.clone(),
        message: outcome.message.clone(),
    };
    if let Err(e) = manifest.write(&out) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_CONFIG;
    }
    for (name, verdict) in &outcome.verdicts {
        println!("{name}: {}", verdict.as_str().unwrap_or_default());
    }
    if let Some(msg) = &outcome.message {
        eprintln!("{}: {msg}", cmd.name());
    }
    outcome.code
}
