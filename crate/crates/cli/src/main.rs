//! Batch front door: seeded, configured runs of every study.
//!
//! ```text
//! fsde run config.toml [--seed N] [--threads K] [--out DIR]
//! fsde list-library [--json]
//! ```
//!
//! The default output root comes from `--out`, then the config's `out_dir`,
//! then the `FSDE_OUT` environment variable, then `./fsde-out`. Artifacts are
//! deterministic for a fixed (config, seed) across runs and thread counts.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fsde", version, about = "fractional-SDE numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the study described by a TOML config file.
    Run {
        /// path to the run configuration
        config: PathBuf,
        /// overrides the config's master seed
        #[arg(long)]
        seed: Option<u64>,
        /// rayon thread count (results are independent of this)
        #[arg(long)]
        threads: Option<usize>,
        /// output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in coefficient and drift-functional catalog.
    ListLibrary {
        #[arg(long)]
        json: bool,
    },
}

fn error_record(kind: &str, message: &str) {
    let doc = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{doc}");
}

fn run_command(
    config_path: &PathBuf,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> ExitCode {
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            error_record("thread-pool", &e.to_string());
        }
    }
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            error_record("io", &format!("{}: {e}", config_path.display()));
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            error_record("config-validation", &e);
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var("FSDE_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fsde-out"));

    let started = std::time::Instant::now();
    match commands::run(&cfg, &out_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            eprintln!(
                "done in {:.2}s ({} artifacts, config hash {})",
                started.elapsed().as_secs_f64(),
                outcome.files.len(),
                cfg.config_hash()
            );
            ExitCode::SUCCESS
        }
        Err(e @ fsde::Error::InvalidInput(_)) | Err(e @ fsde::Error::GridMismatch(_)) => {
            error_record("validation", &e.to_string());
            ExitCode::from(2)
        }
        Err(e) => {
            error_record("runtime", &e.to_string());
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            seed,
            threads,
            out,
        } => run_command(&config, seed, threads, out),
        Cmd::ListLibrary { json } => {
            print!("{}", commands::library_listing(json));
            ExitCode::SUCCESS
        }
    }
}
