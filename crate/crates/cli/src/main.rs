//! pricelab: evolve per-mode scalar waves on black-hole and potential
//! backgrounds, probe the low-energy resolvent, and verify the measured
//! late-time tails against closed-form predictions.
//!
//! Usage:
//!   pricelab run    --config <path> [--out <dir>]
//!   pricelab sweep  --config <path> [--out <dir>] [--jobs N]
//!   pricelab verify [--config <path>] [--out <dir>]
//!
//! Exit codes: 0 ok, 2 config error, 3 compute error, 4 acceptance failure.

mod config;
mod csvout;
mod experiments;
mod sweep;

use config::Config;
use experiments::RunError;
use std::path::PathBuf;
use std::process::ExitCode;

struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

fn parse_args() -> Result<Args, String> {
    let mut it = std::env::args().skip(1);
    let command = it.next().ok_or("missing subcommand (run|sweep|verify)")?;
    let mut args = Args {
        command,
        config: None,
        out: None,
        jobs: None,
    };
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => {
                args.config = Some(PathBuf::from(
                    it.next().ok_or("--config needs a path")?,
                ))
            }
            "--out" => args.out = Some(PathBuf::from(it.next().ok_or("--out needs a dir")?)),
            "--jobs" => {
                args.jobs = Some(
                    it.next()
                        .ok_or("--jobs needs a count")?
                        .parse()
                        .map_err(|_| "--jobs needs an integer".to_string())?,
                )
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(args)
}

fn load_config(args: &Args) -> Result<Config, String> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Config::parse(&text).map_err(|e| e.to_string())
        }
        None if args.command == "verify" => {
            Config::parse("[experiment]\nkind = verify\n").map_err(|e| e.to_string())
        }
        None => Err("--config is required".into()),
    }
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let kind = match cfg.validate() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.get_or("output", "dir", "out")));

    let jobs = args
        .jobs
        .or_else(|| {
            std::env::var("TOOL_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1);

    let outcome = match args.command.as_str() {
        "run" => experiments::dispatch(&cfg, &kind, &out_dir).map(|s| s.line),
        "verify" => {
            if kind != "verify" {
                Err(RunError::Config("verify expects kind = verify".into()))
            } else {
                experiments::dispatch(&cfg, &kind, &out_dir).map(|s| s.line)
            }
        }
        "sweep" => sweep::run_sweep(&cfg, &kind, &out_dir, jobs),
        other => {
            eprintln!("error: unknown subcommand '{other}'");
            return ExitCode::from(2);
        }
    };
    match outcome {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(RunError::AcceptanceFailed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(4)
        }
    }
}
