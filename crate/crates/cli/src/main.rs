//! `subflow` — experiment orchestration for substitution suspension flows.
//!
//! Usage: `subflow <command> --config <path> [--key.path=value ...]`
//!
//! Commands: analyze, return-word, spectrum, ek, discrepancy, product,
//! certify. Exit codes: 0 success, 2 assumption violation, 3 numeric
//! failure, 4 configuration error. `SUBFLOW_THREADS` caps parallelism.

mod commands;
mod config;
mod output;

use commands::Context;
use config::{Command, ConfigError, ExperimentConfig};
use subflow_core::Error;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    if let Ok(threads) = std::env::var("SUBFLOW_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parsed = match parse_args(&args) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("subflow: {msg}");
            eprintln!("{USAGE}");
            return 4;
        }
    };
    let cfg = match ExperimentConfig::load(&parsed.config_path, parsed.command, &parsed.overrides)
    {
        Ok(cfg) => cfg,
        Err(e @ ConfigError::Parse(_)) | Err(e @ ConfigError::Schema { .. }) => {
            eprintln!("subflow: {e}");
            return 4;
        }
    };
    let ctx = match Context::new(cfg) {
        Ok(ctx) => ctx,
        Err(Error::Parse(msg)) => {
            eprintln!("subflow: ParseError: {msg}");
            return 4;
        }
        Err(e) => return report_core_error(e),
    };
    match commands::dispatch(&ctx) {
        Ok(out) => {
            if let Err(e) = out.commit(&ctx.cfg.output_dir) {
                eprintln!("subflow: failed to write outputs: {e}");
                return 3;
            }
            for name in out.names() {
                println!("wrote {}/{}", ctx.cfg.output_dir, name);
            }
            0
        }
        Err(e) => report_core_error(e),
    }
}

fn report_core_error(e: Error) -> i32 {
    eprintln!("subflow: {e}");
    match e {
        Error::AssumptionViolation(_) => 2,
        Error::Parse(_) => 4,
        _ => 3,
    }
}

const USAGE: &str = "usage: subflow <analyze|return-word|spectrum|ek|discrepancy|product|certify> \
--config <path> [--key.path=value ...]";

struct ParsedArgs {
    command: Option<Command>,
    config_path: String,
    overrides: Vec<(String, String)>,
}

fn parse_args(args: &[String]) -> Result<ParsedArgs, String> {
    let mut command = None;
    let mut config_path = None;
    let mut overrides = Vec::new();
    let mut iter = args.iter().peekable();
    let mut first_positional = true;
    while let Some(arg) = iter.next() {
        if let Some(rest) = arg.strip_prefix("--") {
            if rest == "config" {
                let value = iter
                    .next()
                    .ok_or_else(|| "--config needs a path".to_string())?;
                config_path = Some(value.clone());
            } else if let Some(path) = rest.strip_prefix("config=") {
                config_path = Some(path.to_string());
            } else if let Some((key, value)) = rest.split_once('=') {
                overrides.push((key.to_string(), value.to_string()));
            } else {
                return Err(format!("unknown flag '--{rest}' (overrides use --key=value)"));
            }
        } else if first_positional {
            first_positional = false;
            command = Some(
                Command::parse(arg).ok_or_else(|| format!("unknown command '{arg}'"))?,
            );
        } else {
            return Err(format!("unexpected argument '{arg}'"));
        }
    }
    Ok(ParsedArgs {
        command,
        config_path: config_path.ok_or_else(|| "missing --config <path>".to_string())?,
        overrides,
    })
}
