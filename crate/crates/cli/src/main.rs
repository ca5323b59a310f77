mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use degparlog_core::{Error, Exec};
use serde_json::{json, Value};

use config::{load_config, RunConfig, DEFAULTS_HELP};
use run::{error_record, execute, write_report, Command};

const PASS: u8 = 0;
const ASSERTION_FAILED: u8 = 1;
const USAGE: u8 = 2;
const SOLVER: u8 = 3;

/// Degenerate logistic equations, their obstacle limit, and the
/// convergence studies between them.
#[derive(Debug, Parser)]
#[command(name = "degparlog", version, after_long_help = DEFAULTS_HELP)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; every key has a default (see --help).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for report.json, CSV tables and RDVI1 snapshots.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads for independent runs; 1 runs everything in order.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Format(_) => USAGE,
        _ => SOLVER,
    }
}

fn executor(threads: Option<usize>) -> Exec {
    match threads {
        Some(1) => Exec::Sequential,
        Some(n) => {
            #[cfg(feature = "parallel")]
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool to {n}: {e}");
            }
            #[cfg(not(feature = "parallel"))]
            log::warn!("built without the parallel feature; ignoring --threads {n}");
            Exec::Parallel
        }
        None => Exec::Parallel,
    }
}

fn prepare(cli: &Cli) -> Result<(RunConfig, degparlog_core::experiments::ExperimentConfig), Error> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    }
    .resolve()?;
    let exp = cfg.experiment(executor(cli.threads))?;
    exp.validate()?;
    if let Some(dt) = cfg.vi.dt {
        degparlog_core::obstacle::ViParams { dt, ..exp.vi_params() }.validate()?;
    }
    Ok((cfg, exp))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let start = Instant::now();
    let command = cli.command.to_possible_value().map(|v| v.get_name().to_string());

    let (cfg, exp) = match prepare(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("degparlog: {e}");
            let report = json!({
                "command": command,
                "status": "error",
                "exit_code": USAGE,
                "config": Value::Null,
                "error": error_record(&e),
            });
            if let Err(io) = write_report(&cli.out, &report) {
                eprintln!("degparlog: cannot write report: {io}");
            }
            return ExitCode::from(USAGE);
        }
    };

    let (outcome, result) = execute(cli.command, &cfg, &exp, &cli.out);
    let failed: Vec<&str> = outcome.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
    let (code, status) = match &result {
        Err(e) => (exit_code(e), "error"),
        Ok(()) if failed.is_empty() => (PASS, "pass"),
        Ok(()) => (ASSERTION_FAILED, "fail"),
    };
    let report = json!({
        "command": command,
        "status": status,
        "exit_code": code,
        "config": cfg,
        "exec": exp.exec,
        "eigenvalues": outcome.eigenvalues,
        "metrics": outcome.metrics,
        "assertions": outcome.assertions,
        "outputs": outcome.outputs,
        "error": result.as_ref().err().map(error_record),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
    });
    match write_report(&cli.out, &report) {
        Ok(path) => log::info!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("degparlog: cannot write report: {e}");
            return ExitCode::from(SOLVER);
        }
    }
    if let Err(e) = &result {
        eprintln!("degparlog: {e}");
    }
    for name in &failed {
        eprintln!("degparlog: assertion failed: {name}");
    }
    ExitCode::from(code)
}
