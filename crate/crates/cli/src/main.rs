mod config;
mod tasks;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::{parse, validate, RunConfig};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};
use tasks::{run_task, Outcome, Status, TASK_KINDS};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "verify", version, about = "Run kinetic ellipticity verification tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every task of a config and write report.json plus one CSV per task.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's `output`, then `verify-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = "VERIFY_JOBS")]
        jobs: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the available task kinds.
    ListTasks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, jobs } => run(&config, out, jobs),
        Command::Validate { config } => check(&config),
        Command::ListTasks => {
            for (kind, what) in TASK_KINDS {
                println!("{kind:<22}{what}");
            }
            Ok(0)
        }
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<std::result::Result<RunConfig, Vec<config::Diagnostic>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = match parse(&text) {
        Ok(c) => c,
        Err(d) => return Ok(Err(vec![d])),
    };
    let diags = validate(&cfg);
    Ok(if diags.is_empty() { Ok(cfg) } else { Err(diags) })
}

fn report_diagnostics(diags: &[config::Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

fn check(path: &Path) -> Result<u8> {
    match load(path)? {
        Ok(_) => {
            println!("ok");
            Ok(0)
        }
        Err(diags) => {
            report_diagnostics(&diags);
            Ok(1)
        }
    }
}

fn run(path: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<u8> {
    let cfg = match load(path)? {
        Ok(c) => c,
        Err(diags) => {
            report_diagnostics(&diags);
            return Ok(1);
        }
    };
    if let Some(j) = jobs {
        anyhow::ensure!(j > 0, "--jobs must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("configuring the worker pool")?;
    }
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("verify-out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let started = unix_now();
    let mut outcomes = Vec::with_capacity(cfg.tasks.len());
    let mut timings = Vec::with_capacity(cfg.tasks.len());
    for (i, entry) in cfg.tasks.iter().enumerate() {
        let t0 = std::time::Instant::now();
        let o = run_task(i, entry, &cfg);
        eprintln!("{:<28}{:?}", o.name, o.status);
        timings.push(json!({ "name": o.name, "seconds": t0.elapsed().as_secs_f64() }));
        outcomes.push(o);
    }
    let report = write_outputs(&dir, &cfg, &outcomes)?;
    let meta = json!({ "started_unix": started, "finished_unix": unix_now(), "tasks": timings });
    fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    eprintln!("wrote {}", report.display());
    Ok(if outcomes.iter().any(|o| o.status == Status::Error) {
        1
    } else if outcomes.iter().any(|o| o.status == Status::Fail) {
        2
    } else {
        0
    })
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, outcomes: &[Outcome]) -> Result<PathBuf> {
    let mut tasks = Vec::new();
    for o in outcomes {
        let mut artifacts = Vec::new();
        if let Some(t) = &o.table {
            let file = format!("{}.csv", o.name);
            let mut w = csv::Writer::from_path(dir.join(&file)).with_context(|| format!("writing {file}"))?;
            w.write_record(&t.header)?;
            for row in &t.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            artifacts.push(file);
        }
        tasks.push(json!({ "name": o.name, "status": o.status, "metrics": o.metrics, "artifacts": artifacts }));
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "params": {
            "kernel": cfg.kernel,
            "quad": cfg.quad,
            "seed": cfg.seed,
            "distributions": cfg.distributions,
        },
        "tasks": tasks,
    });
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(path)
}
