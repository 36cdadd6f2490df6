//! `hlx <task> --config <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit codes: 0 when every verdict passes, 1 on a failed verdict or a
//! module error, 2 on usage or config errors (no artifacts are written).

mod config;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::Parser;
use ini::Ini;
use sha2::{Digest, Sha256};

use config::Config;
use tasks::{Ctx, Outcome, Task, Tolerances};

#[derive(Parser, Debug)]
#[command(name = "hlx", version, about = "Hopf-Lax flow and absolutely minimizing function experiments")]
struct Cli {
    task: Task,
    /// INI config; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "hlx-out")]
    out: PathBuf,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

struct Setup {
    cfg: Config,
    config_name: String,
    config_hash: String,
    seed: u64,
    tol: Tolerances,
    out: PathBuf,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("HLX_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| anyhow!("HLX_THREADS must be a positive integer, got {v:?}")),
    }
}

fn setup(cli: &Cli) -> Result<Setup> {
    let (cfg, config_name, config_hash) = match &cli.config {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
            (Config::load(p)?, p.display().to_string(), sha256(&bytes))
        }
        None => (Config::empty(), "-".to_string(), "-".to_string()),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.seed()?,
    };
    let tol = Tolerances::from_config(&cfg)?;
    let out = std::path::absolute(&cli.out).with_context(|| format!("resolving {}", cli.out.display()))?;
    hlx_core::par::configure_threads(threads()?);
    Ok(Setup { cfg, config_name, config_hash, seed, tol, out })
}

fn write_outputs(task: Task, s: &Setup, result: &Result<Outcome>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut m = Ini::new();
    let status = match result {
        Ok(o) if o.pass() => "pass",
        Ok(_) => "fail",
        Err(_) => "error",
    };
    m.with_section(Some("run"))
        .set("task", task.name())
        .set("seed", s.seed.to_string())
        .set("config", s.config_name.clone())
        .set("config_sha256", s.config_hash.clone())
        .set("status", status);
    if let Err(e) = result {
        m.with_section(Some("run")).set("error", format!("{e:#}"));
    }
    for (k, v) in s.cfg.entries() {
        m.with_section(Some("inputs")).set(k, v);
    }
    for (k, v) in s.tol.entries() {
        m.with_section(Some("tolerances")).set(k, format!("{v:e}"));
    }
    if let Ok(o) = result {
        for (k, pass) in &o.verdicts {
            m.with_section(Some("verdicts")).set(k.clone(), if *pass { "pass" } else { "fail" });
        }
        for (name, body) in &o.artifacts {
            std::fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
            m.with_section(Some("artifacts")).set(name.clone(), sha256(body.as_bytes()));
        }
    }
    m.write_to_file(dir.join("manifest.ini")).context("writing manifest.ini")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let s = match setup(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("hlx: {e:#}");
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx { cfg: &s.cfg, seed: s.seed, tol: s.tol };
    let result = tasks::run(cli.task, &ctx);
    match &result {
        Ok(o) => o.lines.iter().for_each(|l| println!("{l}")),
        Err(e) => eprintln!("hlx {}: {e:#}", cli.task.name()),
    }
    if let Err(e) = write_outputs(cli.task, &s, &result, &s.out) {
        eprintln!("hlx: {e:#}");
        return ExitCode::from(1);
    }
    println!("artifacts in {}", s.out.display());
    match result {
        Ok(o) if o.pass() => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    }
}
