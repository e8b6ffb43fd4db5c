//! `govsim`: run scenarios, emit presets, merge matrices, query logs and
//! check replays.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use govsim_core::scenario::{preset, run_scenario, ConformanceMatrix, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "govsim", version, about = "Deterministic governance-driven blockchain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its report.
    Run {
        config: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the conformance matrix to stderr.
        #[arg(long)]
        matrix: bool,
    },
    /// Print a built-in profile config (polkadot-like, quorum-like).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge the matrices of one or more reports into one table.
    Matrix {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Emit JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
    },
    /// Print log entries of a report, one JSON object per line.
    Logs {
        report: PathBuf,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long, requires = "to")]
        from: Option<u64>,
        #[arg(long, requires = "from")]
        to: Option<u64>,
    },
    /// Re-run a config and compare with a stored report byte for byte.
    Replay {
        config: PathBuf,
        #[arg(long)]
        expect: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&read(path)?).with_context(|| format!("invalid config {}", path.display()))
}

fn load_report(path: &Path) -> Result<RunReport> {
    RunReport::from_json(&read(path)?).with_context(|| format!("invalid report {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(config: &ScenarioConfig) -> Result<RunReport> {
    run_scenario(config).map_err(|e| anyhow::anyhow!("{e}"))
}

fn first_difference(a: &str, b: &str) -> Option<(usize, String, String)> {
    let (mut la, mut lb) = (a.lines(), b.lines());
    for n in 1.. {
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x == y => continue,
            (x, y) => return Some((n, x.unwrap_or("<eof>").into(), y.unwrap_or("<eof>").into())),
        }
    }
    None
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, out, matrix } => {
            let report = execute(&load_config(&config)?)?;
            if matrix {
                eprint!("{}", report.matrix.render());
            }
            emit(&report.to_json(), out.as_deref())?;
        }
        Command::Preset { name, out } => {
            let config = preset(&name)?;
            let mut text = config.to_json();
            text.push('\n');
            emit(&text, out.as_deref())?;
        }
        Command::Matrix { reports, json } => {
            let loaded = reports.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
            let merged = ConformanceMatrix::merge(loaded.iter().map(|r| &r.matrix));
            if json {
                println!("{}", serde_json::to_string_pretty(&merged)?);
            } else {
                print!("{}", merged.render());
            }
        }
        Command::Logs { report, topic, from, to } => {
            let report = load_report(&report)?;
            let range = from.zip(to);
            if let Some((a, b)) = range {
                if a > b {
                    bail!("--from {a} is after --to {b}");
                }
            }
            for e in report.logs(topic.as_deref(), range) {
                println!("{}", serde_json::to_string(e)?);
            }
        }
        Command::Replay { config, expect } => {
            let expected = read(&expect)?;
            let actual = execute(&load_config(&config)?)?.to_json();
            if let Some((line, want, got)) = first_difference(&expected, &actual) {
                eprintln!("replay mismatch at line {line}");
                eprintln!("  expected: {want}");
                eprintln!("  actual:   {got}");
                return Ok(ExitCode::FAILURE);
            }
            if expected != actual {
                eprintln!("replay mismatch in trailing bytes");
                return Ok(ExitCode::FAILURE);
            }
            println!("replay matches {}", expect.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
