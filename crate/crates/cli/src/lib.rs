//! Command-line front end for the modgap experiments.
//!
//! Every subcommand prints a short summary. With `--out` it also writes its
//! primary output (a CSV table or a JSON report), a JSON report
//! `{"manifest": ..., "results": ...}` and a replayable run manifest.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

pub mod commands;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use serde_json::json;

pub use commands::Command;
use commands::CmdResult;
use manifest::{sidecar_path, RunManifest};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "modgap", version, about = "Cone effect and modality gap experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Primary output file; siblings get the report, manifest and plot
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart next to the output
    #[arg(long, global = true)]
    pub plot: bool,
    /// Replay the run recorded in this manifest
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs one subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (command, seed, out) = match (&cli.command, &cli.manifest) {
        (Some(c), None) => (c.clone(), cli.seed, cli.out.clone()),
        (None, Some(path)) => match RunManifest::load(path).and_then(|m| Ok((m.command()?, m))) {
            Ok((c, m)) => (c, m.seed, cli.out.clone().or_else(|| m.outputs.first().cloned())),
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        (Some(_), Some(_)) => return usage("give either a subcommand or --manifest, not both"),
        (None, None) => return usage("missing subcommand"),
    };
    if cli.threads == Some(0) {
        return usage("--threads must be at least 1");
    }
    if cli.plot && out.is_none() {
        return usage("--plot needs --out");
    }
    match execute(&command, seed, out.as_deref(), cli.plot, cli.threads) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn usage(message: &str) -> i32 {
    eprintln!("error: {message}\n");
    eprintln!("{}", Cli::command().render_help());
    1
}

fn execute(command: &Command, seed: u64, out: Option<&Path>, plot: bool, threads: Option<usize>) -> CmdResult<()> {
    if let Some(out) = out {
        if command.is_tabular() && out.extension().is_some_and(|e| e == "json") {
            return Err(format!(
                "{} writes a CSV table; choose an --out path not ending in .json",
                command.name()
            )
            .into());
        }
    }
    let start = Instant::now();
    let outcome = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| command.run(seed))?,
        None => command.run(seed)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    for line in &outcome.summary {
        println!("{line}");
    }

    let mut manifest = RunManifest::new(command, seed)?;
    let report = json!({"manifest": manifest.stable(), "results": outcome.results});
    let report_text = serde_json::to_string_pretty(&report)? + "\n";
    let Some(out) = out else {
        return Ok(());
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut outputs = vec![out.to_path_buf()];
    match &outcome.table {
        Some(table) => {
            fs::write(out, table)?;
            let report_path = out.with_extension("json");
            fs::write(&report_path, &report_text)?;
            outputs.push(report_path);
        }
        None => fs::write(out, &report_text)?,
    }
    if plot {
        match (&outcome.table, &outcome.plot) {
            (Some(table), Some(spec)) => {
                let svg_path = out.with_extension("svg");
                fs::write(&svg_path, svg::render(table, spec)?)?;
                outputs.push(svg_path);
            }
            _ => log::warn!("{} has no table to plot", command.name()),
        }
    }
    outputs.extend(outcome.extra_outputs);
    manifest.outputs = outputs;
    manifest.duration_secs = elapsed;
    manifest.save(&sidecar_path(out))?;
    Ok(())
}
