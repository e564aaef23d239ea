//! Command-line driver: experiment configs, result files and plots.
//!
//! Exit status is 0 on success, 1 on validation or runtime errors (no
//! artifacts are left behind) and 2 when a property check fails (the
//! artifacts are written and `results.json` records which check failed).

mod artifacts;
pub mod config;
pub mod fields;
pub mod svg;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

pub use artifacts::ArtifactWriter;
pub use config::{DataSpec, ExperimentConfig, Formats, Task};
pub use fields::{read_fields_csv, write_fields_csv, FieldTable, SetRecord};

use crate::error::Result;

/// Bumped whenever a field of `results.json` changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_PROPERTY: u8 = 2;

#[derive(Debug)]
pub struct RunReport {
    /// The document written to `results.json`.
    pub results: Value,
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_PROPERTY
        }
    }
}

/// Runs one experiment and writes its artifacts atomically.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let prepared = tasks::prepare(config)?;
    let grid_info = prepared.as_ref().map(|p| {
        json!({
            "spec": p.grid.spec(),
            "nodes": p.grid.len(),
            "mass": p.grid.mass(),
            "max_spacing": p.grid.max_spacing(),
        })
    });
    let mut writer = ArtifactWriter::new(&config.output.dir)?;
    let output = tasks::execute(config, prepared)?;
    let passed = output.properties.values().all(|&ok| ok);
    let results = json!({
        "schema_version": SCHEMA_VERSION,
        "task": config.task,
        "seed": config.seed,
        "wall_seconds": start.elapsed().as_secs_f64(),
        "config": config,
        "grid": grid_info,
        "results": output.results,
        "properties": output.properties,
        "passed": passed,
    });
    let formats = config.output.formats;
    if formats.json {
        let text = serde_json::to_string_pretty(&results).expect("results serialize");
        writer.stage("results.json", text.as_bytes())?;
    }
    if formats.csv {
        if let Some((g, u, phi)) = &output.fields {
            writer.stage("fields.csv", write_fields_csv(g, u, phi)?.as_bytes())?;
        }
    }
    if formats.svg {
        for (name, svg) in &output.plots {
            writer.stage(name, svg.as_bytes())?;
        }
    }
    let artifacts = writer.commit()?;
    Ok(RunReport {
        results,
        passed,
        artifacts,
    })
}

#[derive(Debug, Parser)]
#[command(name = "gausstv", version, about = "Gaussian total variation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scalar problem for the configured integrand and data.
    Solve(Common),
    /// Extract and check the sublevel sets of the solution.
    Levelsets(Common),
    /// Volume-constrained perimeter problem.
    Isoperimetric(Common),
    /// Classify the minimiser of the prescribed-curvature problem.
    Classify(Common),
    /// Implicit gradient flow from the data.
    Flow(Common),
    /// Cylindrical dimension sweep.
    Sweep(Common),
    /// Run every acceptance criterion.
    Verify(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (flat `key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomised cases; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of csv,json,svg; overrides `output.formats`.
    #[arg(long)]
    pub format: Option<String>,
}

impl Command {
    fn parts(&self) -> (Task, &Common) {
        match self {
            Command::Solve(c) => (Task::Solve, c),
            Command::Levelsets(c) => (Task::Levelsets, c),
            Command::Isoperimetric(c) => (Task::Isoperimetric, c),
            Command::Classify(c) => (Task::Classify, c),
            Command::Flow(c) => (Task::Flow, c),
            Command::Sweep(c) => (Task::Sweep, c),
            Command::Verify(c) => (Task::VerifyAll, c),
        }
    }
}

/// Resolves the config: file (or task defaults), then command-line overrides.
pub fn resolve(command: &Command) -> Result<ExperimentConfig> {
    let (task, common) = command.parts();
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path, task)?,
        None => ExperimentConfig::defaults(task),
    };
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(formats) = &common.format {
        config.output.formats = formats.parse()?;
    }
    Ok(config)
}

fn print_summary(report: &RunReport) {
    if let Some(criteria) = report.results["results"]["criteria"].as_array() {
        for c in criteria {
            let status = if c["passed"] == json!(true) { "PASS" } else { "FAIL" };
            println!("{status} {:>2} {}", c["id"], c["name"].as_str().unwrap_or(""));
        }
    }
    if let Some(props) = report.results["properties"].as_object() {
        for (name, ok) in props {
            let status = if ok == &json!(true) { "ok" } else { "FAILED" };
            println!("{name}: {status}");
        }
    }
    for path in &report.artifacts {
        println!("wrote {}", path.display());
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = resolve(&cli.command).and_then(|config| run(&config));
    match outcome {
        Ok(report) => {
            print_summary(&report);
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(main_with_args(std::env::args_os()))
}

/// Reads a `fields.csv` written by [`run`].
pub fn load_fields(path: &Path) -> Result<FieldTable> {
    let text = std::fs::read_to_string(path).map_err(|source| crate::error::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_fields_csv(&text)
}
