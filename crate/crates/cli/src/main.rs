//! `backbone-sim`: runs experiment suites, emits bounds grids and checks traces.
//!
//! Exit status is 0 when every enabled check passed, 1 when some check
//! failed and 2 on any error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use backbone_core::experiment::{check_view, emit_bounds, run_suite, ChecksFile, ExperimentSpec, GridSpec, RowFormat, SuiteOptions, SuiteSummary};
use backbone_core::ExecutionView;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "backbone-sim", version, about = "Backbone protocol simulator with sleepy parties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (simulate: the spec's `outputs`, else `out/<name>`; bounds: `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Per-round indicator files for `simulate`; stdout report for `bounds` and `check`.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides the spec's `seed_base`.
    #[arg(long, global = true)]
    seed_base: Option<u64>,
    /// Overrides the spec's `trials`.
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment spec and write its reports.
    Simulate { spec: PathBuf },
    /// Write figure1.csv and bounds.json for a parameter grid.
    Bounds { grid: PathBuf },
    /// Run the checks of a checks file against a recorded trace.
    Check { trace: PathBuf, checks: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_summary(summary: &SuiteSummary, format: Format) -> Result<()> {
    match format {
        Format::Csv => print!("{}", summary.to_text()),
        Format::Json => print!("{}", summary.to_json()?),
    }
    Ok(())
}

fn simulate(path: &Path, c: &Common) -> Result<bool> {
    let mut spec = ExperimentSpec::from_toml(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = c.seed_base {
        spec.seed_base = s;
    }
    if let Some(t) = c.trials {
        spec.trials = t;
    }
    let out = c.out.clone().or_else(|| spec.outputs.clone()).unwrap_or_else(|| Path::new("out").join(&spec.name));
    let format = match c.format {
        Format::Csv => RowFormat::Csv,
        Format::Json => RowFormat::Json,
    };
    let summary = run_suite(&spec, &SuiteOptions { out: Some(&out), jobs: c.jobs, format })?;
    print!("{}", summary.to_text());
    eprintln!("wrote {}", out.display());
    Ok(summary.all_passed)
}

fn bounds(path: &Path, c: &Common) -> Result<bool> {
    let grid = GridSpec::from_toml(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let report = emit_bounds(&grid)?;
    report.write(&out).with_context(|| format!("writing to {}", out.display()))?;
    match c.format {
        Format::Csv => print!("{}", report.figure1()),
        Format::Json => print!("{}", report.to_json()?),
    }
    Ok(true)
}

fn check(trace: &Path, checks: &Path, c: &Common) -> Result<bool> {
    let file = ChecksFile::from_toml(&read(checks)?).with_context(|| format!("in {}", checks.display()))?;
    let reader = BufReader::new(fs::File::open(trace).with_context(|| format!("opening {}", trace.display()))?);
    let (view, hash) = ExecutionView::read_trace(reader).with_context(|| format!("in {}", trace.display()))?;
    let summary = check_view(&view, &hash, &file, c.out.as_deref())?;
    print_summary(&summary, c.format)?;
    Ok(summary.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { spec } => simulate(spec, &cli.common),
        Command::Bounds { grid } => bounds(grid, &cli.common),
        Command::Check { trace, checks } => check(trace, checks, &cli.common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
