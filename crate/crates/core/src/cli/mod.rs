//! Command-line front end: `run` and `sweep`.

pub mod output;
pub mod scenario_file;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{self, RunConfig, RunMeans, ScenarioFamily};
use crate::sched::{SchedParams, SchedulerKind};
use crate::traffic::{build_heterogeneous, build_homogeneous, Scenario, StartMode};
use crate::Error;

pub use scenario_file::load_scenario;

#[derive(Debug, Parser)]
#[command(
    name = "payda-sim",
    version,
    about = "TTI-level LTE downlink scheduling simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario with one scheduler.
    Run(RunArgs),
    /// Simulate a grid of schedulers and UE counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `homogeneous`, `heterogeneous` or a path to a scenario TOML file.
    #[arg(long, default_value = "homogeneous")]
    pub scenario: String,
    /// Simulated time per run, in seconds.
    #[arg(long = "duration-s", default_value_t = 300.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 10)]
    pub runs: u32,
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Application start times: `equal` spacing or seeded `random` draws.
    #[arg(long = "start-mode", default_value = "equal")]
    pub start_mode: String,
    /// KPI averaging window in milliseconds.
    #[arg(long = "window-ms", default_value_t = 1000)]
    pub window_ms: u64,
    /// Per-bearer queue cap in bytes (unlimited when absent).
    #[arg(long = "queue-cap-bytes")]
    pub queue_cap_bytes: Option<u64>,
    /// PF averaging time constant in TTIs.
    #[arg(long = "pf-tc", default_value_t = 1000.0)]
    pub pf_time_constant: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// payda, edf, mt, pf or rr.
    #[arg(long, default_value = "payda")]
    pub scheduler: String,
    /// Number of UEs for the built-in scenarios.
    #[arg(long, default_value_t = 7)]
    pub ues: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated scheduler list.
    #[arg(long, default_value = "payda,edf,mt,pf,rr")]
    pub schedulers: String,
    /// Inclusive UE-count range `A..B`.
    #[arg(long = "ues-range", default_value = "1..8")]
    pub ues_range: String,
}

fn duration_ms(seconds: f64) -> Result<u64, Error> {
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(Error::invalid(
            "duration-s",
            "must be a non-negative number",
        ));
    }
    Ok((seconds * 1000.0).round() as u64)
}

enum ScenarioSource {
    Preset(ScenarioFamily),
    File(Scenario),
}

fn scenario_source(name: &str) -> Result<ScenarioSource, Error> {
    match name.to_ascii_lowercase().as_str() {
        "homogeneous" => Ok(ScenarioSource::Preset(ScenarioFamily::Homogeneous)),
        "heterogeneous" => Ok(ScenarioSource::Preset(ScenarioFamily::Heterogeneous)),
        _ => load_scenario(Path::new(name)).map(ScenarioSource::File),
    }
}

/// Parses `A..B` (inclusive; `A..=B` is accepted too).
pub fn parse_ue_range(s: &str) -> Result<std::ops::RangeInclusive<usize>, Error> {
    let bad = || Error::invalid("ues-range", format!("`{s}` is not of the form A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(Error::invalid("ues-range", format!("`{s}` is empty")));
    }
    Ok(a..=b)
}

pub fn parse_schedulers(s: &str) -> Result<Vec<SchedulerKind>, Error> {
    let kinds = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(Error::invalid("schedulers", "no scheduler given"));
    }
    Ok(kinds)
}

fn template(
    common: &CommonArgs,
    scenario: Scenario,
    scheduler: SchedulerKind,
) -> Result<RunConfig, Error> {
    let start_mode: StartMode = common.start_mode.parse()?;
    if common.pf_time_constant.is_nan() || common.pf_time_constant < 1.0 {
        return Err(Error::invalid("pf-tc", "must be at least 1"));
    }
    Ok(RunConfig {
        scenario,
        scheduler,
        duration_ms: duration_ms(common.duration_s)?,
        n_runs: common.runs,
        base_seed: common.seed,
        start_mode,
        params: SchedParams {
            pf_time_constant: common.pf_time_constant,
            ..SchedParams::default()
        },
        window_ms: common.window_ms,
        queue_cap_bits: common.queue_cap_bytes.map(|b| b * 8),
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let io = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::io(format!("writing {}", path.display()), io)
}

/// Writes `timeseries.csv` and `summary.json` for one scheduler.
pub fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let scheduler: SchedulerKind = args.scheduler.parse()?;
    if args.ues == 0 {
        return Err(Error::invalid("ues", "at least one UE is required"));
    }
    let scenario = match scenario_source(&args.common.scenario)? {
        ScenarioSource::Preset(family) => family.build(args.ues)?,
        ScenarioSource::File(s) => s,
    };
    let config = template(&args.common, scenario, scheduler)?;
    config.validate()?;

    let results = engine::run_all(&config, true);
    let out = &args.common.out;
    ensure_dir(out)?;

    let ts_path = out.join("timeseries.csv");
    let mut ts = create(out, "timeseries.csv")?;
    output::write_timeseries(&mut ts, &results).map_err(|e| csv_err(&ts_path, e))?;
    ts.flush()
        .map_err(|e| Error::io(format!("writing {}", ts_path.display()), e))?;

    let runs: Vec<_> = results.into_iter().map(|r| r.summary).collect();
    let summary = output::SummaryFile {
        mean: RunMeans::from_runs(&runs),
        scenario: config.scenario.clone(),
        scheduler,
        duration_ms: config.duration_ms,
        n_runs: config.n_runs,
        base_seed: config.base_seed,
        start_mode: config.start_mode,
        runs,
    };
    let js_path = out.join("summary.json");
    let mut js = create(out, "summary.json")?;
    serde_json::to_writer_pretty(&mut js, &summary)
        .map_err(|e| Error::io(format!("writing {}", js_path.display()), e.into()))?;
    writeln!(js)
        .and_then(|_| js.flush())
        .map_err(|e| Error::io(format!("writing {}", js_path.display()), e))?;
    Ok(())
}

/// Writes `sweep.csv` with one row per (scheduler, UE count).
pub fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let schedulers = parse_schedulers(&args.schedulers)?;
    let range = parse_ue_range(&args.ues_range)?;
    let family = match scenario_source(&args.common.scenario)? {
        ScenarioSource::Preset(f) => f,
        ScenarioSource::File(s) => ScenarioFamily::Fixed(s),
    };
    let base = match &family {
        ScenarioFamily::Homogeneous => build_homogeneous(1)?,
        ScenarioFamily::Heterogeneous => build_heterogeneous(1)?,
        ScenarioFamily::Fixed(s) => s.clone(),
    };
    let config = template(&args.common, base, schedulers[0])?;
    config.validate()?;
    let points = engine::sweep(&family, &schedulers, range, &config)?;

    let out = &args.common.out;
    ensure_dir(out)?;
    let path = out.join("sweep.csv");
    let mut w = create(out, "sweep.csv")?;
    output::write_sweep(&mut w, &points).map_err(|e| csv_err(&path, e))?;
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

/// Parses `argv` and executes the command; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
