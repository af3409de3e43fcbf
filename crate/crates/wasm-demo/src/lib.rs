//! WebAssembly bindings behind `www/index.html`.
//!
//! Every exported function returns a JSON string; the page parses it and
//! draws with a plain canvas. The `*_json` functions hold the logic and are
//! tested natively, the `#[wasm_bindgen]` wrappers only convert errors.
//!
//! Runs execute serially here: the browser build has no worker threads.
//! Integers cross the boundary as `u32` so JavaScript passes plain numbers.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use payda_sim::engine::{run, run_detailed, RunConfig, RunMeans, ScenarioFamily};
use payda_sim::sched::{edf_metric, payda_metric};
use payda_sim::traffic::StartMode;
use payda_sim::SchedulerKind;

/// Longest simulated span the page may request, in seconds.
pub const MAX_DURATION_S: f64 = 600.0;
pub const MAX_UES: usize = 30;

fn family(name: &str) -> Result<ScenarioFamily, String> {
    match name {
        "homogeneous" => Ok(ScenarioFamily::Homogeneous),
        "heterogeneous" => Ok(ScenarioFamily::Heterogeneous),
        other => Err(format!("unknown scenario `{other}`")),
    }
}

fn config(
    scenario: &str,
    scheduler: SchedulerKind,
    n_ues: usize,
    duration_s: f64,
    random_start: bool,
    seed: u64,
) -> Result<RunConfig, String> {
    if !(duration_s > 0.0 && duration_s <= MAX_DURATION_S) {
        return Err(format!("duration must be in (0, {MAX_DURATION_S}] s"));
    }
    if n_ues == 0 || n_ues > MAX_UES {
        return Err(format!("UE count must be in 1..={MAX_UES}"));
    }
    let built = family(scenario)?.build(n_ues).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::simulation(built, scheduler);
    cfg.duration_ms = (duration_s * 1000.0).round() as u64;
    cfg.base_seed = seed;
    cfg.start_mode = if random_start {
        StartMode::Random
    } else {
        StartMode::Equal
    };
    Ok(cfg)
}

#[derive(Serialize)]
struct Series {
    drb_id: u32,
    is_rt: bool,
    qci: u8,
    hol_ms: Vec<f64>,
    dmr: Vec<f64>,
    throughput_kbps: Vec<f64>,
}

#[derive(Serialize)]
struct Timeline {
    scheduler: SchedulerKind,
    time_s: Vec<f64>,
    drbs: Vec<Series>,
    rt_dmr: f64,
    nrt_dmr: f64,
    mean_hol_ms: Option<f64>,
}

/// Per-window HOL delay, DMR and throughput of every bearer in one run.
pub fn simulate_json(
    scenario: &str,
    scheduler: &str,
    n_ues: usize,
    duration_s: f64,
    random_start: bool,
    seed: u64,
) -> Result<String, String> {
    let kind: SchedulerKind = scheduler
        .parse()
        .map_err(|e: payda_sim::Error| e.to_string())?;
    let cfg = config(scenario, kind, n_ues, duration_s, random_start, seed)?;
    let result = run_detailed(&cfg, 0);
    let s = &result.summary;

    let mut drbs: Vec<Series> = s
        .drbs
        .iter()
        .map(|d| Series {
            drb_id: d.drb_id.0,
            is_rt: d.is_rt,
            qci: d.qci,
            hol_ms: Vec::new(),
            dmr: Vec::new(),
            throughput_kbps: Vec::new(),
        })
        .collect();
    let mut time_s = Vec::new();
    for r in &result.records {
        let slot = (r.drb_id.0 - 1) as usize;
        if slot == 0 {
            time_s.push(r.window_end_ms as f64 / 1000.0);
        }
        let series = &mut drbs[slot];
        series.hol_ms.push(r.mean_hol_delay_ms);
        series.dmr.push(r.dmr);
        series.throughput_kbps.push(r.throughput_kbps);
    }
    let timeline = Timeline {
        scheduler: kind,
        time_s,
        drbs,
        rt_dmr: s.rt.dmr,
        nrt_dmr: s.nrt.dmr,
        mean_hol_ms: s.overall.mean_hol_delay_ms,
    };
    serde_json::to_string(&timeline).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    scheduler: SchedulerKind,
    hol_rt_ms: Vec<Option<f64>>,
    hol_nrt_ms: Vec<Option<f64>>,
    dmr: Vec<f64>,
}

#[derive(Serialize)]
struct SweepTable {
    n_ues: Vec<usize>,
    curves: Vec<Curve>,
}

/// Mean HOL delay per class and overall DMR against UE count, for all
/// five schedulers.
pub fn sweep_json(
    scenario: &str,
    max_ues: usize,
    duration_s: f64,
    runs: u32,
    seed: u64,
) -> Result<String, String> {
    if runs == 0 {
        return Err("at least one run is required".into());
    }
    let n_ues: Vec<usize> = (1..=max_ues).collect();
    let mut curves = Vec::new();
    for kind in SchedulerKind::ALL {
        let mut curve = Curve {
            scheduler: kind,
            hol_rt_ms: Vec::new(),
            hol_nrt_ms: Vec::new(),
            dmr: Vec::new(),
        };
        for &n in &n_ues {
            let mut cfg = config(scenario, kind, n, duration_s, runs > 1, seed)?;
            cfg.n_runs = runs;
            let summaries: Vec<_> = (0..runs).map(|i| run(&cfg, i)).collect();
            let m = RunMeans::from_runs(&summaries);
            curve.hol_rt_ms.push(m.mean_hol_rt_ms);
            curve.hol_nrt_ms.push(m.mean_hol_nrt_ms);
            curve.dmr.push(m.mean_dmr);
        }
        curves.push(curve);
    }
    if curves.first().is_some_and(|c| c.dmr.is_empty()) {
        return Err(format!("UE count must be in 1..={MAX_UES}"));
    }
    serde_json::to_string(&SweepTable { n_ues, curves }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MetricCurves {
    hol_ms: Vec<u64>,
    edf: Vec<f64>,
    payda: Vec<(u64, Vec<f64>)>,
}

/// EDF and PayDA priority against head age for one deadline, with one
/// PayDA curve per head size in `sizes_bits`.
pub fn metric_curves_json(deadline_ms: u64, sizes_bits: &[u64]) -> Result<String, String> {
    if deadline_ms == 0 {
        return Err("deadline must be positive".into());
    }
    if sizes_bits.contains(&0) {
        return Err("head sizes must be positive".into());
    }
    let hol_ms: Vec<u64> = (0..=deadline_ms + deadline_ms / 5).collect();
    let edf = hol_ms.iter().map(|&d| edf_metric(deadline_ms, d)).collect();
    let payda = sizes_bits
        .iter()
        .map(|&b| {
            let ys = hol_ms
                .iter()
                .map(|&d| payda_metric(deadline_ms, d, b as f64))
                .collect();
            (b, ys)
        })
        .collect();
    serde_json::to_string(&MetricCurves { hol_ms, edf, payda }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(
    scenario: &str,
    scheduler: &str,
    n_ues: usize,
    duration_s: f64,
    random_start: bool,
    seed: u32,
) -> Result<String, JsError> {
    simulate_json(
        scenario,
        scheduler,
        n_ues,
        duration_s,
        random_start,
        seed.into(),
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(
    scenario: &str,
    max_ues: usize,
    duration_s: f64,
    runs: u32,
    seed: u32,
) -> Result<String, JsError> {
    sweep_json(scenario, max_ues, duration_s, runs, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn metric_curves(deadline_ms: u32, sizes_bits: Vec<u32>) -> Result<String, JsError> {
    let sizes: Vec<u64> = sizes_bits.into_iter().map(u64::from).collect();
    metric_curves_json(deadline_ms.into(), &sizes).map_err(|e| JsError::new(&e))
}
