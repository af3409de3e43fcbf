//! TTI loop tying traffic, scheduling, the link model and KPI collection
//! together, plus multi-run and multi-UE sweeps.
//!
//! Each step runs five phases in a fixed order:
//!
//! 1. traffic generation and enqueue,
//! 2. HOL sampling of every backlogged bearer,
//! 3. deadline-expiry scan (misses are recorded here),
//! 4. RB allocation,
//! 5. transmission of the granted bits and delivery bookkeeping.
//!
//! A packet generated in a TTI is therefore schedulable in that same TTI.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kpi::{
    record_deadline_outcome, DeadlineOutcome, DrbSummary, KpiCollector, KpiRecord, RunSummary,
};
use crate::model::{DrbId, DrbQueue, Millis, UeId};
use crate::phy::LinkModel;
use crate::sched::{allocate_tti, AllocationPlan, SchedParams, SchedulerKind, SchedulerState};
use crate::traffic::{self, AppProfile, Scenario, StartMode};
use crate::Error;

/// Environment variable capping the worker threads used by [`sweep`].
pub const THREADS_ENV: &str = "PAYDA_SIM_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub scheduler: SchedulerKind,
    pub duration_ms: Millis,
    pub n_runs: u32,
    pub base_seed: u64,
    pub start_mode: StartMode,
    pub params: SchedParams,
    pub window_ms: Millis,
    pub queue_cap_bits: Option<u64>,
}

impl RunConfig {
    /// 300 s, 10 runs.
    pub fn simulation(scenario: Scenario, scheduler: SchedulerKind) -> Self {
        Self {
            scenario,
            scheduler,
            duration_ms: 300_000,
            n_runs: 10,
            base_seed: 1,
            start_mode: StartMode::Equal,
            params: SchedParams::default(),
            window_ms: 1000,
            queue_cap_bits: None,
        }
    }

    /// 100 s, 5 runs.
    pub fn lab(scenario: Scenario, scheduler: SchedulerKind) -> Self {
        Self {
            duration_ms: 100_000,
            n_runs: 5,
            ..Self::simulation(scenario, scheduler)
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.scenario.validate()?;
        if self.n_runs == 0 {
            return Err(Error::invalid("runs", "at least one run is required"));
        }
        if self.window_ms == 0 {
            return Err(Error::invalid("window_ms", "must be positive"));
        }
        if !self.duration_ms.is_multiple_of(self.scenario.cell.tti_ms) {
            return Err(Error::invalid("duration", "must be a whole number of TTIs"));
        }
        Ok(())
    }

    pub fn seed_for(&self, run_index: u32) -> u64 {
        self.base_seed.wrapping_add(run_index as u64)
    }

    /// Scenario with start offsets resolved for the given run.
    pub fn scenario_for(&self, run_index: u32) -> Scenario {
        let mut s = self.scenario.clone();
        if self.start_mode == StartMode::Random {
            s.randomize_offsets(self.seed_for(run_index));
        }
        s
    }
}

/// Queue state one TTI sees right before allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct DrbSnapshot {
    pub drb_id: DrbId,
    pub ue_id: UeId,
    pub deadline_ms: Millis,
    pub hol_delay_ms: Option<Millis>,
    pub head_remaining_bits: u64,
    pub queued_bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtiTrace {
    pub drbs: Vec<DrbSnapshot>,
    pub tie_cursor: usize,
    pub be_cursor: usize,
    pub rr_cursor: usize,
}

#[derive(Debug, Clone)]
pub struct TtiOutcome {
    pub now: Millis,
    pub plan: AllocationPlan,
    /// Bits drained per bearer slot.
    pub served_bits: Vec<u64>,
    /// Present only when tracing is on.
    pub trace: Option<TtiTrace>,
}

struct Bearer {
    app: AppProfile,
    next_seq: u64,
}

pub struct Engine {
    scheduler: SchedulerKind,
    bearers: Vec<Bearer>,
    queues: Vec<DrbQueue>,
    state: SchedulerState,
    link: LinkModel,
    kpi: KpiCollector,
    tti_ms: Millis,
    now: Millis,
    trace: bool,
}

impl Engine {
    pub fn new(
        scenario: &Scenario,
        scheduler: SchedulerKind,
        params: SchedParams,
        window_ms: Millis,
        queue_cap_bits: Option<u64>,
    ) -> Self {
        let mut bearers = Vec::new();
        let mut queues = Vec::new();
        for b in scenario.bearers() {
            queues.push(DrbQueue::new(b.drb_id, b.ue_id, b.app.qci).with_cap(queue_cap_bits));
            bearers.push(Bearer {
                app: b.app.clone(),
                next_seq: 0,
            });
        }
        let n = queues.len();
        Self {
            scheduler,
            bearers,
            queues,
            state: SchedulerState::new(n, params),
            link: LinkModel::new(&scenario.cell),
            kpi: KpiCollector::new(n, window_ms),
            tti_ms: scenario.cell.tti_ms,
            now: 0,
            trace: false,
        }
    }

    pub fn from_config(config: &RunConfig, run_index: u32) -> Self {
        Self::new(
            &config.scenario_for(run_index),
            config.scheduler,
            config.params,
            config.window_ms,
            config.queue_cap_bits,
        )
    }

    /// Record a pre-allocation snapshot in every [`TtiOutcome`].
    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    /// Drop per-window KPI records (run totals are unaffected).
    pub fn without_records(mut self) -> Self {
        self.kpi = self.kpi.without_records();
        self
    }

    pub fn with_link(mut self, link: LinkModel) -> Self {
        self.link = link;
        self
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn queues(&self) -> &[DrbQueue] {
        &self.queues
    }

    pub fn scheduler_state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn kpi(&self) -> &KpiCollector {
        &self.kpi
    }

    /// Advances the cell by one TTI.
    pub fn step(&mut self) -> TtiOutcome {
        let now = self.now;
        if self.kpi.is_boundary(now) {
            self.kpi.close_window(now, &self.queues);
        }

        for (i, (bearer, queue)) in self.bearers.iter_mut().zip(&mut self.queues).enumerate() {
            if !bearer.app.fires_at(now) {
                continue;
            }
            for size in bearer.app.segment_sizes() {
                let pkt =
                    crate::model::Packet::new(bearer.next_seq, now, size, bearer.app.deadline_ms());
                bearer.next_seq += 1;
                self.kpi.on_generated(i);
                if !queue.enqueue(pkt).is_accepted() {
                    self.kpi.on_dropped(i);
                }
            }
        }

        for (i, q) in self.queues.iter().enumerate() {
            if let Some(hol) = q.hol_delay(now) {
                self.kpi.on_hol_sample(i, hol);
            }
        }

        for (i, q) in self.queues.iter_mut().enumerate() {
            let expired = q.collect_expired(now).len();
            for _ in 0..expired {
                self.kpi.on_outcome(i, DeadlineOutcome::Miss);
            }
        }

        let trace = self.trace.then(|| self.snapshot(now));
        let plan = allocate_tti(
            &self.queues,
            self.scheduler,
            &mut self.state,
            &self.link,
            now,
            self.tti_ms,
        );

        let mut served_bits = vec![0u64; self.queues.len()];
        for g in &plan.grants {
            let q = &mut self.queues[g.index];
            let bits = self.link.tbs(g.rbs, q.ue_id);
            let tx = q.transmit_from_head(bits, now);
            served_bits[g.index] = tx.consumed_bits;
            let hits = tx.delivered.len() - tx.already_missed;
            debug_assert!(tx.delivered[tx.already_missed..]
                .iter()
                .all(|p| record_deadline_outcome(p, now) == Some(DeadlineOutcome::Hit)));
            for _ in 0..hits {
                self.kpi.on_outcome(g.index, DeadlineOutcome::Hit);
            }
            self.kpi
                .on_transmitted(g.index, tx.consumed_bits, tx.delivered.len() as u64);
        }
        self.state.record_service(&served_bits, self.tti_ms);

        self.now += self.tti_ms;
        TtiOutcome {
            now,
            plan,
            served_bits,
            trace,
        }
    }

    fn snapshot(&self, now: Millis) -> TtiTrace {
        TtiTrace {
            drbs: self
                .queues
                .iter()
                .map(|q| DrbSnapshot {
                    drb_id: q.drb_id,
                    ue_id: q.ue_id,
                    deadline_ms: q.qci.deadline_ms,
                    hol_delay_ms: q.hol_delay(now),
                    head_remaining_bits: q.head().map_or(0, |p| p.remaining_bits),
                    queued_bits: q.queued_bits(),
                })
                .collect(),
            tie_cursor: self.state.tie_cursor,
            be_cursor: self.state.be_cursor,
            rr_cursor: self.state.rr_cursor,
        }
    }

    /// Closes the last window and summarizes the run so far.
    pub fn finish(mut self, meta: RunMeta) -> RunResult {
        self.kpi.close_window(self.now, &self.queues);
        let elapsed = self.now;
        let drbs = self
            .queues
            .iter()
            .zip(&self.bearers)
            .enumerate()
            .map(|(i, (q, b))| {
                let t = self.kpi.totals(i);
                DrbSummary {
                    drb_id: q.drb_id,
                    ue_id: q.ue_id,
                    qci: q.qci.qci,
                    is_rt: q.qci.is_rt,
                    offered_kbps: b.app.rate_kbps(),
                    mean_hol_delay_ms: (t.hol_samples > 0)
                        .then(|| t.hol_sum_ms / t.hol_samples as f64),
                    dmr: crate::kpi::dmr(t.misses, t.hits + t.misses),
                    throughput_kbps: if elapsed == 0 {
                        0.0
                    } else {
                        t.transmitted_bits as f64 / elapsed as f64
                    },
                    packets_generated: t.generated,
                    packets_delivered: t.delivered,
                    packets_hit: t.hits,
                    packets_missed: t.misses,
                    packets_dropped: t.dropped,
                    packets_queued: q.len() as u64,
                    queued_bits: q.queued_bits(),
                }
            })
            .collect();
        let mut summary = RunSummary {
            scheduler: self.scheduler,
            scenario: meta.scenario,
            n_ues: meta.n_ues,
            run_index: meta.run_index,
            seed: meta.seed,
            duration_ms: elapsed,
            drbs,
            rt: Default::default(),
            nrt: Default::default(),
            overall: Default::default(),
        };
        summary.aggregate();
        RunResult {
            summary,
            records: self.kpi.into_records(),
        }
    }
}

/// Labels copied into a [`RunSummary`].
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub scenario: String,
    pub n_ues: usize,
    pub run_index: u32,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub records: Vec<KpiRecord>,
}

fn meta(config: &RunConfig, run_index: u32) -> RunMeta {
    RunMeta {
        scenario: config.scenario.name.clone(),
        n_ues: config.scenario.n_ues(),
        run_index,
        seed: config.seed_for(run_index),
    }
}

fn drive(mut engine: Engine, config: &RunConfig, run_index: u32) -> RunResult {
    let steps = config.duration_ms / config.scenario.cell.tti_ms;
    for _ in 0..steps {
        engine.step();
    }
    engine.finish(meta(config, run_index))
}

/// One run with seed `base_seed + run_index`, including per-window records.
pub fn run_detailed(config: &RunConfig, run_index: u32) -> RunResult {
    drive(Engine::from_config(config, run_index), config, run_index)
}

/// One run, summary only.
pub fn run(config: &RunConfig, run_index: u32) -> RunSummary {
    drive(
        Engine::from_config(config, run_index).without_records(),
        config,
        run_index,
    )
    .summary
}

/// Runs `0..n_runs` in parallel; results are ordered by run index.
pub fn run_all(config: &RunConfig, detailed: bool) -> Vec<RunResult> {
    with_pool(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|i| {
                if detailed {
                    run_detailed(config, i)
                } else {
                    RunResult {
                        summary: run(config, i),
                        records: Vec::new(),
                    }
                }
            })
            .collect()
    })
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Scenario generator used by [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioFamily {
    Homogeneous,
    Heterogeneous,
    /// A fixed scenario; the UE count axis then only labels the rows.
    Fixed(Scenario),
}

impl ScenarioFamily {
    pub fn build(&self, n_ues: usize) -> Result<Scenario, Error> {
        match self {
            ScenarioFamily::Homogeneous => traffic::build_homogeneous(n_ues),
            ScenarioFamily::Heterogeneous => traffic::build_heterogeneous(n_ues),
            ScenarioFamily::Fixed(s) => Ok(s.clone()),
        }
    }
}

/// Means of the headline figures across independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeans {
    pub mean_hol_ms: Option<f64>,
    pub mean_hol_rt_ms: Option<f64>,
    pub mean_hol_nrt_ms: Option<f64>,
    pub mean_dmr: f64,
    pub mean_rt_dmr: f64,
    pub mean_nrt_dmr: f64,
    pub mean_throughput_kbps: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| mean(present.into_iter()))
}

impl RunMeans {
    pub fn from_runs(runs: &[RunSummary]) -> Self {
        Self {
            mean_hol_ms: mean_opt(runs.iter().map(|r| r.overall.mean_hol_delay_ms)),
            mean_hol_rt_ms: mean_opt(runs.iter().map(|r| r.rt.mean_hol_delay_ms)),
            mean_hol_nrt_ms: mean_opt(runs.iter().map(|r| r.nrt.mean_hol_delay_ms)),
            mean_dmr: mean(runs.iter().map(|r| r.overall.dmr)),
            mean_rt_dmr: mean(runs.iter().map(|r| r.rt.dmr)),
            mean_nrt_dmr: mean(runs.iter().map(|r| r.nrt.dmr)),
            mean_throughput_kbps: mean(runs.iter().map(|r| r.overall.throughput_kbps)),
        }
    }
}

/// One `(scheduler, n_ues)` grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scheduler: SchedulerKind,
    pub n_ues: usize,
    pub means: RunMeans,
    pub runs: Vec<RunSummary>,
}

/// Runs every `(scheduler, n_ues)` combination `template.n_runs` times.
///
/// The template supplies duration, seeds, start mode and scheduler tunables;
/// its scenario and scheduler fields are replaced per grid point. Rows come
/// back ordered by scheduler (as given) then UE count.
pub fn sweep(
    family: &ScenarioFamily,
    schedulers: &[SchedulerKind],
    ue_range: std::ops::RangeInclusive<usize>,
    template: &RunConfig,
) -> Result<Vec<SweepPoint>, Error> {
    if ue_range.is_empty() {
        return Err(Error::invalid("ues-range", "range is empty"));
    }
    if schedulers.is_empty() {
        return Err(Error::invalid("schedulers", "no scheduler given"));
    }
    let mut configs = Vec::new();
    for &kind in schedulers {
        for n in ue_range.clone() {
            let mut scenario = family.build(n)?;
            scenario.cell = template.scenario.cell;
            let cfg = RunConfig {
                scenario,
                scheduler: kind,
                ..template.clone()
            };
            cfg.validate()?;
            configs.push((kind, n, cfg));
        }
    }
    let jobs: Vec<(usize, u32)> = (0..configs.len())
        .flat_map(|c| (0..template.n_runs).map(move |r| (c, r)))
        .collect();
    let results: Vec<RunSummary> = with_pool(|| {
        jobs.par_iter()
            .map(|&(c, r)| run(&configs[c].2, r))
            .collect()
    });
    let mut results = results.into_iter();
    Ok(configs
        .iter()
        .map(|(kind, n, _)| {
            let runs = results.by_ref().take(template.n_runs as usize).collect();
            let runs: Vec<RunSummary> = runs;
            SweepPoint {
                scheduler: *kind,
                n_ues: *n,
                means: RunMeans::from_runs(&runs),
                runs,
            }
        })
        .collect())
}
