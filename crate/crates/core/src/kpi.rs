//! Head-of-line delay, deadline-miss ratio and throughput bookkeeping.

use serde::{Deserialize, Serialize};

use crate::model::{DrbId, DrbQueue, Millis, Packet, UeId};
use crate::sched::SchedulerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeadlineOutcome {
    Hit,
    Miss,
}

/// Classifies a packet against its deadline.
///
/// A delivered packet is a miss iff it took longer than its budget. An
/// undelivered packet is a miss once `now` is past its deadline and still
/// undecided (`None`) before that.
pub fn record_deadline_outcome(packet: &Packet, now: Millis) -> Option<DeadlineOutcome> {
    match packet.delivered_time {
        Some(t) if t - packet.arrival_time > packet.deadline_offset => Some(DeadlineOutcome::Miss),
        Some(_) => Some(DeadlineOutcome::Hit),
        None if now > packet.deadline() => Some(DeadlineOutcome::Miss),
        None => None,
    }
}

/// Miss ratio, 0 for an empty population.
pub fn dmr(misses: u64, total: u64) -> f64 {
    assert!(
        misses <= total,
        "more misses ({misses}) than packets ({total})"
    );
    if total == 0 {
        0.0
    } else {
        misses as f64 / total as f64
    }
}

/// What a window without samples reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptyWindow {
    /// Repeat the previous window (0 before the first sample).
    HoldLast,
    Zero,
}

/// Mean of time-ordered samples over consecutive windows `[end - w, end)`,
/// one value per boundary up to and including `horizon_ms` (a trailing
/// partial window is closed at the horizon).
pub fn moving_average(
    samples: &[(Millis, f64)],
    window_ms: Millis,
    horizon_ms: Millis,
    empty: EmptyWindow,
) -> Vec<(Millis, f64)> {
    assert!(window_ms > 0);
    debug_assert!(
        samples.windows(2).all(|w| w[0].0 <= w[1].0),
        "samples out of order"
    );
    let mut out = Vec::new();
    let mut idx = 0;
    let mut last = 0.0;
    let mut start = 0;
    while start < horizon_ms {
        let end = (start + window_ms).min(horizon_ms);
        let (mut sum, mut n) = (0.0, 0usize);
        while idx < samples.len() && samples[idx].0 < end {
            sum += samples[idx].1;
            n += 1;
            idx += 1;
        }
        let value = if n > 0 {
            sum / n as f64
        } else {
            match empty {
                EmptyWindow::HoldLast => last,
                EmptyWindow::Zero => 0.0,
            }
        };
        last = value;
        out.push((end, value));
        start = end;
    }
    out
}

/// HOL delay of every backlogged bearer at `now`.
pub fn sample_hol(drbs: &[DrbQueue], now: Millis) -> Vec<(DrbId, Millis)> {
    drbs.iter()
        .filter_map(|q| q.hol_delay(now).map(|d| (q.drb_id, d)))
        .collect()
}

/// One bearer's measurements over one reporting window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub drb_id: DrbId,
    pub window_end_ms: Millis,
    pub mean_hol_delay_ms: f64,
    pub dmr: f64,
    pub throughput_kbps: f64,
    pub packets_generated: u64,
    pub packets_delivered: u64,
    pub packets_missed: u64,
    pub packets_dropped: u64,
    /// Queue backlog when the window closed.
    pub queued_bits: u64,
}

#[derive(Debug, Clone, Default)]
struct Counters {
    hol_sum: f64,
    hol_samples: u64,
    bits: u64,
    generated: u64,
    delivered: u64,
    hits: u64,
    misses: u64,
    dropped: u64,
}

#[derive(Debug, Clone, Default)]
struct DrbKpi {
    window: Counters,
    total: Counters,
    last_hol: f64,
}

/// Per-run collector. One slot per bearer, indexed like the engine's queues.
#[derive(Debug, Clone)]
pub struct KpiCollector {
    window_ms: Millis,
    window_start: Millis,
    drbs: Vec<DrbKpi>,
    records: Vec<KpiRecord>,
    keep_records: bool,
}

impl KpiCollector {
    pub fn new(n_drbs: usize, window_ms: Millis) -> Self {
        assert!(window_ms > 0);
        Self {
            window_ms,
            window_start: 0,
            drbs: vec![DrbKpi::default(); n_drbs],
            records: Vec::new(),
            keep_records: true,
        }
    }

    /// Skip per-window records; run totals are still kept.
    pub fn without_records(mut self) -> Self {
        self.keep_records = false;
        self
    }

    pub fn window_ms(&self) -> Millis {
        self.window_ms
    }

    fn both(&mut self, i: usize, f: impl Fn(&mut Counters)) {
        let d = &mut self.drbs[i];
        f(&mut d.window);
        f(&mut d.total);
    }

    pub fn on_generated(&mut self, i: usize) {
        self.both(i, |c| c.generated += 1);
    }

    /// An overflow drop is also a deadline miss decided on the spot.
    pub fn on_dropped(&mut self, i: usize) {
        self.both(i, |c| {
            c.dropped += 1;
            c.misses += 1;
        });
    }

    pub fn on_hol_sample(&mut self, i: usize, hol_ms: Millis) {
        self.both(i, |c| {
            c.hol_sum += hol_ms as f64;
            c.hol_samples += 1;
        });
    }

    pub fn on_outcome(&mut self, i: usize, outcome: DeadlineOutcome) {
        match outcome {
            DeadlineOutcome::Hit => self.both(i, |c| c.hits += 1),
            DeadlineOutcome::Miss => self.both(i, |c| c.misses += 1),
        }
    }

    pub fn on_transmitted(&mut self, i: usize, bits: u64, delivered: u64) {
        self.both(i, |c| {
            c.bits += bits;
            c.delivered += delivered;
        });
    }

    /// Closes the current window at `end` if any time has elapsed in it.
    pub fn close_window(&mut self, end: Millis, queues: &[DrbQueue]) {
        if end <= self.window_start {
            return;
        }
        let span = end - self.window_start;
        for (d, q) in self.drbs.iter_mut().zip(queues) {
            let w = std::mem::take(&mut d.window);
            let hol = if w.hol_samples > 0 {
                w.hol_sum / w.hol_samples as f64
            } else {
                d.last_hol
            };
            d.last_hol = hol;
            if self.keep_records {
                self.records.push(KpiRecord {
                    drb_id: q.drb_id,
                    window_end_ms: end,
                    mean_hol_delay_ms: hol,
                    dmr: dmr(w.misses, w.hits + w.misses),
                    throughput_kbps: w.bits as f64 / span as f64,
                    packets_generated: w.generated,
                    packets_delivered: w.delivered,
                    packets_missed: w.misses,
                    packets_dropped: w.dropped,
                    queued_bits: q.queued_bits(),
                });
            }
        }
        self.window_start = end;
    }

    /// Whether `now` sits on a window boundary past the current window start.
    pub fn is_boundary(&self, now: Millis) -> bool {
        now > self.window_start && now.is_multiple_of(self.window_ms)
    }

    pub fn records(&self) -> &[KpiRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<KpiRecord> {
        self.records
    }

    /// Whole-run totals for bearer slot `i`.
    pub fn totals(&self, i: usize) -> DrbTotals {
        let t = &self.drbs[i].total;
        DrbTotals {
            hol_sum_ms: t.hol_sum,
            hol_samples: t.hol_samples,
            transmitted_bits: t.bits,
            generated: t.generated,
            delivered: t.delivered,
            hits: t.hits,
            misses: t.misses,
            dropped: t.dropped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrbTotals {
    pub hol_sum_ms: f64,
    pub hol_samples: u64,
    pub transmitted_bits: u64,
    pub generated: u64,
    pub delivered: u64,
    pub hits: u64,
    pub misses: u64,
    pub dropped: u64,
}

/// Whole-run figures for one bearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrbSummary {
    pub drb_id: DrbId,
    pub ue_id: UeId,
    pub qci: u8,
    pub is_rt: bool,
    pub offered_kbps: f64,
    /// Mean over TTIs in which the queue was non-empty; `None` if it never was.
    pub mean_hol_delay_ms: Option<f64>,
    pub dmr: f64,
    pub throughput_kbps: f64,
    pub packets_generated: u64,
    pub packets_delivered: u64,
    pub packets_hit: u64,
    pub packets_missed: u64,
    pub packets_dropped: u64,
    pub packets_queued: u64,
    pub queued_bits: u64,
}

/// Aggregate over a set of bearers. HOL delay and DMR are means weighted by
/// offered load; throughput is the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassAggregate {
    pub n_drbs: usize,
    pub mean_hol_delay_ms: Option<f64>,
    pub dmr: f64,
    pub throughput_kbps: f64,
}

impl ClassAggregate {
    pub fn from_members<'a>(members: impl IntoIterator<Item = &'a DrbSummary>) -> Self {
        let mut agg = ClassAggregate::default();
        let (mut w_sum, mut dmr_acc) = (0.0, 0.0);
        let (mut hol_w, mut hol_acc) = (0.0, 0.0);
        for d in members {
            agg.n_drbs += 1;
            agg.throughput_kbps += d.throughput_kbps;
            w_sum += d.offered_kbps;
            dmr_acc += d.offered_kbps * d.dmr;
            if let Some(h) = d.mean_hol_delay_ms {
                hol_w += d.offered_kbps;
                hol_acc += d.offered_kbps * h;
            }
        }
        if w_sum > 0.0 {
            agg.dmr = dmr_acc / w_sum;
        }
        if hol_w > 0.0 {
            agg.mean_hol_delay_ms = Some(hol_acc / hol_w);
        }
        agg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheduler: SchedulerKind,
    pub scenario: String,
    pub n_ues: usize,
    pub run_index: u32,
    pub seed: u64,
    pub duration_ms: Millis,
    pub drbs: Vec<DrbSummary>,
    pub rt: ClassAggregate,
    pub nrt: ClassAggregate,
    pub overall: ClassAggregate,
}

impl RunSummary {
    pub fn aggregate(&mut self) {
        self.rt = ClassAggregate::from_members(self.drbs.iter().filter(|d| d.is_rt));
        self.nrt = ClassAggregate::from_members(self.drbs.iter().filter(|d| !d.is_rt));
        self.overall = ClassAggregate::from_members(&self.drbs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QciClass;

    fn pkt(arrival: Millis, deadline: Millis, delivered: Option<Millis>) -> Packet {
        let mut p = Packet::new(0, arrival, 100, deadline);
        if delivered.is_some() {
            p.remaining_bits = 0;
            p.delivered_time = delivered;
        }
        p
    }

    #[test]
    fn deadline_outcomes() {
        assert_eq!(
            record_deadline_outcome(&pkt(0, 100, Some(80)), 80),
            Some(DeadlineOutcome::Hit)
        );
        assert_eq!(
            record_deadline_outcome(&pkt(0, 100, Some(100)), 100),
            Some(DeadlineOutcome::Hit)
        );
        assert_eq!(
            record_deadline_outcome(&pkt(0, 100, Some(140)), 140),
            Some(DeadlineOutcome::Miss)
        );
        // still queued: undecided at the deadline, a miss right after it
        assert_eq!(record_deadline_outcome(&pkt(0, 100, None), 100), None);
        assert_eq!(
            record_deadline_outcome(&pkt(0, 100, None), 101),
            Some(DeadlineOutcome::Miss)
        );
        assert_eq!(
            record_deadline_outcome(&pkt(0, 100, None), 300_000),
            Some(DeadlineOutcome::Miss)
        );
    }

    #[test]
    fn dmr_values() {
        assert_eq!(dmr(0, 100), 0.0);
        assert_eq!(dmr(25, 100), 0.25);
        assert_eq!(dmr(0, 0), 0.0);
    }

    #[test]
    fn moving_average_cases() {
        let constant: Vec<_> = (0..3000).step_by(7).map(|t| (t, 4.5)).collect();
        let out = moving_average(&constant, 1000, 3000, EmptyWindow::Zero);
        assert_eq!(out, [(1000, 4.5), (2000, 4.5), (3000, 4.5)]);

        let two = [(100, 10.0), (900, 30.0)];
        assert_eq!(
            moving_average(&two, 1000, 1000, EmptyWindow::Zero),
            [(1000, 20.0)]
        );

        let held = [(500, 15.0)];
        assert_eq!(
            moving_average(&held, 1000, 2000, EmptyWindow::HoldLast),
            [(1000, 15.0), (2000, 15.0)]
        );
        assert_eq!(
            moving_average(&held, 1000, 2000, EmptyWindow::Zero),
            [(1000, 15.0), (2000, 0.0)]
        );
        // boundary sample belongs to the next window
        assert_eq!(
            moving_average(&[(1000, 8.0)], 1000, 1500, EmptyWindow::Zero),
            [(1000, 0.0), (1500, 8.0)]
        );
    }

    #[test]
    fn hol_sampling() {
        let mut a = DrbQueue::new(DrbId(1), UeId(1), QciClass::new(7, 100, true));
        let b = DrbQueue::new(DrbId(2), UeId(2), QciClass::new(9, 300, false));
        assert!(sample_hol(&[a.clone(), b.clone()], 10).is_empty());
        a.enqueue(Packet::new(0, 40, 100, 100));
        assert_eq!(sample_hol(&[a.clone(), b], 100), [(DrbId(1), 60)]);
        for k in 0..5 {
            assert_eq!(
                sample_hol(std::slice::from_ref(&a), 100 + k),
                [(DrbId(1), 60 + k)]
            );
        }
    }

    #[test]
    fn collector_windows() {
        let q = DrbQueue::new(DrbId(1), UeId(1), QciClass::new(7, 100, true));
        let queues = [q];
        let mut c = KpiCollector::new(1, 1000);
        c.on_generated(0);
        c.on_hol_sample(0, 10);
        c.on_hol_sample(0, 30);
        c.on_transmitted(0, 18_300, 1);
        c.on_outcome(0, DeadlineOutcome::Hit);
        c.close_window(1000, &queues);
        c.on_outcome(0, DeadlineOutcome::Miss);
        c.close_window(2000, &queues);
        let r = c.records();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].mean_hol_delay_ms, 20.0);
        assert!((r[0].throughput_kbps - 18.3).abs() < 1e-12);
        assert_eq!(r[1].mean_hol_delay_ms, 20.0);
        assert_eq!(r[1].throughput_kbps, 0.0);
        assert_eq!(r[1].dmr, 1.0);
        let t = c.totals(0);
        assert_eq!((t.hits, t.misses, t.generated), (1, 1, 1));
    }

    #[test]
    fn class_aggregate_is_load_weighted() {
        let mk = |offered: f64, dmr: f64, hol: Option<f64>| DrbSummary {
            drb_id: DrbId(1),
            ue_id: UeId(1),
            qci: 9,
            is_rt: false,
            offered_kbps: offered,
            mean_hol_delay_ms: hol,
            dmr,
            throughput_kbps: 1.0,
            packets_generated: 0,
            packets_delivered: 0,
            packets_hit: 0,
            packets_missed: 0,
            packets_dropped: 0,
            packets_queued: 0,
            queued_bits: 0,
        };
        let members = [mk(100.0, 1.0, Some(10.0)), mk(300.0, 0.0, None)];
        let agg = ClassAggregate::from_members(&members);
        assert_eq!(agg.n_drbs, 2);
        assert_eq!(agg.dmr, 0.25);
        assert_eq!(agg.mean_hol_delay_ms, Some(10.0));
        assert_eq!(agg.throughput_kbps, 2.0);
        assert_eq!(ClassAggregate::from_members(&[]), ClassAggregate::default());
    }
}
