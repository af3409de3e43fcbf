//! Scheduling metrics and the per-TTI resource-block allocation loop.
//!
//! Every TTI the backlogged bearers are ranked and walked greedily: each one
//! receives as many RBs as its queue needs, capped by what is left. Exact
//! metric ties are broken by a cursor that rotates past the last bearer
//! served, so identical bearers share the carrier evenly over time.
//!
//! The deadline-based schedulers (PayDA, EDF) score a bearer whose head
//! packet has reached or passed its deadline with 0. Such bearers are kept
//! out of the ranked pass and only receive RBs left over afterwards, in a
//! separate rotation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{DrbId, DrbQueue, Millis, SchedulingMetric};
use crate::phy::LinkModel;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchedulerKind {
    #[serde(rename = "payda")]
    PayDa,
    #[serde(rename = "edf")]
    Edf,
    #[serde(rename = "mt")]
    MaxThroughput,
    #[serde(rename = "pf")]
    ProportionalFair,
    #[serde(rename = "rr")]
    RoundRobin,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::PayDa,
        SchedulerKind::Edf,
        SchedulerKind::MaxThroughput,
        SchedulerKind::ProportionalFair,
        SchedulerKind::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::PayDa => "payda",
            SchedulerKind::Edf => "edf",
            SchedulerKind::MaxThroughput => "mt",
            SchedulerKind::ProportionalFair => "pf",
            SchedulerKind::RoundRobin => "rr",
        }
    }

    pub fn is_deadline_aware(self) -> bool {
        matches!(self, SchedulerKind::PayDa | SchedulerKind::Edf)
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::UnknownScheduler(s.to_string()))
    }
}

/// Earliest-deadline-first priority `max(0, 1 / (deadline - hol_delay))` in 1/ms.
///
/// A head that has reached its deadline scores 0 rather than dividing by zero.
pub fn edf_metric(deadline_ms: Millis, hol_delay_ms: Millis) -> f64 {
    if hol_delay_ms >= deadline_ms {
        return 0.0;
    }
    1.0 / (deadline_ms - hol_delay_ms) as f64
}

/// PayDA priority `max(0, 1 / ((deadline - hol_delay) * remaining))`.
///
/// `remaining` is the head packet's untransmitted size in whatever unit the
/// caller chose; the unit scales every metric alike and never changes the
/// ranking. Panics if `remaining` is not positive.
pub fn payda_metric(deadline_ms: Millis, hol_delay_ms: Millis, remaining: f64) -> f64 {
    assert!(
        remaining > 0.0,
        "PayDA metric needs a non-empty head packet"
    );
    if hol_delay_ms >= deadline_ms {
        return 0.0;
    }
    1.0 / ((deadline_ms - hol_delay_ms) as f64 * remaining)
}

/// Maximum-throughput priority: what the bearer could move this TTI.
pub fn mt_metric(achievable_bits: u64) -> f64 {
    achievable_bits as f64
}

/// Proportional-fair priority: instantaneous over average rate.
pub fn pf_metric(achievable_rate: f64, avg_rate: f64) -> f64 {
    debug_assert!(avg_rate > 0.0);
    achievable_rate / avg_rate
}

/// Tunables for the baseline schedulers and the PayDA size unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedParams {
    /// EWMA time constant of the PF average, in TTIs.
    pub pf_time_constant: f64,
    /// Lower bound of the PF average rate, in bit/s.
    pub pf_rate_floor: f64,
    /// Multiplier applied to the remaining head size before it enters the
    /// PayDA metric (1 means bits).
    pub delta_scale: f64,
}

impl Default for SchedParams {
    fn default() -> Self {
        Self {
            pf_time_constant: 1000.0,
            pf_rate_floor: 1.0,
            delta_scale: 1.0,
        }
    }
}

/// Mutable scheduler memory owned by one engine.
///
/// Cursors hold the slice index of the bearer served last; rotation starts
/// at the bearer right after it.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub params: SchedParams,
    pub avg_rate: Vec<f64>,
    pub rr_cursor: usize,
    pub tie_cursor: usize,
    /// Rotation over bearers with expired heads (deadline schedulers only).
    pub be_cursor: usize,
}

impl SchedulerState {
    pub fn new(n_drbs: usize, params: SchedParams) -> Self {
        let last = n_drbs.saturating_sub(1);
        Self {
            params,
            avg_rate: vec![params.pf_rate_floor; n_drbs],
            rr_cursor: last,
            tie_cursor: last,
            be_cursor: last,
        }
    }

    pub fn n_drbs(&self) -> usize {
        self.avg_rate.len()
    }

    /// Folds the bits each bearer received this TTI into the PF averages.
    pub fn record_service(&mut self, served_bits: &[u64], tti_ms: Millis) {
        assert_eq!(served_bits.len(), self.avg_rate.len());
        let alpha = 1.0 / self.params.pf_time_constant;
        for (avg, &bits) in self.avg_rate.iter_mut().zip(served_bits) {
            let rate = bits as f64 * 1000.0 / tti_ms as f64;
            *avg = ((1.0 - alpha) * *avg + alpha * rate).max(self.params.pf_rate_floor);
        }
    }
}

/// Distance of `index` from the bearer right after `cursor`.
pub fn rotation_distance(index: usize, cursor: usize, n: usize) -> usize {
    (index + n - (cursor + 1) % n) % n
}

/// Active bearers in round-robin order, starting after the RR cursor.
pub fn rr_order(state: &SchedulerState, active: &[usize]) -> Vec<usize> {
    let n = state.n_drbs();
    let mut order = active.to_vec();
    order.sort_by_key(|&i| rotation_distance(i, state.rr_cursor, n));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    /// Position of the bearer in the engine's queue slice.
    pub index: usize,
    pub drb_id: DrbId,
    pub rbs: u32,
}

/// RB grants for one TTI, in the order they were handed out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AllocationPlan {
    pub grants: Vec<Grant>,
    /// Metric of every backlogged bearer (empty for round robin).
    pub metrics: Vec<SchedulingMetric>,
}

impl AllocationPlan {
    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn total_rbs(&self) -> u32 {
        self.grants.iter().map(|g| g.rbs).sum()
    }

    pub fn rbs_for(&self, drb: DrbId) -> u32 {
        self.grants
            .iter()
            .find(|g| g.drb_id == drb)
            .map_or(0, |g| g.rbs)
    }

    /// Bearer that received the first grant.
    pub fn winner(&self) -> Option<DrbId> {
        self.grants.first().map(|g| g.drb_id)
    }

    /// `(drb, rbs)` pairs sorted by bearer id.
    pub fn by_drb(&self) -> Vec<(DrbId, u32)> {
        let mut v: Vec<_> = self.grants.iter().map(|g| (g.drb_id, g.rbs)).collect();
        v.sort();
        v
    }
}

fn metric_for(
    kind: SchedulerKind,
    queue: &DrbQueue,
    index: usize,
    state: &SchedulerState,
    link: &LinkModel,
    now: Millis,
    tti_ms: Millis,
) -> f64 {
    let head = queue.head().expect("metric on empty bearer");
    let hol = now.saturating_sub(head.arrival_time);
    let achievable = link.tbs(link.bandwidth_rbs, queue.ue_id);
    match kind {
        SchedulerKind::Edf => edf_metric(queue.qci.deadline_ms, hol),
        SchedulerKind::PayDa => payda_metric(
            queue.qci.deadline_ms,
            hol,
            head.remaining_bits as f64 * state.params.delta_scale,
        ),
        SchedulerKind::MaxThroughput => mt_metric(achievable),
        SchedulerKind::ProportionalFair => pf_metric(
            achievable as f64 * 1000.0 / tti_ms as f64,
            state.avg_rate[index],
        ),
        SchedulerKind::RoundRobin => unreachable!("round robin has no metric"),
    }
}

/// Walks `order` handing each bearer what its queue needs until RBs run out.
/// Returns the index of the last bearer served.
fn grant_greedy(
    order: &[usize],
    drbs: &[DrbQueue],
    link: &LinkModel,
    rbs_left: &mut u32,
    grants: &mut Vec<Grant>,
) -> Option<usize> {
    let mut last = None;
    for &i in order {
        if *rbs_left == 0 {
            break;
        }
        let q = &drbs[i];
        let need = link.rbs_for_bits(q.queued_bits(), q.ue_id);
        let rbs = need.min(*rbs_left as u64) as u32;
        if rbs == 0 {
            continue;
        }
        *rbs_left -= rbs;
        grants.push(Grant {
            index: i,
            drb_id: q.drb_id,
            rbs,
        });
        last = Some(i);
    }
    last
}

/// Builds the RB allocation for the TTI starting at `now`.
pub fn allocate_tti(
    drbs: &[DrbQueue],
    kind: SchedulerKind,
    state: &mut SchedulerState,
    link: &LinkModel,
    now: Millis,
    tti_ms: Millis,
) -> AllocationPlan {
    assert_eq!(
        drbs.len(),
        state.n_drbs(),
        "scheduler state sized for another cell"
    );
    let n = drbs.len();
    let active: Vec<usize> = (0..n).filter(|&i| !drbs[i].is_empty()).collect();
    let mut plan = AllocationPlan::default();
    if active.is_empty() {
        return plan;
    }
    let mut rbs_left = link.bandwidth_rbs;

    if kind == SchedulerKind::RoundRobin {
        let order = rr_order(state, &active);
        if let Some(last) = grant_greedy(&order, drbs, link, &mut rbs_left, &mut plan.grants) {
            state.rr_cursor = last;
        }
        return plan;
    }

    let scored: Vec<(usize, f64)> = active
        .iter()
        .map(|&i| (i, metric_for(kind, &drbs[i], i, state, link, now, tti_ms)))
        .collect();
    plan.metrics = scored
        .iter()
        .map(|&(i, v)| SchedulingMetric::new(drbs[i].drb_id, v))
        .collect();

    let (mut ranked, expired): (Vec<_>, Vec<_>) = if kind.is_deadline_aware() {
        scored.into_iter().partition(|&(_, v)| v > 0.0)
    } else {
        (scored, Vec::new())
    };

    let tie = state.tie_cursor;
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| rotation_distance(a.0, tie, n).cmp(&rotation_distance(b.0, tie, n)))
    });
    let order: Vec<usize> = ranked.iter().map(|&(i, _)| i).collect();
    if let Some(last) = grant_greedy(&order, drbs, link, &mut rbs_left, &mut plan.grants) {
        state.tie_cursor = last;
    }

    if !expired.is_empty() && rbs_left > 0 {
        let mut order: Vec<usize> = expired.iter().map(|&(i, _)| i).collect();
        let be = state.be_cursor;
        order.sort_by_key(|&i| rotation_distance(i, be, n));
        if let Some(last) = grant_greedy(&order, drbs, link, &mut rbs_left, &mut plan.grants) {
            state.be_cursor = last;
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellConfig, Packet, QciClass, UeId};

    fn link() -> LinkModel {
        LinkModel::new(&CellConfig::default())
    }

    fn drb(id: u32, deadline: Millis) -> DrbQueue {
        DrbQueue::new(DrbId(id), UeId(id), QciClass::new(9, deadline, false))
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    #[test]
    fn edf_values() {
        assert!(approx(edf_metric(100, 60), 0.025));
        assert_eq!(edf_metric(100, 150), 0.0);
        assert_eq!(edf_metric(100, 100), 0.0);
        assert!(approx(edf_metric(300, 0), 1.0 / 300.0));
    }

    #[test]
    fn payda_values() {
        assert!(approx(
            payda_metric(100, 60, 266_600.0),
            1.0 / (40.0 * 266_600.0)
        ));
        assert!((payda_metric(100, 60, 266_600.0) / 9.378e-8 - 1.0).abs() < 1e-3);
        assert_eq!(payda_metric(100, 100, 5.0), 0.0);
        assert!(payda_metric(100, 60, 800.0) > payda_metric(100, 60, 266_600.0));
    }

    #[test]
    #[should_panic(expected = "non-empty head")]
    fn payda_rejects_empty_head() {
        payda_metric(100, 0, 0.0);
    }

    #[test]
    fn pf_values() {
        assert!(approx(pf_metric(18.3e6, 1.83e6), 10.0));
        assert_eq!(pf_metric(5.0, 5.0), 1.0);
    }

    #[test]
    fn pf_average_decays_when_starved() {
        // hand-unrolled: avg_k = 0.999^k * avg_0, floored at 1 bit/s
        let mut st = SchedulerState::new(2, SchedParams::default());
        st.avg_rate = vec![18.3e6, 18.3e6];
        let mut expected = 18.3e6;
        for _ in 0..10 {
            st.record_service(&[0, 18_300], 1);
            expected *= 0.999;
            assert!(approx(st.avg_rate[0], expected));
        }
        assert!(approx(st.avg_rate[1], 18.3e6));
        assert!(pf_metric(18.3e6, st.avg_rate[0]) > pf_metric(18.3e6, st.avg_rate[1]));

        st.avg_rate[0] = 1.0;
        st.record_service(&[0, 0], 1);
        assert_eq!(st.avg_rate[0], 1.0);
    }

    #[test]
    fn mt_metric_is_full_carrier() {
        let l = link();
        assert_eq!(mt_metric(l.tbs(25, UeId(1))), 18_300.0);
    }

    #[test]
    fn rr_rotation() {
        let mut st = SchedulerState::new(3, SchedParams::default());
        st.rr_cursor = 0;
        assert_eq!(rr_order(&st, &[0, 1, 2]), [1, 2, 0]);
        assert_eq!(rr_order(&st, &[2]), [2]);
    }

    #[test]
    fn rr_serves_backlogged_bearers_evenly() {
        let l = link();
        let mut drbs: Vec<_> = (1..=3).map(|i| drb(i, 100)).collect();
        for q in &mut drbs {
            q.enqueue(Packet::new(0, 0, 1_000_000_000, 100));
        }
        let mut st = SchedulerState::new(3, SchedParams::default());
        let mut served = [0u32; 3];
        let k = 50;
        for t in 0..3 * k {
            let plan = allocate_tti(&drbs, SchedulerKind::RoundRobin, &mut st, &l, t, 1);
            assert_eq!(plan.grants.len(), 1);
            served[plan.grants[0].index] += 1;
        }
        assert_eq!(served, [k as u32; 3]);
    }

    #[test]
    fn mt_ties_share_the_carrier() {
        let l = link();
        let mut drbs: Vec<_> = (1..=8).map(|i| drb(i, 100)).collect();
        for q in &mut drbs {
            q.enqueue(Packet::new(0, 0, 1_000_000_000, 100));
        }
        let mut st = SchedulerState::new(8, SchedParams::default());
        let mut rbs = [0u32; 8];
        for t in 0..800 {
            let plan = allocate_tti(&drbs, SchedulerKind::MaxThroughput, &mut st, &l, t, 1);
            for g in plan.grants {
                rbs[g.index] += g.rbs;
            }
        }
        assert!(rbs.iter().all(|&r| r == rbs[0]), "{rbs:?}");
    }

    #[test]
    fn greedy_walkthrough() {
        let l = link();
        let mut a = drb(1, 100);
        let mut b = drb(2, 300);
        // 10 RBs worth for DRB 1, plenty for DRB 2
        a.enqueue(Packet::new(0, 0, 7320, 100));
        b.enqueue(Packet::new(0, 60, 1_000_000, 300));
        let drbs = [a, b];
        let mut st = SchedulerState::new(2, SchedParams::default());
        let plan = allocate_tti(&drbs, SchedulerKind::Edf, &mut st, &l, 60, 1);
        assert!(approx(plan.metrics[0].value, 0.025));
        assert!(approx(plan.metrics[1].value, 1.0 / 300.0));
        assert_eq!(plan.by_drb(), [(DrbId(1), 10), (DrbId(2), 15)]);
        assert_eq!(plan.winner(), Some(DrbId(1)));
    }

    #[test]
    fn empty_cell_gives_empty_plan() {
        let drbs = [drb(1, 100), drb(2, 100)];
        let mut st = SchedulerState::new(2, SchedParams::default());
        for kind in SchedulerKind::ALL {
            assert!(allocate_tti(&drbs, kind, &mut st, &link(), 0, 1).is_empty());
        }
    }

    #[test]
    fn single_bearer_capped_at_carrier() {
        let mut q = drb(1, 100);
        q.enqueue(Packet::new(0, 0, 40 * 732, 100));
        let drbs = [q];
        let mut st = SchedulerState::new(1, SchedParams::default());
        let plan = allocate_tti(&drbs, SchedulerKind::PayDa, &mut st, &link(), 0, 1);
        assert_eq!(plan.by_drb(), [(DrbId(1), 25)]);
    }

    #[test]
    fn expired_heads_only_get_leftovers() {
        let l = link();
        let mut late = drb(1, 100);
        late.enqueue(Packet::new(0, 0, 1_000_000, 100));
        let mut fresh = drb(2, 100);
        fresh.enqueue(Packet::new(0, 150, 5 * 732, 100));
        let drbs = [late, fresh];
        for kind in [SchedulerKind::Edf, SchedulerKind::PayDa] {
            let mut st = SchedulerState::new(2, SchedParams::default());
            let plan = allocate_tti(&drbs, kind, &mut st, &l, 160, 1);
            assert_eq!(plan.metrics[0].value, 0.0);
            assert_eq!(plan.winner(), Some(DrbId(2)));
            assert_eq!(plan.by_drb(), [(DrbId(1), 20), (DrbId(2), 5)]);
        }
    }

    #[test]
    fn payda_prefers_smaller_head_at_equal_slack() {
        let l = link();
        let mut small = drb(1, 100);
        small.enqueue(Packet::new(0, 0, 800, 100));
        let mut big = drb(2, 100);
        big.enqueue(Packet::new(0, 0, 266_600, 100));
        let drbs = [big, small];
        let mut st = SchedulerState::new(2, SchedParams::default());
        let plan = allocate_tti(&drbs, SchedulerKind::PayDa, &mut st, &l, 60, 1);
        assert_eq!(plan.winner(), Some(DrbId(1)));
        assert!(plan.metrics[1].value > plan.metrics[0].value);
    }

    #[test]
    fn scheduler_names() {
        assert_eq!(
            "PayDA".parse::<SchedulerKind>().unwrap(),
            SchedulerKind::PayDa
        );
        assert_eq!(
            " RR ".parse::<SchedulerKind>().unwrap(),
            SchedulerKind::RoundRobin
        );
        let err = "bogus".parse::<SchedulerKind>().unwrap_err().to_string();
        assert!(err.contains("payda") && err.contains("rr"));
        for k in SchedulerKind::ALL {
            assert_eq!(k.name().parse::<SchedulerKind>().unwrap(), k);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metrics_never_negative(tau in 1u64..5000, hol in 0u64..10_000, delta in 1u64..100_000_000) {
                prop_assert!(edf_metric(tau, hol) >= 0.0);
                prop_assert!(payda_metric(tau, hol, delta as f64) >= 0.0);
            }

            #[test]
            fn budget_never_exceeded(
                sizes in proptest::collection::vec(1u64..200_000, 1..8),
                ages in proptest::collection::vec(0u64..400, 8),
                kind_idx in 0usize..5,
            ) {
                let l = link();
                let drbs: Vec<_> = sizes.iter().enumerate().map(|(i, &s)| {
                    let mut q = drb(i as u32 + 1, 300);
                    q.enqueue(Packet::new(0, 400 - ages[i], s, 300));
                    q
                }).collect();
                let mut st = SchedulerState::new(drbs.len(), SchedParams::default());
                let plan = allocate_tti(&drbs, SchedulerKind::ALL[kind_idx], &mut st, &l, 400, 1);
                prop_assert!(plan.total_rbs() <= 25);
                let mut ids: Vec<_> = plan.grants.iter().map(|g| g.drb_id).collect();
                ids.sort();
                ids.dedup();
                prop_assert_eq!(ids.len(), plan.grants.len());
            }
        }
    }
}
