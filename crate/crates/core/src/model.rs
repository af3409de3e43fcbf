//! Core domain types: packets, bearer queues, QoS classes and the cell grid.
//!
//! All sizes are carried in bits and all times in whole milliseconds since
//! the start of the simulation.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Milliseconds since simulation start.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DrbId(pub u32);

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for DrbId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One application-layer payload unit waiting in (or leaving) a bearer queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub seq: u64,
    pub arrival_time: Millis,
    pub size_bits: u64,
    pub remaining_bits: u64,
    /// Delay budget of the owning bearer at arrival.
    pub deadline_offset: Millis,
    pub delivered_time: Option<Millis>,
}

impl Packet {
    pub fn new(seq: u64, arrival_time: Millis, size_bits: u64, deadline_offset: Millis) -> Self {
        assert!(size_bits > 0, "packet size must be positive");
        Self {
            seq,
            arrival_time,
            size_bits,
            remaining_bits: size_bits,
            deadline_offset,
            delivered_time: None,
        }
    }

    /// Absolute time after which an undelivered packet counts as late.
    pub fn deadline(&self) -> Millis {
        self.arrival_time + self.deadline_offset
    }

    pub fn is_partial(&self) -> bool {
        self.remaining_bits > 0 && self.remaining_bits < self.size_bits
    }
}

/// QoS class of a bearer. `is_rt` comes from the scenario, not from the QCI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QciClass {
    pub qci: u8,
    pub deadline_ms: Millis,
    pub is_rt: bool,
}

impl QciClass {
    pub fn new(qci: u8, deadline_ms: Millis, is_rt: bool) -> Self {
        assert!(deadline_ms > 0, "deadline must be positive");
        Self {
            qci,
            deadline_ms,
            is_rt,
        }
    }
}

/// Result of trying to admit a packet into a capped queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Rejected,
}

impl Admission {
    pub fn is_accepted(self) -> bool {
        matches!(self, Admission::Accepted)
    }
}

/// Per-bearer FIFO of packets.
#[derive(Debug, Clone)]
pub struct DrbQueue {
    pub drb_id: DrbId,
    pub ue_id: UeId,
    pub qci: QciClass,
    pub max_queue_bits: Option<u64>,
    packets: VecDeque<Packet>,
    queued_bits: u64,
    /// Number of packets at the front whose deadline miss is already recorded.
    expired_prefix: usize,
    overflow_drops: u64,
}

impl DrbQueue {
    pub fn new(drb_id: DrbId, ue_id: UeId, qci: QciClass) -> Self {
        Self {
            drb_id,
            ue_id,
            qci,
            max_queue_bits: None,
            packets: VecDeque::new(),
            queued_bits: 0,
            expired_prefix: 0,
            overflow_drops: 0,
        }
    }

    pub fn with_cap(mut self, max_queue_bits: Option<u64>) -> Self {
        self.max_queue_bits = max_queue_bits;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn head(&self) -> Option<&Packet> {
        self.packets.front()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    /// Sum of `remaining_bits` over all queued packets.
    pub fn queued_bits(&self) -> u64 {
        self.queued_bits
    }

    pub fn overflow_drops(&self) -> u64 {
        self.overflow_drops
    }

    /// Age of the head-of-line packet, or `None` for an empty queue.
    pub fn hol_delay(&self, now: Millis) -> Option<Millis> {
        self.head().map(|p| now.saturating_sub(p.arrival_time))
    }

    /// Appends `packet` unless doing so would exceed the queue cap.
    /// Admission is all-or-nothing; a rejection bumps the overflow counter.
    pub fn enqueue(&mut self, packet: Packet) -> Admission {
        assert_eq!(
            packet.remaining_bits, packet.size_bits,
            "only fresh packets may be enqueued"
        );
        if let Some(tail) = self.packets.back() {
            debug_assert!(
                (tail.arrival_time, tail.seq) <= (packet.arrival_time, packet.seq),
                "FIFO order violated"
            );
        }
        if let Some(cap) = self.max_queue_bits {
            if self.queued_bits + packet.size_bits > cap {
                self.overflow_drops += 1;
                return Admission::Rejected;
            }
        }
        self.queued_bits += packet.size_bits;
        self.packets.push_back(packet);
        Admission::Accepted
    }

    /// Drains up to `bits` from the head in FIFO order. Fully drained packets
    /// are stamped with `now` and returned together with the number of bits
    /// actually consumed (less than `bits` only when the queue empties).
    ///
    /// Panics on an empty queue or zero `bits`.
    pub fn transmit_from_head(&mut self, bits: u64, now: Millis) -> Transmission {
        assert!(!self.is_empty(), "transmit on empty queue {}", self.drb_id);
        assert!(bits > 0, "transmit of zero bits");
        let mut budget = bits;
        let mut delivered = Vec::new();
        let mut late = 0usize;
        while budget > 0 {
            let Some(head) = self.packets.front_mut() else {
                break;
            };
            let take = head.remaining_bits.min(budget);
            head.remaining_bits -= take;
            budget -= take;
            self.queued_bits -= take;
            if head.remaining_bits == 0 {
                let mut pkt = self.packets.pop_front().expect("head exists");
                pkt.delivered_time = Some(now);
                if self.expired_prefix > 0 {
                    self.expired_prefix -= 1;
                    late += 1;
                }
                delivered.push(pkt);
            }
        }
        Transmission {
            consumed_bits: bits - budget,
            delivered,
            already_missed: late,
        }
    }

    /// Marks every not-yet-recorded packet whose deadline has strictly passed
    /// at `now` and returns them. Each packet is reported at most once.
    pub fn collect_expired(&mut self, now: Millis) -> Vec<&Packet> {
        let start = self.expired_prefix;
        let mut end = start;
        while let Some(p) = self.packets.get(end) {
            if now > p.deadline() {
                end += 1;
            } else {
                break;
            }
        }
        self.expired_prefix = end;
        self.packets.range(start..end).collect()
    }

    pub fn expired_count(&self) -> usize {
        self.expired_prefix
    }
}

/// Outcome of [`DrbQueue::transmit_from_head`].
#[derive(Debug, Clone, Default)]
pub struct Transmission {
    pub consumed_bits: u64,
    /// Packets completed this call, in FIFO order.
    pub delivered: Vec<Packet>,
    /// How many of `delivered` were already recorded as deadline misses.
    pub already_missed: usize,
}

/// Static resource grid of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellConfig {
    pub bandwidth_rbs: u32,
    pub tti_ms: Millis,
    pub bits_per_rb_per_tti: u64,
}

impl Default for CellConfig {
    /// 5 MHz carrier: 25 RBs of 732 bits each per 1 ms TTI, 18.3 Mbit/s.
    fn default() -> Self {
        Self {
            bandwidth_rbs: 25,
            tti_ms: 1,
            bits_per_rb_per_tti: 732,
        }
    }
}

impl CellConfig {
    pub fn capacity_bps(&self) -> u64 {
        self.bandwidth_rbs as u64 * self.bits_per_rb_per_tti * 1000 / self.tti_ms
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        if self.bandwidth_rbs == 0 {
            return Err(crate::Error::invalid("bandwidth_rbs", "must be positive"));
        }
        if self.tti_ms == 0 {
            return Err(crate::Error::invalid("tti_ms", "must be positive"));
        }
        if self.bits_per_rb_per_tti == 0 {
            return Err(crate::Error::invalid("bits_per_rb", "must be positive"));
        }
        Ok(())
    }
}

/// Scheduling priority of one bearer; always non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingMetric {
    pub drb_id: DrbId,
    pub value: f64,
}

impl SchedulingMetric {
    pub fn new(drb_id: DrbId, value: f64) -> Self {
        debug_assert!(value >= 0.0 && !value.is_nan());
        Self { drb_id, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn queue() -> DrbQueue {
        DrbQueue::new(DrbId(1), UeId(1), QciClass::new(7, 100, true))
    }

    #[test]
    fn hol_delay_is_head_age() {
        let mut q = queue();
        assert_eq!(q.hol_delay(500), None);
        q.enqueue(Packet::new(0, 100, 8000, 100));
        q.enqueue(Packet::new(1, 130, 8000, 100));
        assert_eq!(q.hol_delay(160), Some(60));
        let mut q = queue();
        q.enqueue(Packet::new(0, 200, 8, 100));
        assert_eq!(q.hol_delay(200), Some(0));
    }

    #[test]
    fn enqueue_respects_cap() {
        let mut q = queue();
        assert!(q.enqueue(Packet::new(0, 0, 33325 * 8, 100)).is_accepted());

        let mut q = queue().with_cap(Some(100));
        assert!(q.enqueue(Packet::new(0, 0, 100, 100)).is_accepted());
        assert_eq!(q.enqueue(Packet::new(1, 0, 1, 100)), Admission::Rejected);
        assert_eq!(q.overflow_drops(), 1);

        let mut q = queue().with_cap(Some(100));
        q.enqueue(Packet::new(0, 0, 99, 100));
        assert_eq!(q.enqueue(Packet::new(1, 0, 2, 100)), Admission::Rejected);
        assert_eq!(q.queued_bits(), 99);
    }

    #[test]
    fn transmit_exact_drain() {
        let mut q = queue();
        q.enqueue(Packet::new(0, 0, 8000, 100));
        let tx = q.transmit_from_head(8000, 5);
        assert_eq!(tx.consumed_bits, 8000);
        assert_eq!(tx.delivered.len(), 1);
        assert_eq!(tx.delivered[0].delivered_time, Some(5));
        assert!(q.is_empty());
    }

    #[test]
    fn transmit_partial_head() {
        let mut q = queue();
        q.enqueue(Packet::new(0, 0, 8000, 100));
        let tx = q.transmit_from_head(3000, 1);
        assert_eq!(tx.consumed_bits, 3000);
        assert!(tx.delivered.is_empty());
        assert_eq!(q.head().unwrap().remaining_bits, 5000);
    }

    #[test]
    fn transmit_spills_over() {
        let mut q = queue();
        q.enqueue(Packet::new(0, 0, 2000, 100));
        q.enqueue(Packet::new(1, 0, 2000, 100));
        let tx = q.transmit_from_head(3000, 1);
        assert_eq!(tx.consumed_bits, 3000);
        assert_eq!(tx.delivered.len(), 1);
        assert_eq!(q.head().unwrap().remaining_bits, 1000);
        assert_eq!(q.queued_bits(), 1000);
    }

    #[test]
    fn transmit_consumes_less_only_when_emptied() {
        let mut q = queue();
        q.enqueue(Packet::new(0, 0, 500, 100));
        let tx = q.transmit_from_head(732, 1);
        assert_eq!(tx.consumed_bits, 500);
        assert!(q.is_empty());
    }

    #[test]
    #[should_panic(expected = "empty queue")]
    fn transmit_on_empty_queue_panics() {
        queue().transmit_from_head(10, 0);
    }

    #[test]
    fn expiry_is_reported_once() {
        let mut q = queue();
        q.enqueue(Packet::new(0, 0, 8000, 100));
        q.enqueue(Packet::new(1, 50, 8000, 100));
        assert!(q.collect_expired(100).is_empty());
        assert_eq!(q.collect_expired(101).len(), 1);
        assert!(q.collect_expired(101).is_empty());
        assert_eq!(q.collect_expired(151).len(), 1);
        let tx = q.transmit_from_head(16000, 152);
        assert_eq!(tx.already_missed, 2);
        assert_eq!(q.expired_count(), 0);
    }

    #[test]
    fn default_cell_capacity() {
        assert_eq!(CellConfig::default().capacity_bps(), 18_300_000);
    }
}
