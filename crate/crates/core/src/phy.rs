//! Linear RB-to-bits link model for a fixed, equal channel.

use std::collections::BTreeMap;

use crate::model::{CellConfig, UeId};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    /// Reported CQI; informational only, every UE sits at the same value.
    pub cqi: u8,
    pub bandwidth_rbs: u32,
    pub bits_per_rb_per_tti: u64,
    overrides: BTreeMap<UeId, u64>,
}

impl LinkModel {
    pub fn new(cell: &CellConfig) -> Self {
        assert!(cell.bits_per_rb_per_tti > 0);
        Self {
            cqi: 15,
            bandwidth_rbs: cell.bandwidth_rbs,
            bits_per_rb_per_tti: cell.bits_per_rb_per_tti,
            overrides: BTreeMap::new(),
        }
    }

    /// Gives `ue` its own per-RB capacity.
    pub fn with_override(mut self, ue: UeId, bits_per_rb: u64) -> Self {
        assert!(bits_per_rb > 0);
        self.overrides.insert(ue, bits_per_rb);
        self
    }

    pub fn bits_per_rb(&self, ue: UeId) -> u64 {
        self.overrides
            .get(&ue)
            .copied()
            .unwrap_or(self.bits_per_rb_per_tti)
    }

    /// Transport block size for `rbs` resource blocks granted to `ue`.
    pub fn tbs(&self, rbs: u32, ue: UeId) -> u64 {
        assert!(
            rbs <= self.bandwidth_rbs,
            "{rbs} RBs exceed the {} RB carrier",
            self.bandwidth_rbs
        );
        rbs as u64 * self.bits_per_rb(ue)
    }

    /// RBs needed to carry `bits` for `ue`, uncapped.
    pub fn rbs_for_bits(&self, bits: u64, ue: UeId) -> u64 {
        bits.div_ceil(self.bits_per_rb(ue))
    }
}
