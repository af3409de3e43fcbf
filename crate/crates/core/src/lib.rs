//! TTI-resolution simulator of an LTE downlink cell.
//!
//! Traffic sources feed per-bearer FIFO queues; once per TTI a scheduler
//! scores every backlogged bearer and hands out resource blocks greedily.
//! Five schedulers are provided: payload-size and deadline-aware (PayDA),
//! earliest deadline first, maximum throughput, proportional fair and
//! round robin. Runs report per-bearer head-of-line delay, deadline-miss
//! ratio and throughput.

pub mod cli;
pub mod engine;
pub mod kpi;
pub mod model;
pub mod phy;
pub mod sched;
pub mod traffic;

mod error;

pub use error::Error;
pub use model::{CellConfig, DrbId, DrbQueue, Millis, Packet, QciClass, UeId};
pub use sched::SchedulerKind;
