//! Slot-level multi-cell downlink simulator for PDU-set aware XR scheduling.
//!
//! The crate is `no_std` + `alloc`: all simulation state is explicit and all
//! randomness flows through seeded streams, so results are reproducible
//! anywhere. IO, configuration files, and the CLI live in the companion
//! binary crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod exact;
pub mod kpi;
pub mod link;
pub mod math;
pub mod rng;
pub mod sched;
pub mod traffic;
