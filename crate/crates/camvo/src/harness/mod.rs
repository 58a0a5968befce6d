//! Run loop for all engine modes, dataset replay, metrics, and sweeps.

pub mod dataset;
pub mod engine;
pub mod metrics;
pub mod runcfg;
pub mod sweep;
