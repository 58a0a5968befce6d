//! Cost-aware majority voting for online dataset labeling.
//!
//! A pool of annotators (LLM stand-ins replayed from data files) votes on a
//! stream of instances. For each instance the engine estimates every
//! annotator's correctness probability from the instance embedding, then
//! selects the cheapest annotator subset whose weighted-majority-vote
//! confidence clears a user threshold. Everything runs online: no ground
//! truth, no pre-training, deterministic given a seed.
//!
//! Crate layout:
//! - [`types`] — shared domain types and run-config validation
//! - [`confidence`] — per-annotator confidence pipeline (linear bandit
//!   estimate, Beta-mixture posterior, Laplace smoothing, vote weight)
//! - [`vote`] — weighted majority voting and the online-weighted baseline
//! - [`oracle`] — subset vote-confidence (exact / Beta-CDF / Monte-Carlo)
//!   and the min-cost subset search
//! - [`correlation`] — online pairwise correlation of annotator rewards and
//!   correlated binary sampling through a Gaussian copula
//! - [`synthgen`] — calibrated synthetic correlated-vote data generation
//! - [`harness`] — run loop for all modes, dataset replay, metrics, sweeps

pub mod confidence;
pub mod correlation;
mod error;
pub mod harness;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod synthgen;
pub mod types;
pub mod vote;

pub use error::{Error, Result};
