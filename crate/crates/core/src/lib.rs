//! Cooperative edge caching in a cellular network.
//!
//! A deterministic, seedable simulator in which every base station runs its
//! own caching agent (a small actor network) while a centralized critic
//! evaluates the joint observation. The crate also ships the classic
//! LRU/LFU/FIFO replacement policies as baselines and an experiment harness
//! that sweeps Zipf skew, cache ratio and time-varying popularity.
//!
//! Module map:
//!
//! - [`topology`]: base stations, users, coverage.
//! - [`channel`]: Rayleigh fading, capacity, frame-counted delivery delay.
//! - [`workload`]: group-correlated Zipf preferences and request sampling.
//! - [`cache`]: cache state, action space, baselines, serving lookup.
//! - [`features`]: sliding-window request counters and observations.
//! - [`nn`]: a minimal multilayer perceptron with exact backprop.
//! - [`marl`]: decentralized actors, centralized critic, training updates.
//! - [`metrics`]: per-cycle delay accounting and the reduction percentage.
//! - [`sim`]: the per-cycle simulation loop shared by every policy.
//! - [`harness`]: experiment configuration, sweeps and output files.

pub mod cache;
pub mod channel;
pub mod error;
pub mod features;
pub mod harness;
pub mod marl;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};

/// Index of a content file in the catalog, `0..M`.
pub type FileId = usize;
/// Index of a base station, `0..N`.
pub type StationId = usize;
/// Index of a user, `0..U`.
pub type UserId = usize;
