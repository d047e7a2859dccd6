//! Class-incremental continual learning under concept drift.
//!
//! The crate simulates drift-augmented task streams, trains a replay-based
//! learner on them and compares three responses to detected drift: doing
//! nothing (`vanilla`), realigning the replay buffer with a handful of fresh
//! samples (`amr`), and relearning from the full drifted data (`fr`).

pub mod cli;
pub mod drift;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod nnet;
pub mod oracles;
pub mod seed;
pub mod streams;
pub mod trainer;

pub use error::{Error, Result};
