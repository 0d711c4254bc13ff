//! Hybrid quantum-classical PPO on a slippery 4x4 FrozenLake.
//!
//! The crate is split along the pipeline: [`qsim`] simulates 4-qubit
//! statevectors, [`circuits`] holds the embedding and the 19 benchmark
//! templates, [`lake`] is the environment plus its value-iteration oracle,
//! [`models`] the hybrid and MLP policy/value approximators, [`ppo`] the
//! trainer, [`qmetrics`] the circuit characterisation metrics and [`bench`]
//! the experiment grid and reporting.

// Negated float comparisons are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod circuits;
pub mod error;
pub mod lake;
pub mod models;
pub mod ppo;
pub mod qmetrics;
pub mod qsim;

pub use error::{Error, Result};
