//! Communication-efficient federated fine-tuning of low-rank adapters.
//!
//! The crate simulates a federation of clients that fine-tune LoRA factor
//! pairs on top of a frozen toy network and exchange them with a server
//! through a compressed protocol:
//!
//! - [`protocol`]: round-robin segment sharing, weighted segment aggregation
//!   and staleness-weighted mixing of global and local models.
//! - [`sparsifier`]: loss-adaptive, per-matrix-kind top-k selection with
//!   residual error feedback.
//! - [`codec`]: gap transform + Golomb coding of positions and binary16
//!   values in a byte-exact wire message.
//! - [`netsim`]: analytic transfer-time model for asymmetric links.
//! - [`analysis`]: Gini coefficient, contraction constant estimation and the
//!   convergence-constant calculator.
//! - [`orchestrator`]: experiment loop, ablations and metrics output.

pub mod analysis;
pub mod codec;
pub mod config;
pub mod data;
mod error;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod orchestrator;
pub mod protocol;
pub mod report;
pub mod sparsifier;

pub use error::{Error, Result};
