//! Multi-class coded slotted ALOHA with unequal error protection.
//!
//! Users in different classes pick their repetition degree from different
//! distributions. The crate simulates the SIC peeling decoder on random
//! frames, computes asymptotic thresholds by density evolution, predicts
//! per-class error floors from small stopping sets, searches for degree
//! distributions meeting per-class loss targets, and measures decoding delay
//! under a slot-by-slot decoder.

pub mod cli;
pub mod delay;
pub mod density_evolution;
pub mod error;
pub mod error_floor;
pub mod harness;
pub mod model;
pub mod nelder_mead;
pub mod optimizer;
pub mod presets;
pub mod sim;
pub mod stopping_set;

pub use error::{Error, Result};
pub use model::{average_distribution, ClassAssignment, ClassSpec, DegreeDistribution, ScenarioConfig};
