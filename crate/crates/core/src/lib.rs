//! Active diagnosis by entropy-maximizing observation collection over a
//! learned implication model, plus the benchmark domains and harness.

pub mod battleship;
pub mod cli;
pub mod collector;
pub mod delivery;
pub mod error;
pub mod model;
pub mod network;
pub mod preference;
pub mod runner;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    binary_entropy, kendall_correlation, pair_index, BeliefVector, ObservationLog,
    ObservationValue, ObservationVector, Ranking,
};
