//! Bounded-resource probabilistic inference: belief networks, exact and
//! anytime inference engines, a decision-theoretic value model for partial
//! results, and a metalevel controller that picks the strategy and stopping
//! time with the greatest comprehensive value under a time-cost function.

pub mod anytime;
pub mod exact;
pub mod meta;
pub mod network;
pub mod problems;
pub mod scenarios;
pub mod value;

pub use anytime::{AnytimeEngine, Estimate};
pub use exact::{Posterior, ResourceLedger};
pub use network::{Evidence, Network, Query};
pub use problems::Problem;
