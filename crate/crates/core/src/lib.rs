//! Truthful competitive auctions for digital goods with positive externalities.
//!
//! Agents hold set valuations `v_i(S)` that grow as more agents win. The crate provides the
//! best-uniform-price benchmarks `F^(k)`, the random-partition mechanism with its CostShare
//! stage, RSOP and the additive-valuation mechanism, a single-parameter truthfulness toolkit,
//! and exact experiment drivers.

pub mod benchmark;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod mechanisms;
pub mod report;
pub mod set;
pub mod truthfulness;
pub mod valuations;

pub use error::{Error, Result};
pub use set::WinnerSet;
