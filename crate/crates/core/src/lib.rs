//! Pooled annuity funds with savings-weighted longevity credits.
//!
//! The crate simulates such a fund member by member, estimates how long it
//! keeps every member's income within a tolerance band, approximates that
//! horizon in closed form, and scores pool compositions by their implied
//! number of homogeneous members.

pub mod approx;
pub mod artifacts;
pub mod error;
pub mod experiments;
pub mod fund;
pub mod life_table;
pub mod normal;
pub mod pool_metrics;
pub mod savings;
pub mod stability;

pub use error::{Error, Result};
pub use life_table::{GompertzMakeham, LifeTable};
pub use savings::SavingsVector;
pub use stability::{StabilityEstimate, StabilityParams};
