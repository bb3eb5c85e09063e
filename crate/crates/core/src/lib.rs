//! Penalised least-squares forecasting of day-ahead electricity prices.
//!
//! The pipeline runs [`ingest`] → [`transform`] → [`features`] →
//! [`selection`]/[`solver`] → [`backtest`] → [`metrics`]. Ten penalty
//! families live in [`penalties`].

pub mod backtest;
pub mod error;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod penalties;
pub mod selection;
pub mod solver;
pub mod synth;
pub mod transform;

pub use error::{Error, ErrorKind, Result};
pub use features::{DayRange, DesignMatrix, ModelKind};
pub use ingest::{Market, TimeSeriesPanel, Variable};
pub use penalties::{Family, PenaltySpec};
pub use solver::{FitResult, PathResult};
