//! Pollution-aware plant operations from wind forecasts.
//!
//! The crate covers the whole chain from raw minute-level sensor data to an
//! hourly "maintain or reduce production" recommendation:
//!
//! * [`ingest`] parses sensor and official-forecast files, fills short gaps and
//!   aggregates minutes into hours (vector averaging for wind).
//! * [`features`] turns hourly history plus the freshest official forecast into
//!   304-column tabular rows, one dataset per lead time.
//! * [`regress`] holds the from-scratch regressors (elastic net, CART, random
//!   forest, gradient boosting) and their hyperparameter grids.
//! * [`ensemble`] stacks the per-family forecasts with an elastic-net combiner.
//! * [`scenario`] maps (speed, direction) to the S1..S4 danger grid.
//! * [`policy`] learns reward-maximizing policy trees over the member forecasts.
//! * [`evalsim`] computes error metrics, decision trade-offs and the
//!   operational state-machine backtest.
//! * [`synthgen`] generates a synthetic sensor world and lagged official forecasts.
//! * [`pipeline`] and [`service`] wire everything for the CLI and the HTTP API.

pub mod ensemble;
pub mod error;
pub mod evalsim;
pub mod features;
pub mod ingest;
pub mod pipeline;
pub mod policy;
pub mod regress;
pub mod scenario;
pub mod service;
pub mod synthgen;

pub use error::{Error, Result};
