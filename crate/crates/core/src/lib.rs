//! Distributional forecasts of technology costs.
//!
//! Log costs are modelled as a random walk with drift, optionally with
//! IMA(1,1) autocorrelated increments. Forecast errors normalized by the
//! rolling-window volatility estimate collapse onto a single Student t
//! distribution, which lets errors from many short series be pooled to
//! validate the forecasts and to calibrate prediction intervals.
//!
//! Modules, bottom-up:
//!
//! * [`stats`]: special functions, t distribution, OLS, t-tests, KS, RNG.
//! * [`dataset`]: CSV ingestion, selection of improving technologies and
//!   descriptive statistics.
//! * [`models`]: rolling-window drift/volatility estimates, IMA(1,1)
//!   maximum likelihood and the simulators.
//! * [`forecasting`]: variance factors, error normalization and the
//!   distributional forecast.
//! * [`hindcast`]: exhaustive rolling-origin hindcasting and error growth.
//! * [`surrogate`]: surrogate-data Monte Carlo for bands, p-values and
//!   global theta estimation.
//! * [`applications`]: crossing probabilities and trend crossing times.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod applications;
pub mod dataset;
mod error;
pub mod forecasting;
pub mod hindcast;
pub mod models;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
