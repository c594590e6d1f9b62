//! Retail sales forecasting toolkit: three forecasting engines (ARIMA, an
//! additive trend/seasonality/holiday model, and leaf-wise gradient-boosted
//! trees) plus M5-format data ingestion, feature engineering and a benchmark
//! protocol that compares the engines on held-out horizons.

pub mod additive;
pub mod arima;
pub mod bench;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod optim;
pub mod series;

pub use error::{Error, Result};
pub use series::{ForecastResult, TimeSeries};
