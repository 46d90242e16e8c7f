//! Group electricity rates from smart-meter data.
//!
//! Consumers are grouped so that each group's cost to serve is as low as
//! possible while its aggregate load stays forecastable. The crate covers
//! ingestion and synthetic data, the cost and settlement model, the
//! minimum-rate subset solver, load forecasting, and population segmentation.

pub mod cost_model;
pub mod error;
pub mod forecast;
pub mod fractional_solver;
pub mod grid;
pub mod ingest;
pub mod rng;
pub mod segmentation;
pub mod simulation;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ConsumerSeries, CostStats, Dataset, DayProfile, ForecastErrorModel, HourlyMatrix, PriceSeries, SelectionVector,
    Window, HOURS,
};
