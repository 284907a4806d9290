//! Glucose forecasting from CGM series, dietary records and clinical
//! characteristics.
//!
//! A discrete Bayesian network learned over encoded clinical variables
//! infers each subject's glucose markers; subjects with the closest markers
//! supply regressors to a Bayesian structural time-series model (semi-local
//! trend, day / meal / circadian seasonals, spike-and-slab regression)
//! fitted by Gibbs sampling and evaluated with a sliding-window protocol.
//!
//! The numeric core is generic over `f32` / `f64` through [`scalar::Real`];
//! the aliases below fix it to `f64`.

pub mod bayesnet;
pub mod bsts;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod linalg;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};

pub type Matrix = linalg::Matrix<f64>;
pub type StateSpaceModel = bsts::StateSpaceModel<f64>;
pub type Params = bsts::Params<f64>;
pub type PosteriorDraws = bsts::PosteriorDraws<f64>;
pub type Forecast = bsts::Forecast<f64>;
pub type RollingForecast = bsts::RollingForecast<f64>;
pub type KalmanOutput = bsts::KalmanOutput<f64>;
