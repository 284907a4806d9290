//! Bayesian structural time series.
//!
//! The state holds a semi-local linear trend and any number of seasonal
//! blocks; a static regression enters the observation equation. Each
//! seasonal block follows a duration schedule and changes state only when
//! a new season starts. Parameters are sampled by Gibbs sweeps built on
//! forward filtering and backward sampling, and forecasts average over the
//! retained draws.

mod ffbs;
mod forecast;
mod kalman;
mod mcmc;
mod model;
mod regression;
mod spec;

pub use ffbs::ffbs_sample;
pub use forecast::{posterior_forecast, rolling_forecast, Forecast, RollingForecast};
pub use kalman::{kalman_loglik, KalmanOutput, KalmanStepper, StepInfo};
pub use mcmc::{mcmc_fit, sample_truncated_normal, Draw, PosteriorDraws};
pub use model::{assemble_model, ModelPriors, Params, SeasonalBlock, StateSpaceModel, LEVEL, SLOPE};
pub use regression::{model_posterior, sample_inv_gamma, sample_regression, RegressionDraw, RegressionSettings};
pub use spec::{
    default_components, BstsConfig, ComponentSpec, GaussianPrior, InvGammaPrior, PriorSettings, SlabSettings,
    DEFAULT_BURN, DEFAULT_DRAWS, DEFAULT_MAX_HORIZON,
};
