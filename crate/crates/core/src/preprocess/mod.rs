//! Clinical-data cleaning and dietary quantification.
//!
//! The clinical path is exclusion → mean imputation → z-score + four-class
//! encoding, producing the [`DiscreteDataset`] consumed by structure
//! learning. The time-series path turns dietary records into a per-grid-point
//! glycemic-load regressor.

mod encode;
mod exclusion;
mod glycemic;
mod impute;

pub use encode::{standardize_encode, BinEncoding, DiscreteDataset, Encoding, Variable, GENDER_VARIABLE};
pub use exclusion::{exclude_incomplete, write_exclusions, Exclusion, ExclusionReason, DEFAULT_MAX_MISSING};
pub use glycemic::{build_meal_regressor, glycemic_load, meal_glycemic_load, MealRegressor};
pub use impute::impute_means;
