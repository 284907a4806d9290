//! File loaders for clinical records, CGM series with dietary entries, and the
//! glycemic-index reference table.
//!
//! All inputs are CSV with a header row. Loaders are pure functions of the
//! file bytes: they either return a fully validated value or an error.

mod clinical;
mod gltable;
mod timeseries;

pub use clinical::{
    load_clinical, parse_clinical, write_clinical, ClinicalRecord, Feature, Gender, CLINICAL_COLUMNS,
};
pub use gltable::{load_gl_table, parse_gl_table, write_gl_table, GlycemicEntry, GlycemicTable};
pub use timeseries::{
    load_timeseries, parse_timeseries, write_timeseries, FoodItem, GlucoseSeries, Meal, MealContent,
    CGM_MAX, CGM_MIN, STEP_MINUTES,
};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
