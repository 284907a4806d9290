use crate::dataset::Gender;
use crate::error::{Error, Result};

/// Serum creatinine conversion, µmol/L per mg/dL.
pub const CR_UMOL_PER_MGDL: f64 = 88.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ethnicity {
    Black,
    Other,
}

/// MDRD estimated GFR in mL/min/1.73m² from creatinine in mg/dL.
pub fn mdrd_egfr(cr_mgdl: f64, age: f64, gender: Gender, ethnicity: Ethnicity) -> Result<f64> {
    if !(cr_mgdl > 0.0) || !(age > 0.0) {
        return Err(Error::Domain(format!(
            "MDRD needs positive creatinine and age, got cr={cr_mgdl}, age={age}"
        )));
    }
    let rho = match gender {
        Gender::Female => 0.742,
        Gender::Male => 1.0,
    };
    let sigma = match ethnicity {
        Ethnicity::Black => 1.212,
        Ethnicity::Other => 1.0,
    };
    Ok(186.0 * cr_mgdl.powf(-1.154) * age.powf(-0.203) * rho * sigma)
}
