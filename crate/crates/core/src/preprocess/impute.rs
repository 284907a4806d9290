use crate::dataset::{ClinicalRecord, Feature, Gender};
use crate::error::{Error, Result};

/// Fills each missing numeric cell with the mean of that feature over the
/// records where it is present. A missing gender takes the majority class
/// (ties go to male).
pub fn impute_means(records: &[ClinicalRecord]) -> Result<Vec<ClinicalRecord>> {
    let mut out = records.to_vec();
    if records.is_empty() {
        return Ok(out);
    }
    for f in Feature::ALL {
        let donors: Vec<f64> = records.iter().filter_map(|r| r.get(f)).collect();
        if donors.len() == records.len() {
            continue;
        }
        if donors.is_empty() {
            return Err(Error::Imputation(f.name().to_string()));
        }
        let mean = donors.iter().sum::<f64>() / donors.len() as f64;
        for r in out.iter_mut().filter(|r| r.get(f).is_none()) {
            r.set(f, Some(mean));
        }
    }
    if records.iter().any(|r| r.gender.is_none()) {
        let female = records.iter().filter(|r| r.gender == Some(Gender::Female)).count();
        let male = records.iter().filter(|r| r.gender == Some(Gender::Male)).count();
        if female + male == 0 {
            return Err(Error::Imputation("gender".into()));
        }
        let mode = if female > male { Gender::Female } else { Gender::Male };
        for r in out.iter_mut().filter(|r| r.gender.is_none()) {
            r.gender = Some(mode);
        }
    }
    Ok(out)
}
