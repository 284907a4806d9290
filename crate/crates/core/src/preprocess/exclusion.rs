use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::ClinicalRecord;
use crate::error::{Error, Result};

/// Records with one to three missing characteristics are kept and imputed.
pub const DEFAULT_MAX_MISSING: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    #[serde(rename = "missing FPG or 2HPP")]
    MissingMarker,
    #[serde(rename = "too many missing")]
    TooManyMissing,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::MissingMarker => "missing FPG or 2HPP",
            ExclusionReason::TooManyMissing => "too many missing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: ExclusionReason,
}

/// Drops records lacking either glucose marker or with more than
/// `max_missing` missing characteristics. UA and BUN are cleared on every
/// kept record.
pub fn exclude_incomplete(
    records: &[ClinicalRecord],
    max_missing: usize,
) -> (Vec<ClinicalRecord>, Vec<Exclusion>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut report = Vec::new();
    for r in records {
        let reason = if r.fpg.is_none() || r.hpp2.is_none() {
            Some(ExclusionReason::MissingMarker)
        } else if r.missing_characteristics() > max_missing {
            Some(ExclusionReason::TooManyMissing)
        } else {
            None
        };
        match reason {
            Some(reason) => report.push(Exclusion {
                subject_id: r.subject_id.clone(),
                reason,
            }),
            None => {
                let mut r = r.clone();
                r.ua = None;
                r.bun = None;
                kept.push(r);
            }
        }
    }
    (kept, report)
}

/// Writes the exclusion log as line-delimited JSON.
pub fn write_exclusions<W: Write>(report: &[Exclusion], mut out: W) -> Result<()> {
    for e in report {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(|e| Error::io("<exclusion log>", e))?;
    }
    Ok(())
}
