//! Similar-individual selection by Euclidean distance in (FPG, 2HPP) space.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of similar subjects.
pub const DEFAULT_M: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerSource {
    Inferred,
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerPoint {
    pub subject_id: String,
    pub fpg: f64,
    pub hpp2: f64,
    pub source: MarkerSource,
}

impl MarkerPoint {
    pub fn new(subject_id: impl Into<String>, fpg: f64, hpp2: f64, source: MarkerSource) -> Result<Self> {
        let subject_id = subject_id.into();
        for (name, v) in [("fpg", fpg), ("hpp2", hpp2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} of {subject_id} must be finite and positive, got {v}")));
            }
        }
        Ok(MarkerPoint {
            subject_id,
            fpg,
            hpp2,
            source,
        })
    }

    pub fn distance(&self, other: &MarkerPoint) -> f64 {
        (self.fpg - other.fpg).hypot(self.hpp2 - other.hpp2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedSubject {
    pub subject_id: String,
    pub distance: f64,
}

/// Selection log entry: `{tester, selected: [{subject_id, distance}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tester: String,
    pub selected: Vec<SelectedSubject>,
}

impl Selection {
    pub fn subject_ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.subject_id.as_str()).collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }
}

/// Returns the `m` pool members nearest the tester, ascending by distance
/// with ties broken by subject id.
pub fn select_similar(pool: &[MarkerPoint], tester: &MarkerPoint, m: usize) -> Result<Selection> {
    if pool.iter().any(|p| p.subject_id == tester.subject_id) {
        return Err(Error::Identity(tester.subject_id.clone()));
    }
    if m == 0 || m > pool.len() {
        return Err(Error::Capacity(format!(
            "cannot select {m} similar subjects from a pool of {}",
            pool.len()
        )));
    }
    let mut scored: Vec<SelectedSubject> = pool
        .iter()
        .map(|p| SelectedSubject {
            subject_id: p.subject_id.clone(),
            distance: p.distance(tester),
        })
        .collect();
    scored.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.subject_id.cmp(&b.subject_id)));
    scored.truncate(m);
    Ok(Selection {
        tester: tester.subject_id.clone(),
        selected: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: &str, f: f64, h: f64) -> MarkerPoint {
        MarkerPoint::new(id, f, h, MarkerSource::Inferred).unwrap()
    }

    #[test]
    fn worked_example() {
        let pool = [pt("A", 100., 150.), pt("B", 120., 200.), pt("C", 300., 400.)];
        let tester = MarkerPoint::new("T", 110., 160., MarkerSource::Measured).unwrap();
        let s = select_similar(&pool, &tester, 2).unwrap();
        assert_eq!(s.subject_ids(), vec!["A", "B"]);
        assert!((s.selected[0].distance - 14.142135623730951).abs() < 1e-12);
        assert!((s.selected[1].distance - 41.23105625617661).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let pool = [pt("A", 100., 150.)];
        assert!(matches!(select_similar(&pool, &pt("B", 1., 1.), 2), Err(Error::Capacity(_))));
        assert!(matches!(select_similar(&pool, &pt("A", 1., 1.), 1), Err(Error::Identity(_))));
        assert!(MarkerPoint::new("x", f64::NAN, 1., MarkerSource::Measured).is_err());
    }

    #[test]
    fn ties_by_subject_id() {
        let pool = [pt("b", 100., 100.), pt("a", 100., 100.)];
        let s = select_similar(&pool, &pt("t", 110., 100.), 2).unwrap();
        assert_eq!(s.subject_ids(), vec!["a", "b"]);
    }
}
