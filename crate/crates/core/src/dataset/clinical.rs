use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CSV header of the clinical file, in canonical order.
pub const CLINICAL_COLUMNS: [&str; 18] = [
    "subject_id",
    "gender",
    "age",
    "height_m",
    "weight_kg",
    "bmi",
    "hba1c",
    "ga",
    "tc",
    "tg",
    "hdl",
    "ldl",
    "cr",
    "egfr",
    "ua",
    "bun",
    "fpg_mgdl",
    "hpp2_mgdl",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Some(Gender::Male),
            "female" | "f" => Some(Gender::Female),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

/// Numeric clinical characteristics, in network variable order.
///
/// UA and BUN are parsed from files but are not features: preprocessing
/// drops them for every record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Age,
    Height,
    Weight,
    Bmi,
    Hba1c,
    Ga,
    Tc,
    Tg,
    Hdl,
    Ldl,
    Cr,
    Egfr,
    Fpg,
    Hpp2,
}

impl Feature {
    pub const ALL: [Feature; 14] = [
        Feature::Age,
        Feature::Height,
        Feature::Weight,
        Feature::Bmi,
        Feature::Hba1c,
        Feature::Ga,
        Feature::Tc,
        Feature::Tg,
        Feature::Hdl,
        Feature::Ldl,
        Feature::Cr,
        Feature::Egfr,
        Feature::Fpg,
        Feature::Hpp2,
    ];

    /// Features other than the two glucose markers.
    pub const CHARACTERISTICS: [Feature; 12] = [
        Feature::Age,
        Feature::Height,
        Feature::Weight,
        Feature::Bmi,
        Feature::Hba1c,
        Feature::Ga,
        Feature::Tc,
        Feature::Tg,
        Feature::Hdl,
        Feature::Ldl,
        Feature::Cr,
        Feature::Egfr,
    ];

    /// Variable name used in datasets and networks.
    pub fn name(self) -> &'static str {
        match self {
            Feature::Age => "age",
            Feature::Height => "height",
            Feature::Weight => "weight",
            Feature::Bmi => "bmi",
            Feature::Hba1c => "hba1c",
            Feature::Ga => "ga",
            Feature::Tc => "tc",
            Feature::Tg => "tg",
            Feature::Hdl => "hdl",
            Feature::Ldl => "ldl",
            Feature::Cr => "cr",
            Feature::Egfr => "egfr",
            Feature::Fpg => "fpg",
            Feature::Hpp2 => "hpp2",
        }
    }

    fn column(self) -> &'static str {
        match self {
            Feature::Height => "height_m",
            Feature::Weight => "weight_kg",
            Feature::Fpg => "fpg_mgdl",
            Feature::Hpp2 => "hpp2_mgdl",
            other => other.name(),
        }
    }

    pub fn is_marker(self) -> bool {
        matches!(self, Feature::Fpg | Feature::Hpp2)
    }

    fn check(self, v: f64) -> std::result::Result<(), String> {
        let ok = match self {
            Feature::Height => v > 0.5 && v < 2.5,
            Feature::Fpg | Feature::Hpp2 => v > 20.0 && v < 700.0,
            _ => v > 0.0,
        };
        if ok && v.is_finite() {
            Ok(())
        } else {
            Err(format!("{} = {v} outside its valid range", self.column()))
        }
    }
}

/// One subject's anthropometric and biochemical characteristics.
///
/// Units: height m, weight kg, BMI kg/m², HbA1c mmol/mol, GA %, lipids
/// mmol/L, creatinine µmol/L, eGFR mL/min/1.73m², FPG and 2HPP mg/dL.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub subject_id: String,
    pub gender: Option<Gender>,
    pub age: Option<f64>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub bmi: Option<f64>,
    pub hba1c: Option<f64>,
    pub ga: Option<f64>,
    pub tc: Option<f64>,
    pub tg: Option<f64>,
    pub hdl: Option<f64>,
    pub ldl: Option<f64>,
    pub cr: Option<f64>,
    pub egfr: Option<f64>,
    pub ua: Option<f64>,
    pub bun: Option<f64>,
    pub fpg: Option<f64>,
    pub hpp2: Option<f64>,
}

impl ClinicalRecord {
    pub fn new(subject_id: impl Into<String>) -> Self {
        ClinicalRecord {
            subject_id: subject_id.into(),
            ..Default::default()
        }
    }

    pub fn get(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::Age => self.age,
            Feature::Height => self.height,
            Feature::Weight => self.weight,
            Feature::Bmi => self.bmi,
            Feature::Hba1c => self.hba1c,
            Feature::Ga => self.ga,
            Feature::Tc => self.tc,
            Feature::Tg => self.tg,
            Feature::Hdl => self.hdl,
            Feature::Ldl => self.ldl,
            Feature::Cr => self.cr,
            Feature::Egfr => self.egfr,
            Feature::Fpg => self.fpg,
            Feature::Hpp2 => self.hpp2,
        }
    }

    pub fn set(&mut self, f: Feature, v: Option<f64>) {
        let slot = match f {
            Feature::Age => &mut self.age,
            Feature::Height => &mut self.height,
            Feature::Weight => &mut self.weight,
            Feature::Bmi => &mut self.bmi,
            Feature::Hba1c => &mut self.hba1c,
            Feature::Ga => &mut self.ga,
            Feature::Tc => &mut self.tc,
            Feature::Tg => &mut self.tg,
            Feature::Hdl => &mut self.hdl,
            Feature::Ldl => &mut self.ldl,
            Feature::Cr => &mut self.cr,
            Feature::Egfr => &mut self.egfr,
            Feature::Fpg => &mut self.fpg,
            Feature::Hpp2 => &mut self.hpp2,
        };
        *slot = v;
    }

    /// Count of missing characteristics (gender plus every non-marker
    /// feature); UA and BUN are not counted.
    pub fn missing_characteristics(&self) -> usize {
        let numeric = Feature::CHARACTERISTICS
            .iter()
            .filter(|&&f| self.get(f).is_none())
            .count();
        numeric + usize::from(self.gender.is_none())
    }
}

#[derive(Clone, Copy)]
enum Column {
    SubjectId,
    Gender,
    Feature(Feature),
    Ua,
    Bun,
}

fn column_for(name: &str) -> Option<Column> {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "subject_id" => Some(Column::SubjectId),
        "gender" => Some(Column::Gender),
        "ua" => Some(Column::Ua),
        "bun" => Some(Column::Bun),
        other => Feature::ALL
            .iter()
            .find(|f| f.column() == other)
            .map(|&f| Column::Feature(f)),
    }
}

/// Loads the clinical CSV at `path`.
pub fn load_clinical(path: impl AsRef<Path>) -> Result<Vec<ClinicalRecord>> {
    let bytes = super::read_file(path.as_ref())?;
    parse_clinical(&bytes)
}

/// Parses clinical CSV bytes. Header names are matched case-insensitively;
/// `ua` and `bun` may be absent, every other column is required.
pub fn parse_clinical(bytes: &[u8]) -> Result<Vec<ClinicalRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(header.len());
    for name in header.iter() {
        match column_for(name) {
            Some(c) => columns.push(c),
            None => return Err(Error::Schema(format!("unknown column {name}"))),
        }
    }
    for required in CLINICAL_COLUMNS.iter().filter(|c| !matches!(**c, "ua" | "bun")) {
        if !header.iter().any(|h| h.trim().eq_ignore_ascii_case(required)) {
            return Err(Error::Schema(format!("missing column {required}")));
        }
    }

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        let mut out = ClinicalRecord::default();
        for (cell, (col, name)) in rec.iter().zip(columns.iter().zip(header.iter())) {
            let cell = cell.trim();
            let parse_num = || -> Result<Option<f64>> {
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("non-numeric value {cell:?}"),
                })
            };
            match *col {
                Column::SubjectId => out.subject_id = cell.to_string(),
                Column::Gender => {
                    out.gender = if cell.is_empty() {
                        None
                    } else {
                        Some(Gender::parse(cell).ok_or_else(|| Error::Parse {
                            row,
                            column: name.to_string(),
                            message: format!("unrecognised gender {cell:?}"),
                        })?)
                    }
                }
                Column::Feature(f) => {
                    let v = parse_num()?;
                    if let Some(v) = v {
                        f.check(v)
                            .map_err(|m| Error::Range(format!("row {row}: {m}")))?;
                    }
                    out.set(f, v);
                }
                Column::Ua => out.ua = parse_num()?,
                Column::Bun => out.bun = parse_num()?,
            }
        }
        if out.subject_id.is_empty() {
            return Err(Error::Parse {
                row,
                column: "subject_id".into(),
                message: "empty subject id".into(),
            });
        }
        records.push(out);
    }
    Ok(records)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records in the canonical clinical CSV layout.
pub fn write_clinical<W: Write>(records: &[ClinicalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLINICAL_COLUMNS)?;
    for r in records {
        let mut row = vec![
            r.subject_id.clone(),
            r.gender.map(|g| g.as_str().to_string()).unwrap_or_default(),
        ];
        for f in &Feature::ALL[..12] {
            row.push(fmt_opt(r.get(*f)));
        }
        row.push(fmt_opt(r.ua));
        row.push(fmt_opt(r.bun));
        row.push(fmt_opt(r.fpg));
        row.push(fmt_opt(r.hpp2));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<clinical writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject_id,gender,age,height_m,weight_kg,bmi,hba1c,ga,tc,tg,hdl,ldl,cr,egfr,ua,bun,fpg_mgdl,hpp2_mgdl";

    #[test]
    fn two_complete_rows() {
        let csv = format!(
            "{HEADER}\n\
             s1,male,55,1.72,70,23.7,55,18,4.5,1.6,1.1,2.8,80,90,300,5,140,220\n\
             s2,female,61,1.60,58,22.6,60,20,5.0,1.2,1.4,3.0,60,95,280,4.8,150,240\n"
        );
        let recs = parse_clinical(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].subject_id, "s1");
        assert_eq!(recs[1].gender, Some(Gender::Female));
        assert!(recs.iter().all(|r| r.missing_characteristics() == 0));
        assert_eq!(recs[1].hpp2, Some(240.0));
    }

    #[test]
    fn blank_hba1c_is_missing() {
        let csv = format!("{HEADER}\ns1,male,55,1.72,70,23.7,,18,4.5,1.6,1.1,2.8,80,90,,,140,220\n");
        let recs = parse_clinical(csv.as_bytes()).unwrap();
        assert_eq!(recs[0].hba1c, None);
        assert_eq!(recs[0].ua, None);
        assert_eq!(recs[0].missing_characteristics(), 1);
    }

    #[test]
    fn unknown_column_is_schema_error() {
        let csv = format!("{HEADER},XYZ\n");
        let err = parse_clinical(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown column XYZ"), "{err}");
    }

    #[test]
    fn header_match_is_case_insensitive() {
        let csv = format!("{}\n", HEADER.to_uppercase());
        assert!(parse_clinical(csv.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let csv = format!("{HEADER}\ns1,male,55,1.72,70,23.7,55,18,4.5,1.6,1.1,2.8,80,90,,,140,220\ns2,male,abc,1.72,70,23.7,55,18,4.5,1.6,1.1,2.8,80,90,,,140,220\n");
        match parse_clinical(csv.as_bytes()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "age");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn out_of_range_values_rejected() {
        let csv = format!("{HEADER}\ns1,male,55,3.0,70,23.7,55,18,4.5,1.6,1.1,2.8,80,90,,,140,220\n");
        assert!(matches!(parse_clinical(csv.as_bytes()), Err(Error::Range(_))));
        let csv = format!("{HEADER}\ns1,male,55,1.7,70,23.7,55,18,4.5,1.6,1.1,2.8,80,90,,,800,220\n");
        assert!(matches!(parse_clinical(csv.as_bytes()), Err(Error::Range(_))));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let csv = format!("{HEADER}\ns1,female,55,1.72,70,23.7,,18,4.5,1.6,1.1,2.8,80,90,310,,140,220\n");
        let recs = parse_clinical(csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_clinical(&recs, &mut buf).unwrap();
        assert_eq!(parse_clinical(&buf).unwrap(), recs);
    }
}
