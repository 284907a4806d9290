use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClinicalRecord, Feature, Gender};
use crate::error::{Error, Result};
use crate::scalar::{mean, quantile_sorted, sample_sd};

pub const GENDER_VARIABLE: &str = "gender";

/// z-score statistics and equal-frequency bin edges for one feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinEncoding {
    pub mean: f64,
    pub sd: f64,
    /// Interior edges in z-space, strictly increasing; a value equal to an
    /// edge falls in the lower class.
    pub edges: Vec<f64>,
    /// Representative original-scale value per class.
    pub representatives: Vec<f64>,
}

impl BinEncoding {
    pub fn class_of(&self, x: f64) -> usize {
        let z = (x - self.mean) / self.sd;
        self.edges.iter().take_while(|&&e| z > e).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    /// Two-level one-hot indicator (male = 0, female = 1).
    Binary,
    Binned(BinEncoding),
    /// Class indices supplied directly, with no decoding information.
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    pub encoding: Encoding,
}

impl Variable {
    pub fn categorical(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            encoding: Encoding::Categorical,
        }
    }

    /// Original-scale value represented by `class`.
    pub fn decode(&self, class: usize) -> f64 {
        match &self.encoding {
            Encoding::Binned(b) => b.representatives[class],
            Encoding::Binary | Encoding::Categorical => class as f64,
        }
    }
}

/// Class-index matrix over discretized variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDataset {
    variables: Vec<Variable>,
    row_ids: Vec<String>,
    /// Row-major, `row_ids.len() * variables.len()` cells.
    cells: Vec<usize>,
}

impl DiscreteDataset {
    /// Builds a dataset from per-variable columns, validating every cell.
    pub fn from_columns(variables: Vec<Variable>, columns: Vec<Vec<usize>>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let mut cells = Vec::with_capacity(n * variables.len());
        for r in 0..n {
            for (v, col) in variables.iter().zip(&columns) {
                if col[r] >= v.cardinality {
                    return Err(Error::Domain(format!(
                        "class {} of {} exceeds cardinality {}",
                        col[r], v.name, v.cardinality
                    )));
                }
                cells.push(col[r]);
            }
        }
        Ok(DiscreteDataset {
            variables,
            row_ids: (0..n).map(|i| i.to_string()).collect(),
            cells,
        })
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_rows() {
            return Err(Error::Shape("row id count differs from row count".into()));
        }
        self.row_ids = ids;
        Ok(self)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].cardinality
    }

    #[inline]
    pub fn get(&self, row: usize, var: usize) -> usize {
        self.cells[row * self.variables.len() + var]
    }

    pub fn row(&self, row: usize) -> &[usize] {
        let m = self.variables.len();
        &self.cells[row * m..(row + 1) * m]
    }

    pub fn column(&self, var: usize) -> Vec<usize> {
        (0..self.n_rows()).map(|r| self.get(r, var)).collect()
    }

    /// Projection onto the named variables, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::Schema(format!("variable {n} absent from dataset")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            cells.extend(idx.iter().map(|&v| self.get(r, v)));
        }
        Ok(DiscreteDataset {
            variables: idx.iter().map(|&v| self.variables[v].clone()).collect(),
            row_ids: self.row_ids.clone(),
            cells,
        })
    }

    /// Dataset made of the given rows (repeats allowed), in order.
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(rows.len() * self.n_vars());
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        DiscreteDataset {
            variables: self.variables.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            cells,
        }
    }

    /// Writes class indices as CSV with a `row_id` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row_id".to_string()];
        header.extend(self.variables.iter().map(|v| v.name.clone()));
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.row_ids[r].clone()];
            rec.extend(self.row(r).iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<dataset writer>", e))?;
        Ok(())
    }

    /// Writes variable metadata (cardinalities, z-score stats, bin edges).
    pub fn write_sidecar<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.variables)?;
        Ok(())
    }

    /// Reads the [`write_csv`](Self::write_csv) layout. Without `sidecar`
    /// metadata every column is categorical with cardinality one more than
    /// its largest class. A leading `row_id` column is optional.
    pub fn read_csv<R: std::io::Read>(input: R, sidecar: Option<Vec<Variable>>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let skip = usize::from(header.first().is_some_and(|h| h == "row_id"));
        let names = &header[skip..];
        let mut ids = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Schema(format!("row {} has {} fields, expected {}", r + 1, rec.len(), header.len())));
            }
            ids.push(if skip == 1 { rec[0].to_string() } else { r.to_string() });
            for (j, col) in columns.iter_mut().enumerate() {
                let cell = rec[j + skip].trim();
                let v = cell.parse::<usize>().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: names[j].clone(),
                    message: format!("{cell:?} is not a class index"),
                })?;
                col.push(v);
            }
        }
        let variables = match sidecar {
            Some(vars) => {
                let got: Vec<&str> = vars.iter().map(|v| v.name.as_str()).collect();
                if got != names.iter().map(String::as_str).collect::<Vec<_>>() {
                    return Err(Error::Schema("sidecar variables do not match the CSV header".into()));
                }
                vars
            }
            None => names
                .iter()
                .zip(&columns)
                .map(|(n, c)| Variable::categorical(n.clone(), c.iter().max().map_or(1, |m| m + 1)))
                .collect(),
        };
        DiscreteDataset::from_columns(variables, columns)?.with_row_ids(ids)
    }
}

fn encode_numeric(name: &str, values: &[f64], n_bins: usize) -> Result<(BinEncoding, Vec<usize>)> {
    let m = mean(values);
    let sd = sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::Encoding(name.to_string()));
    }
    let z: Vec<f64> = values.iter().map(|&x| (x - m) / sd).collect();
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = Vec::with_capacity(n_bins - 1);
    for k in 1..n_bins {
        let e = quantile_sorted(&sorted, k as f64 / n_bins as f64);
        if edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    let mut enc = BinEncoding {
        mean: m,
        sd,
        edges,
        representatives: Vec::new(),
    };
    let classes: Vec<usize> = values.iter().map(|&x| enc.class_of(x)).collect();
    let card = enc.edges.len() + 1;
    enc.representatives = (0..card)
        .map(|c| {
            if c > 0 && c + 1 < card {
                let mid = 0.5 * (enc.edges[c - 1] + enc.edges[c]);
                return m + sd * mid;
            }
            let mut members: Vec<f64> = values
                .iter()
                .zip(&classes)
                .filter(|&(_, &k)| k == c)
                .map(|(&x, _)| x)
                .collect();
            if members.is_empty() {
                let e = if c == 0 { enc.edges[0] } else { enc.edges[c - 1] };
                return m + sd * e;
            }
            members.sort_by(f64::total_cmp);
            quantile_sorted(&members, 0.5)
        })
        .collect();
    Ok((enc, classes))
}

/// z-scores every numeric feature, bins it into `n_bins` equal-frequency
/// classes, and encodes gender as a binary indicator (female = 1).
///
/// When ties collapse quantile edges the variable keeps fewer classes, so
/// its cardinality can be below `n_bins`.
pub fn standardize_encode(records: &[ClinicalRecord], n_bins: usize) -> Result<DiscreteDataset> {
    if n_bins < 2 {
        return Err(Error::Domain(format!("n_bins must be at least 2, got {n_bins}")));
    }
    if records.is_empty() {
        return Err(Error::Domain("cannot encode an empty record set".into()));
    }
    let mut variables = Vec::with_capacity(Feature::ALL.len() + 1);
    let mut columns = Vec::with_capacity(Feature::ALL.len() + 1);

    let gender = records
        .iter()
        .map(|r| match r.gender {
            Some(Gender::Male) => Ok(0),
            Some(Gender::Female) => Ok(1),
            None => Err(Error::Domain(format!(
                "record {} has no gender; impute before encoding",
                r.subject_id
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    variables.push(Variable {
        name: GENDER_VARIABLE.into(),
        cardinality: 2,
        encoding: Encoding::Binary,
    });
    columns.push(gender);

    for f in Feature::ALL {
        let values = records
            .iter()
            .map(|r| {
                r.get(f).ok_or_else(|| {
                    Error::Domain(format!(
                        "record {} is missing {}; impute before encoding",
                        r.subject_id,
                        f.name()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (enc, classes) = encode_numeric(f.name(), &values, n_bins)?;
        variables.push(Variable {
            name: f.name().into(),
            cardinality: enc.edges.len() + 1,
            encoding: Encoding::Binned(enc),
        });
        columns.push(classes);
    }
    DiscreteDataset::from_columns(variables, columns)?
        .with_row_ids(records.iter().map(|r| r.subject_id.clone()).collect())
}
