//! Cohort-level glue: loading a dataset directory, cleaning and encoding
//! the clinical table, learning the network, inferring markers and
//! assembling each tester with its similar subjects' series.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayesnet::{
    bootstrap_consensus, connect_components, fit_parameters, infer_markers, ArcStrengthTable, ArcType,
    BayesianNetworkModel, BootstrapParams, Evidence, FPG_VARIABLE, HPP2_VARIABLE,
};
use crate::dataset::{load_clinical, load_gl_table, load_timeseries, ClinicalRecord, GlucoseSeries, GlycemicTable};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::{
    build_meal_regressor, exclude_incomplete, impute_means, standardize_encode, DiscreteDataset, Exclusion,
    MealRegressor, DEFAULT_MAX_MISSING,
};
use crate::similarity::{select_similar, MarkerPoint, MarkerSource, Selection};
use crate::synth::{CLINICAL_FILE, GL_TABLE_FILE, SERIES_DIR};

/// Intervals per day on the 15-minute grid.
pub const STEPS_PER_DAY: usize = 96;

/// Raw inputs of one cohort.
#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub records: Vec<ClinicalRecord>,
    /// Keyed by subject id.
    pub series: BTreeMap<String, GlucoseSeries>,
    pub gl_table: GlycemicTable,
}

/// Loads `clinical.csv`, `gl_table.csv` and every `series/*.csv` of `dir`.
pub fn load_cohort(dir: &Path) -> Result<Cohort> {
    let records = load_clinical(dir.join(CLINICAL_FILE))?;
    let gl_table = load_gl_table(dir.join(GL_TABLE_FILE))?;
    let series_dir = dir.join(SERIES_DIR);
    let mut paths: Vec<_> = fs::read_dir(&series_dir)
        .map_err(|e| Error::io(&series_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut series = BTreeMap::new();
    for p in paths {
        let s = load_timeseries(&p)?;
        series.insert(s.subject_id.clone(), s);
    }
    Ok(Cohort {
        records,
        series,
        gl_table,
    })
}

/// Output of the clinical and dietary preprocessing stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    /// Kept records after mean imputation.
    pub records: Vec<ClinicalRecord>,
    pub exclusions: Vec<Exclusion>,
    pub encoded: DiscreteDataset,
    /// Glycemic-load regressor per subject with a series.
    pub regressors: BTreeMap<String, MealRegressor>,
}

pub fn preprocess_cohort(cohort: &Cohort, n_bins: usize) -> Result<Preprocessed> {
    let (kept, exclusions) = exclude_incomplete(&cohort.records, DEFAULT_MAX_MISSING);
    if kept.is_empty() {
        return Err(Error::Capacity("no clinical record survives exclusion".into()));
    }
    let records = impute_means(&kept)?;
    let encoded = standardize_encode(&records, n_bins)?;
    let regressors = cohort
        .series
        .iter()
        .map(|(id, s)| Ok((id.clone(), build_meal_regressor(s, &cohort.gl_table)?)))
        .collect::<Result<_>>()?;
    Ok(Preprocessed {
        records,
        exclusions,
        encoded,
        regressors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnSettings {
    pub bootstrap: BootstrapParams,
    /// Additive smoothing of the CPT counts.
    pub alpha: f64,
    /// Join isolated parts of the consensus with their strongest arcs.
    pub connect: bool,
}

impl Default for LearnSettings {
    fn default() -> Self {
        LearnSettings {
            bootstrap: BootstrapParams::default(),
            alpha: 1.0,
            connect: true,
        }
    }
}

/// Bootstrap structure learning plus CPT fitting.
pub fn learn_network(data: &DiscreteDataset, settings: &LearnSettings) -> Result<(BayesianNetworkModel, ArcStrengthTable)> {
    let (strengths, mut dag) = bootstrap_consensus(data, &settings.bootstrap)?;
    let added = if settings.connect {
        connect_components(&mut dag, &strengths)
    } else {
        Vec::new()
    };
    let names = dag.nodes().to_vec();
    let arc_types: BTreeMap<(String, String), ArcType> = added
        .iter()
        .map(|&(i, j)| ((names[i].clone(), names[j].clone()), ArcType::Possible))
        .collect();
    let model = fit_parameters(&dag, data, settings.alpha)?
        .with_arc_metadata(|a, b| strengths.strength_by_name(a, b), &arc_types);
    Ok((model, strengths))
}

/// Inferred marker point of every encoded subject, conditioning on all of
/// its non-marker classes.
pub fn inferred_markers(model: &BayesianNetworkModel, data: &DiscreteDataset) -> Result<Vec<MarkerPoint>> {
    let names: Vec<String> = model
        .dag
        .nodes()
        .iter()
        .filter(|n| n.as_str() != FPG_VARIABLE && n.as_str() != HPP2_VARIABLE)
        .cloned()
        .collect();
    let cols: Vec<usize> = names
        .iter()
        .map(|n| data.index_of(n).ok_or_else(|| Error::Schema(format!("network node {n} absent from data"))))
        .collect::<Result<_>>()?;
    (0..data.n_rows())
        .map(|row| {
            let evidence: Evidence = names.iter().zip(&cols).map(|(n, &c)| (n.clone(), data.get(row, c))).collect();
            let post = infer_markers(model, &evidence)?;
            MarkerPoint::new(data.row_ids()[row].clone(), post.fpg_hat, post.hpp2_hat, MarkerSource::Inferred)
        })
        .collect()
}

/// Measured marker point of a record.
pub fn measured_marker(record: &ClinicalRecord) -> Result<MarkerPoint> {
    match (record.fpg, record.hpp2) {
        (Some(f), Some(h)) => MarkerPoint::new(record.subject_id.clone(), f, h, MarkerSource::Measured),
        _ => Err(Error::Domain(format!("record {} lacks a measured marker", record.subject_id))),
    }
}

/// A series and its glycemic-load regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectSeries {
    pub series: GlucoseSeries,
    pub gl: Vec<f64>,
}

/// One forecasting unit: the tester and the series of its similar subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSubject {
    pub target: SubjectSeries,
    pub similar: Vec<SubjectSeries>,
}

impl EvalSubject {
    pub fn subject_id(&self) -> &str {
        &self.target.series.subject_id
    }

    /// Same subject without similar-subject regressors.
    pub fn without_similar(&self) -> Self {
        EvalSubject {
            target: self.target.clone(),
            similar: Vec::new(),
        }
    }
}

/// Pairs every subject that has both a series and a kept record with its
/// `m` most similar subjects: the pool holds the other subjects' inferred
/// markers, the tester contributes its measured ones.
pub fn assemble_subjects(
    cohort: &Cohort,
    pre: &Preprocessed,
    model: &BayesianNetworkModel,
    m: usize,
) -> Result<(Vec<EvalSubject>, Vec<Selection>)> {
    let inferred = inferred_markers(model, &pre.encoded)?;
    let with_series: Vec<&MarkerPoint> = inferred.iter().filter(|p| cohort.series.contains_key(&p.subject_id)).collect();
    let unit = |id: &str| -> Result<SubjectSeries> {
        let series = cohort.series[id].clone();
        let gl = pre
            .regressors
            .get(id)
            .map_or_else(|| vec![0.0; series.len()], |r| r.values.clone());
        Ok(SubjectSeries { series, gl })
    };
    let mut subjects = Vec::new();
    let mut selections = Vec::new();
    for record in pre.records.iter().filter(|r| cohort.series.contains_key(&r.subject_id)) {
        let tester = measured_marker(record)?;
        let pool: Vec<MarkerPoint> = with_series
            .iter()
            .filter(|p| p.subject_id != tester.subject_id)
            .map(|p| (*p).clone())
            .collect();
        let selection = if m == 0 {
            Selection {
                tester: tester.subject_id.clone(),
                selected: Vec::new(),
            }
        } else {
            select_similar(&pool, &tester, m)?
        };
        subjects.push(EvalSubject {
            target: unit(&record.subject_id)?,
            similar: selection.subject_ids().into_iter().map(unit).collect::<Result<_>>()?,
        });
        selections.push(selection);
    }
    Ok((subjects, selections))
}

/// Regression design for `subject` over `n_rows` grid points: for each
/// similar subject `k`, columns `cgm_sim{k}` and `gl_sim{k}`. Rows are
/// matched by clock phase (the similar series is shifted so that equal
/// indices share a time of day), every column is centered by its mean over
/// the first `center_len` rows, and rows past the end of a similar series
/// are zero.
pub fn design_matrix(subject: &EvalSubject, n_rows: usize, center_len: usize) -> (Matrix<f64>, Vec<String>) {
    let mut names = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = Vec::new();
    let phase = subject.target.series.start_phase();
    for (k, sim) in subject.similar.iter().enumerate() {
        let shift = (phase + STEPS_PER_DAY - sim.series.start_phase() % STEPS_PER_DAY) % STEPS_PER_DAY;
        let at = |v: &[f64], t: usize| v.get(t + shift).copied();
        names.push(format!("cgm_sim{}", k + 1));
        cols.push((0..n_rows).map(|t| at(&sim.series.cgm, t)).collect());
        names.push(format!("gl_sim{}", k + 1));
        cols.push((0..n_rows).map(|t| at(&sim.gl, t)).collect());
    }
    let mut x = Matrix::zeros(n_rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        let head: Vec<f64> = col.iter().take(center_len).flatten().copied().collect();
        let center = if head.is_empty() { 0.0 } else { head.iter().sum::<f64>() / head.len() as f64 };
        for (t, v) in col.iter().enumerate() {
            x[(t, j)] = v.map_or(0.0, |v| v - center);
        }
    }
    (x, names)
}
