use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::harness::{derive_seed, sliding_window_eval, BstsForecaster, EvalConfig, MetricsReport};
use crate::pipeline::EvalSubject;
use crate::scalar::{mean, sample_sd};

/// Component that an ablation row removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    SimilarSubjects,
    DaySeasonal,
    MealSeasonal,
    CircadianSeasonal,
}

impl Removal {
    pub const ALL: [Removal; 4] = [
        Removal::SimilarSubjects,
        Removal::DaySeasonal,
        Removal::MealSeasonal,
        Removal::CircadianSeasonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Removal::SimilarSubjects => "similar_subjects",
            Removal::DaySeasonal => "day_seasonal",
            Removal::MealSeasonal => "meal_seasonal",
            Removal::CircadianSeasonal => "circadian_seasonal",
        }
    }

    fn seasonal(self) -> Option<&'static str> {
        match self {
            Removal::SimilarSubjects => None,
            Removal::DaySeasonal => Some("day"),
            Removal::MealSeasonal => Some("meal"),
            Removal::CircadianSeasonal => Some("circadian"),
        }
    }
}

impl FromStr for Removal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Removal::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}")))
    }
}

/// Mean and sd over subjects of one horizon's scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub mae_mean: f64,
    pub mae_sd: f64,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub mape_mean: f64,
    pub mape_sd: f64,
    pub n_subjects: usize,
}

/// Per-subject mean ± sd of every horizon in the reports.
pub fn summarize(reports: &[MetricsReport], horizons: &[usize]) -> Vec<HorizonSummary> {
    horizons
        .iter()
        .map(|&h| {
            let rows: Vec<_> = reports.iter().filter_map(|r| r.horizon(h)).collect();
            let col = |f: fn(&crate::evaluate::HorizonMetrics) -> f64| rows.iter().map(|m| f(m)).collect::<Vec<f64>>();
            let (mae, rmse, mape) = (col(|m| m.mae), col(|m| m.rmse), col(|m| m.mape));
            let sd = |v: &[f64]| if v.len() > 1 { sample_sd(v) } else { 0.0 };
            HorizonSummary {
                horizon: h,
                mae_mean: mean(&mae),
                mae_sd: sd(&mae),
                rmse_mean: mean(&rmse),
                rmse_sd: sd(&rmse),
                mape_mean: mean(&mape),
                mape_sd: sd(&mape),
                n_subjects: rows.len(),
            }
        })
        .collect()
}

/// Evaluates every subject with one configuration, in parallel. Subject
/// `i` uses seed `derive_seed(seed, i)`, so rows of an ablation table
/// share random numbers subject by subject.
pub fn evaluate_subjects(cfg: &EvalConfig, subjects: &[EvalSubject], seed: u64) -> Result<Vec<MetricsReport>> {
    let forecaster = BstsForecaster::new(cfg.bsts());
    subjects
        .par_iter()
        .enumerate()
        .map(|(i, s)| sliding_window_eval(&forecaster, s, cfg, derive_seed(seed, i as u64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `"baseline"` or the removal name.
    pub name: String,
    pub summary: Vec<HorizonSummary>,
    pub reports: Vec<MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub horizons: Vec<usize>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned text table: one row per configuration, MAE/RMSE/MAPE
    /// mean ± sd for every horizon.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut header = format!("{:<20}", "configuration");
        for &h in &self.horizons {
            let minutes = h * 15;
            for m in ["MAE", "RMSE", "MAPE%"] {
                header.push_str(&format!(" {:>16}", format!("{m}@{minutes}min")));
            }
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for row in &self.rows {
            let mut line = format!("{:<20}", row.name);
            for s in &row.summary {
                for (m, sd) in [(s.mae_mean, s.mae_sd), (s.rmse_mean, s.rmse_sd), (s.mape_mean, s.mape_sd)] {
                    let _ = write!(line, " {:>16}", format!("{m:.2} ± {sd:.2}"));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Baseline row plus one row per removal, each removing a single component.
pub fn run_ablation(base: &EvalConfig, removals: &[String], subjects: &[EvalSubject], seed: u64) -> Result<AblationTable> {
    let parsed: Vec<Removal> = removals.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    base.validate()?;
    let mut rows = Vec::with_capacity(parsed.len() + 1);
    let baseline = evaluate_subjects(base, subjects, seed)?;
    rows.push(AblationRow {
        name: "baseline".into(),
        summary: summarize(&baseline, &base.horizons),
        reports: baseline,
    });
    for r in parsed {
        let mut cfg = base.clone();
        let reduced: Vec<EvalSubject>;
        let used = match r.seasonal() {
            Some(name) => {
                cfg.components.retain(|c| c.seasonal_name() != Some(name));
                subjects
            }
            None => {
                reduced = subjects.iter().map(EvalSubject::without_similar).collect();
                &reduced
            }
        };
        let reports = evaluate_subjects(&cfg, used, seed)?;
        rows.push(AblationRow {
            name: r.as_str().into(),
            summary: summarize(&reports, &base.horizons),
            reports,
        });
    }
    Ok(AblationTable {
        horizons: base.horizons.clone(),
        rows,
    })
}
