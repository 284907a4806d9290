use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::ablation::{summarize, HorizonSummary};
use crate::evaluate::harness::MetricsReport;
use crate::evaluate::metrics::Confusion;

/// Cohort report: per-subject scores and their mean ± sd per horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub horizons: Vec<usize>,
    pub summary: Vec<HorizonSummary>,
    /// Pooled confusion matrix per horizon, in `horizons` order.
    pub confusion: Vec<Confusion>,
    pub subjects: Vec<MetricsReport>,
}

impl EvaluationReport {
    pub fn new(subjects: Vec<MetricsReport>, horizons: &[usize]) -> Self {
        let confusion = horizons
            .iter()
            .map(|&h| {
                let mut cells = [[0; 3]; 3];
                for m in subjects.iter().filter_map(|r| r.horizon(h)) {
                    for (i, row) in m.confusion.cells.iter().enumerate() {
                        for (j, c) in row.iter().enumerate() {
                            cells[i][j] += c;
                        }
                    }
                }
                Confusion { cells }
            })
            .collect();
        EvaluationReport {
            horizons: horizons.to_vec(),
            summary: summarize(&subjects, horizons),
            confusion,
            subjects,
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Metrics rows by horizon (mean ± sd over subjects).
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>16} {:>16} {:>16} {:>9}\n",
            "PH", "MAE (mg/dL)", "RMSE (mg/dL)", "MAPE (%)", "subjects"
        );
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<8} {:>16} {:>16} {:>16} {:>9}",
                format!("{}min", s.horizon * 15),
                format!("{:.2} ± {:.2}", s.mae_mean, s.mae_sd),
                format!("{:.2} ± {:.2}", s.rmse_mean, s.rmse_sd),
                format!("{:.2} ± {:.2}", s.mape_mean, s.mape_sd),
                s.n_subjects
            );
        }
        out
    }

    /// Per-subject forecast and recorded ranges by horizon.
    pub fn ranges_text(&self) -> String {
        let mut out = format!("{:<10} {:<8} {:>20} {:>20}\n", "subject", "PH", "forecast range", "recorded range");
        for r in &self.subjects {
            for m in &r.horizons {
                let _ = writeln!(
                    out,
                    "{:<10} {:<8} {:>20} {:>20}",
                    r.subject_id,
                    format!("{}min", m.horizon * 15),
                    format!("({:.1}, {:.1})", m.forecast_min, m.forecast_max),
                    format!("({:.1}, {:.1})", m.actual_min, m.actual_max)
                );
            }
        }
        out
    }

    /// One CSV per horizon is the usual layout; this writes all of them
    /// stacked with a leading horizon column.
    pub fn write_confusion_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["horizon", "actual", "hypo", "normal", "hyper"])?;
        for (&h, c) in self.horizons.iter().zip(&self.confusion) {
            for (i, row) in c.cells.iter().enumerate() {
                w.write_record([
                    h.to_string(),
                    crate::evaluate::BANDS[i].to_string(),
                    row[0].to_string(),
                    row[1].to_string(),
                    row[2].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<confusion writer>", e))?;
        Ok(())
    }
}
