use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which value divides the absolute error in the MAPE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapeDenominator {
    /// `|x_i − y_i| / y_i` with `y` the forecast.
    #[default]
    Forecast,
    /// `|x_i − y_i| / x_i` with `x` the recorded value.
    Actual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
}

/// MAE, RMSE and MAPE (forecast denominator) of `predicted` against `actual`.
pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    compute_metrics_with(actual, predicted, MapeDenominator::Forecast)
}

pub fn compute_metrics_with(actual: &[f64], predicted: &[f64], denominator: MapeDenominator) -> Result<Metrics> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual values but {} forecasts",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Shape("metrics need at least one pair".into()));
    }
    if let Some(i) = predicted.iter().position(|p| !p.is_finite()) {
        return Err(Error::Domain(format!("forecast {i} is not finite")));
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq, mut pct) = (0.0, 0.0, 0.0);
    for (i, (&x, &y)) in actual.iter().zip(predicted).enumerate() {
        let d = (x - y).abs();
        let denom = match denominator {
            MapeDenominator::Forecast => y,
            MapeDenominator::Actual => x,
        };
        if denom == 0.0 {
            return Err(Error::Domain(format!("MAPE division by zero at pair {i}")));
        }
        abs += d;
        sq += d * d;
        pct += d / denom.abs();
    }
    Ok(Metrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: 100.0 * pct / n,
    })
}

/// Glycemic band limits in mg/dL: hypo below `hypo_max`, hyper above `hyper_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub hypo_max: f64,
    pub hyper_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            hypo_max: 70.0,
            hyper_min: 180.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.hypo_max < self.hyper_min) {
            return Err(Error::Config(format!(
                "hypo_max ({}) must be below hyper_min ({})",
                self.hypo_max, self.hyper_min
            )));
        }
        Ok(())
    }

    /// 0 = hypo, 1 = normal, 2 = hyper.
    pub fn band(&self, v: f64) -> usize {
        if v < self.hypo_max {
            0
        } else if v > self.hyper_min {
            2
        } else {
            1
        }
    }
}

/// Band labels in matrix order.
pub const BANDS: [&str; 3] = ["hypo", "normal", "hyper"];

/// Rows are actual bands, columns predicted bands, order [`BANDS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub cells: [[usize; 3]; 3],
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    /// Percent on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        100.0 * (0..3).map(|i| self.cells[i][i]).sum::<usize>() as f64 / n as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["actual", BANDS[0], BANDS[1], BANDS[2]])?;
        for (i, row) in self.cells.iter().enumerate() {
            w.write_record([BANDS[i].to_string(), row[0].to_string(), row[1].to_string(), row[2].to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<confusion writer>", e))?;
        Ok(())
    }
}

pub fn glycemic_confusion(actual: &[f64], predicted: &[f64], thresholds: &Thresholds) -> Result<Confusion> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual values but {} forecasts",
            actual.len(),
            predicted.len()
        )));
    }
    let mut cells = [[0; 3]; 3];
    for (&x, &y) in actual.iter().zip(predicted) {
        cells[thresholds.band(x)][thresholds.band(y)] += 1;
    }
    Ok(Confusion { cells })
}
