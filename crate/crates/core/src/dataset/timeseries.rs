use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, SecondsFormat, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid spacing of every CGM series.
pub const STEP_MINUTES: i64 = 15;
/// Exclusive physiological bounds accepted for CGM readings, mg/dL.
pub const CGM_MIN: f64 = 20.0;
pub const CGM_MAX: f64 = 700.0;

const STEP_SECONDS: i64 = STEP_MINUTES * 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub description: String,
    pub grams: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MealContent {
    /// Raw dietary record to be quantified through the glycemic table.
    Items(Vec<FoodItem>),
    /// Glycemic load already computed upstream.
    Quantified(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meal {
    /// Grid point the meal is attached to.
    pub index: usize,
    /// Timestamp as recorded.
    pub timestamp: DateTime<FixedOffset>,
    pub content: MealContent,
}

/// CGM readings on a fixed 15-minute grid for one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlucoseSeries {
    pub subject_id: String,
    pub start: DateTime<FixedOffset>,
    pub cgm: Vec<f64>,
    pub meals: Vec<Meal>,
}

impl GlucoseSeries {
    /// Builds a series from raw grid values, validating the CGM range.
    pub fn new(
        subject_id: impl Into<String>,
        start: DateTime<FixedOffset>,
        cgm: Vec<f64>,
        meals: Vec<Meal>,
    ) -> Result<Self> {
        for (i, &v) in cgm.iter().enumerate() {
            if !(v > CGM_MIN && v < CGM_MAX) {
                return Err(Error::Range(format!(
                    "cgm value {v} at index {i} outside ({CGM_MIN}, {CGM_MAX})"
                )));
            }
        }
        if let Some(m) = meals.iter().find(|m| m.index >= cgm.len()) {
            return Err(Error::Grid {
                timestamp: m.timestamp.to_rfc3339(),
                message: "meal attached past the end of the series".into(),
            });
        }
        Ok(GlucoseSeries {
            subject_id: subject_id.into(),
            start,
            cgm,
            meals,
        })
    }

    pub fn len(&self) -> usize {
        self.cgm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cgm.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<FixedOffset> {
        self.start + Duration::seconds(STEP_SECONDS * index as i64)
    }

    /// Grid intervals elapsed since local midnight at the first reading.
    pub fn start_phase(&self) -> usize {
        let secs = self.start.num_seconds_from_midnight() as i64;
        (secs / STEP_SECONDS) as usize
    }
}

/// Index of the grid point nearest to `offset_secs` past the start, ties
/// resolved toward the earlier point.
fn nearest_grid_index(offset_secs: i64) -> i64 {
    let half = STEP_SECONDS / 2;
    (offset_secs - half).div_euclid(STEP_SECONDS)
        + i64::from((offset_secs - half).rem_euclid(STEP_SECONDS) != 0)
}

/// Loads a per-subject CGM file; the subject id is the file stem.
pub fn load_timeseries(path: impl AsRef<Path>) -> Result<GlucoseSeries> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_timeseries(&bytes, &id)
}

enum Col {
    Timestamp,
    Cgm,
    MealDesc,
    MealGrams,
    MealGl,
}

/// Parses CGM CSV bytes. Rows with a blank `cgm_mgdl` are meal-only rows and
/// may sit off the grid; every CGM row must extend the grid by exactly one
/// interval.
pub fn parse_timeseries(bytes: &[u8], subject_id: &str) -> Result<GlucoseSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers()?.clone();
    let mut cols = Vec::new();
    for name in header.iter() {
        let c = match name.to_ascii_lowercase().as_str() {
            "timestamp" => Col::Timestamp,
            "cgm_mgdl" => Col::Cgm,
            "meal_desc" => Col::MealDesc,
            "meal_grams" => Col::MealGrams,
            "meal_gl" => Col::MealGl,
            _ => return Err(Error::Schema(format!("unknown column {name}"))),
        };
        cols.push(c);
    }
    for required in ["timestamp", "cgm_mgdl"] {
        if !header.iter().any(|h| h.eq_ignore_ascii_case(required)) {
            return Err(Error::Schema(format!("missing column {required}")));
        }
    }

    let mut grid: Vec<(DateTime<FixedOffset>, f64)> = Vec::new();
    let mut pending: Vec<(DateTime<FixedOffset>, MealContent)> = Vec::new();

    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        let (mut ts, mut cgm, mut desc, mut grams, mut gl) = (None, None, "", "", "");
        for (cell, col) in rec.iter().zip(&cols) {
            match col {
                Col::Timestamp => {
                    ts = Some(DateTime::parse_from_rfc3339(cell).map_err(|e| Error::Parse {
                        row,
                        column: "timestamp".into(),
                        message: e.to_string(),
                    })?)
                }
                Col::Cgm if !cell.is_empty() => {
                    cgm = Some(cell.parse::<f64>().map_err(|_| Error::Parse {
                        row,
                        column: "cgm_mgdl".into(),
                        message: format!("non-numeric value {cell:?}"),
                    })?)
                }
                Col::Cgm => {}
                Col::MealDesc => desc = cell,
                Col::MealGrams => grams = cell,
                Col::MealGl => gl = cell,
            }
        }
        let ts = ts.ok_or_else(|| Error::Parse {
            row,
            column: "timestamp".into(),
            message: "missing timestamp".into(),
        })?;

        if let Some(meal) = parse_meal(row, desc, grams, gl)? {
            pending.push((ts, meal));
        }

        match cgm {
            Some(v) => {
                if !(v > CGM_MIN && v < CGM_MAX) {
                    return Err(Error::Range(format!(
                        "cgm value {v} at {} outside ({CGM_MIN}, {CGM_MAX})",
                        ts.to_rfc3339()
                    )));
                }
                if let Some(&(prev, _)) = grid.last() {
                    let delta = (ts - prev).num_seconds();
                    if delta == 0 {
                        return Err(Error::Grid {
                            timestamp: ts.to_rfc3339(),
                            message: "duplicate timestamp".into(),
                        });
                    }
                    if delta != STEP_SECONDS {
                        return Err(Error::Grid {
                            timestamp: ts.to_rfc3339(),
                            message: format!(
                                "expected {STEP_MINUTES}-minute spacing, found {delta} s"
                            ),
                        });
                    }
                }
                grid.push((ts, v));
            }
            None if desc.is_empty() && gl.is_empty() => {
                return Err(Error::Parse {
                    row,
                    column: "cgm_mgdl".into(),
                    message: "row carries neither a CGM value nor a meal".into(),
                })
            }
            None => {}
        }
    }

    let start = grid
        .first()
        .map(|&(t, _)| t)
        .ok_or_else(|| Error::Schema("time series has no CGM rows".into()))?;
    let len = grid.len() as i64;
    let mut meals = Vec::with_capacity(pending.len());
    for (ts, content) in pending {
        let idx = nearest_grid_index((ts - start).num_seconds());
        if idx < 0 || idx >= len {
            return Err(Error::Grid {
                timestamp: ts.to_rfc3339(),
                message: "meal falls outside the CGM grid".into(),
            });
        }
        meals.push(Meal {
            index: idx as usize,
            timestamp: ts,
            content,
        });
    }
    meals.sort_by_key(|m| (m.index, m.timestamp));

    Ok(GlucoseSeries {
        subject_id: subject_id.to_string(),
        start,
        cgm: grid.into_iter().map(|(_, v)| v).collect(),
        meals,
    })
}

fn parse_meal(row: usize, desc: &str, grams: &str, gl: &str) -> Result<Option<MealContent>> {
    if !gl.is_empty() {
        let v: f64 = gl.parse().map_err(|_| Error::Parse {
            row,
            column: "meal_gl".into(),
            message: format!("non-numeric value {gl:?}"),
        })?;
        if !(v >= 0.0) {
            return Err(Error::Range(format!("row {row}: meal_gl {v} is negative")));
        }
        return Ok(Some(MealContent::Quantified(v)));
    }
    if desc.is_empty() {
        return Ok(None);
    }
    let names: Vec<&str> = desc.split(';').map(str::trim).collect();
    let weights: Vec<&str> = grams.split(';').map(str::trim).collect();
    if names.len() != weights.len() {
        return Err(Error::Parse {
            row,
            column: "meal_grams".into(),
            message: format!("{} food items but {} weights", names.len(), weights.len()),
        });
    }
    let items = names
        .into_iter()
        .zip(weights)
        .map(|(name, w)| {
            let grams: f64 = w.parse().map_err(|_| Error::Parse {
                row,
                column: "meal_grams".into(),
                message: format!("non-numeric weight {w:?}"),
            })?;
            if !(grams >= 0.0) {
                return Err(Error::Range(format!("row {row}: negative meal weight")));
            }
            Ok(FoodItem {
                description: name.to_string(),
                grams,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(MealContent::Items(items)))
}

fn ts_string(ts: &DateTime<FixedOffset>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, false)
}

/// Writes a series in the canonical time-series CSV layout: grid rows first,
/// then one meal-only row per meal at its recorded timestamp.
pub fn write_timeseries<W: Write>(series: &GlucoseSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "cgm_mgdl", "meal_desc", "meal_grams", "meal_gl"])?;
    for (i, v) in series.cgm.iter().enumerate() {
        w.write_record([ts_string(&series.timestamp(i)), v.to_string(), String::new(), String::new(), String::new()])?;
    }
    for m in &series.meals {
        let (desc, grams, gl) = match &m.content {
            MealContent::Quantified(gl) => (String::new(), String::new(), gl.to_string()),
            MealContent::Items(items) => (
                items.iter().map(|i| i.description.as_str()).collect::<Vec<_>>().join(";"),
                items.iter().map(|i| i.grams.to_string()).collect::<Vec<_>>().join(";"),
                String::new(),
            ),
        };
        w.write_record([ts_string(&m.timestamp), String::new(), desc, grams, gl])?;
    }
    w.flush().map_err(|e| Error::io("<timeseries writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day_csv(n: usize) -> String {
        let start = DateTime::parse_from_rfc3339("2024-03-01T00:00:00+08:00").unwrap();
        let mut s = String::from("timestamp,cgm_mgdl,meal_desc,meal_grams,meal_gl\n");
        for i in 0..n {
            let t = start + Duration::minutes(15 * i as i64);
            s.push_str(&format!("{},{},,,\n", t.to_rfc3339(), 100.0 + i as f64 * 0.5));
        }
        s
    }

    #[test]
    fn full_day_has_96_points() {
        let s = parse_timeseries(day_csv(96).as_bytes(), "s1").unwrap();
        assert_eq!(s.len(), 96);
        assert_eq!(s.start_phase(), 0);
    }

    #[test]
    fn duplicate_timestamp_is_grid_error() {
        let mut csv = day_csv(3);
        csv.push_str("2024-03-01T00:30:00+08:00,120,,,\n");
        match parse_timeseries(csv.as_bytes(), "s1").unwrap_err() {
            Error::Grid { timestamp, message } => {
                assert!(timestamp.contains("00:30:00"));
                assert!(message.contains("duplicate"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn gap_is_grid_error() {
        let csv = "timestamp,cgm_mgdl\n2024-03-01T00:00:00+08:00,100\n2024-03-01T00:30:00+08:00,101\n";
        assert!(matches!(parse_timeseries(csv.as_bytes(), "s"), Err(Error::Grid { .. })));
    }

    #[test]
    fn cgm_out_of_range() {
        let csv = "timestamp,cgm_mgdl\n2024-03-01T00:00:00+08:00,800\n";
        assert!(matches!(parse_timeseries(csv.as_bytes(), "s"), Err(Error::Range(_))));
    }

    #[test]
    fn meal_attaches_to_nearest_earlier_grid_point() {
        let mut csv = day_csv(96);
        csv.push_str("2024-03-01T07:03:00+08:00,,rice,150,\n");
        csv.push_str("2024-03-01T12:07:30+08:00,,,,12.5\n");
        csv.push_str("2024-03-01T18:08:00+08:00,,noodles;egg,200;50,\n");
        let s = parse_timeseries(csv.as_bytes(), "s1").unwrap();
        let idx: Vec<usize> = s.meals.iter().map(|m| m.index).collect();
        // 07:00 -> 28, 12:07:30 ties to 12:00 -> 48, 18:08 -> 18:15 -> 73
        assert_eq!(idx, vec![28, 48, 73]);
        assert_eq!(s.meals[1].content, MealContent::Quantified(12.5));
        match &s.meals[2].content {
            MealContent::Items(items) => assert_eq!(items.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nearest_index_rule() {
        assert_eq!(nearest_grid_index(0), 0);
        assert_eq!(nearest_grid_index(180), 0);
        assert_eq!(nearest_grid_index(450), 0);
        assert_eq!(nearest_grid_index(451), 1);
        assert_eq!(nearest_grid_index(-300), 0);
        assert_eq!(nearest_grid_index(-451), -1);
    }

    #[test]
    fn round_trip_preserves_pairs() {
        let mut csv = day_csv(10);
        csv.push_str("2024-03-01T01:03:00+08:00,,rice,150,\n");
        let s = parse_timeseries(csv.as_bytes(), "s1").unwrap();
        let mut buf = Vec::new();
        write_timeseries(&s, &mut buf).unwrap();
        let back = parse_timeseries(&buf, "s1").unwrap();
        assert_eq!(back, s);
    }
}
