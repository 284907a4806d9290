use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{GlucoseSeries, GlycemicTable, Meal, MealContent};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Glycemic load of a portion: `gi × cho_available / 100`.
pub fn glycemic_load<T: Real>(gi: T, cho_available: T) -> Result<T> {
    if !(gi >= T::zero()) || !(cho_available >= T::zero()) {
        return Err(Error::Domain(format!(
            "glycemic load needs non-negative inputs, got gi={gi}, cho={cho_available}"
        )));
    }
    Ok(gi * cho_available / T::lit(100.0))
}

/// Total glycemic load of one meal; every food item must match the table
/// unless the meal was quantified upstream.
pub fn meal_glycemic_load(meal: &Meal, table: &GlycemicTable) -> std::result::Result<f64, Vec<String>> {
    match &meal.content {
        MealContent::Quantified(gl) => Ok(*gl),
        MealContent::Items(items) => {
            let mut total = 0.0;
            let mut unmatched = Vec::new();
            for item in items {
                match table.lookup(&item.description) {
                    Some(e) => {
                        let cho = e.cho_per_100g * item.grams / 100.0;
                        total += glycemic_load(e.gi, cho).expect("table entries are non-negative");
                    }
                    None => unmatched.push(item.description.clone()),
                }
            }
            if unmatched.is_empty() {
                Ok(total)
            } else {
                Err(unmatched)
            }
        }
    }
}

/// Per-grid-point glycemic load aligned with a [`GlucoseSeries`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MealRegressor {
    pub values: Vec<f64>,
}

impl MealRegressor {
    pub fn zeros(len: usize) -> Self {
        MealRegressor { values: vec![0.0; len] }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// CSV with `timestamp,gl`, one row per grid point of `series`.
    pub fn write_csv<W: Write>(&self, series: &GlucoseSeries, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "gl"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([series.timestamp(i).to_rfc3339(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<regressor writer>", e))?;
        Ok(())
    }
}

/// Places each meal's glycemic load at its grid point and zero elsewhere.
pub fn build_meal_regressor(series: &GlucoseSeries, table: &GlycemicTable) -> Result<MealRegressor> {
    let mut reg = MealRegressor::zeros(series.len());
    let mut unmatched = Vec::new();
    for meal in &series.meals {
        match meal_glycemic_load(meal, table) {
            Ok(gl) => reg.values[meal.index] += gl,
            Err(mut missing) => unmatched.append(&mut missing),
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::Lookup(unmatched));
    }
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_gl_table, FoodItem};
    use chrono::DateTime;
    use proptest::prelude::*;

    fn series_with(meals: Vec<(usize, MealContent)>) -> GlucoseSeries {
        let start = DateTime::parse_from_rfc3339("2024-03-01T00:00:00+08:00").unwrap();
        let meals = meals
            .into_iter()
            .map(|(index, content)| Meal {
                index,
                timestamp: start,
                content,
            })
            .collect();
        GlucoseSeries::new("s", start, vec![100.0; 8], meals).unwrap()
    }

    fn table() -> GlycemicTable {
        parse_gl_table(b"pattern,gi,cho_per_100g\npork and rice dish,60,23\nrice,73,28\n").unwrap()
    }

    #[test]
    fn pork_and_rice_is_13_8() {
        assert_eq!(glycemic_load(60.0, 23.0).unwrap(), 13.8);
        assert_eq!(glycemic_load(100.0, 50.0).unwrap(), 50.0);
        assert_eq!(glycemic_load(77.0, 0.0).unwrap(), 0.0);
        assert!(glycemic_load(-1.0, 2.0).is_err());
        assert!(glycemic_load(1.0f32, -2.0).is_err());
    }

    #[test]
    fn single_item_meal_regressor() {
        let s = series_with(vec![(3, MealContent::Items(vec![FoodItem {
            description: "pork and rice dish".into(),
            grams: 100.0,
        }]))]);
        let reg = build_meal_regressor(&s, &table()).unwrap();
        let mut expect = vec![0.0; 8];
        expect[3] = 13.8;
        assert_eq!(reg.values, expect);
    }

    #[test]
    fn no_meals_all_zero() {
        let reg = build_meal_regressor(&series_with(vec![]), &table()).unwrap();
        assert_eq!(reg.values, vec![0.0; 8]);
    }

    #[test]
    fn multi_item_meal_sums() {
        // 10 + 5
        let t = parse_gl_table(b"pattern,gi,cho_per_100g\na,50,20\nb,50,10\n").unwrap();
        let s = series_with(vec![(1, MealContent::Items(vec![
            FoodItem { description: "a".into(), grams: 100.0 },
            FoodItem { description: "b".into(), grams: 100.0 },
        ]))]);
        assert_eq!(build_meal_regressor(&s, &t).unwrap().values[1], 15.0);
    }

    #[test]
    fn unmatched_food_lists_descriptions() {
        let s = series_with(vec![
            (1, MealContent::Items(vec![FoodItem { description: "durian".into(), grams: 80.0 }])),
            (2, MealContent::Quantified(4.0)),
        ]);
        match build_meal_regressor(&s, &table()).unwrap_err() {
            Error::Lookup(d) => assert_eq!(d, vec!["durian".to_string()]),
            e => panic!("{e}"),
        }
    }

    proptest! {
        #[test]
        fn bilinear(gi in 0.0f64..150.0, cho in 0.0f64..100.0, a in 0.0f64..10.0) {
            let base = glycemic_load(gi, cho).unwrap();
            prop_assert!((glycemic_load(a * gi, cho).unwrap() - a * base).abs() < 1e-9);
            prop_assert!((glycemic_load(gi, a * cho).unwrap() - a * base).abs() < 1e-9);
        }

        #[test]
        fn regressor_total_is_sum_of_meals(gls in proptest::collection::vec((0usize..8, 0.0f64..60.0), 0..6)) {
            let meals: Vec<_> = gls.iter().map(|&(i, g)| (i, MealContent::Quantified(g))).collect();
            let s = series_with(meals);
            let reg = build_meal_regressor(&s, &table()).unwrap();
            let expect: f64 = gls.iter().map(|&(_, g)| g).sum();
            prop_assert!((reg.total() - expect).abs() < 1e-9);
            prop_assert!(reg.values.iter().all(|&v| v >= 0.0));
            for (i, &v) in reg.values.iter().enumerate() {
                if v > 0.0 {
                    prop_assert!(gls.iter().any(|&(j, _)| j == i));
                }
            }
        }
    }
}
