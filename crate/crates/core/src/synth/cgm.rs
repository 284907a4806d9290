use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{FoodItem, GlucoseSeries, GlycemicEntry, GlycemicTable, Meal, MealContent, STEP_MINUTES};
use crate::error::Result;
use crate::preprocess::meal_glycemic_load;
use crate::synth::SynthConfig;

/// Range CGM values are clipped to, in mg/dL.
pub const SYNTH_CGM_MIN: f64 = 39.6;
pub const SYNTH_CGM_MAX: f64 = 468.0;

const STEPS_PER_DAY: usize = 96;

/// Circadian levels: zero mean over the 48 + 24 interval cycle.
const CIRCADIAN_ACTIVE: f64 = 0.5;
const CIRCADIAN_SLEEP: f64 = -1.0;

/// Post-meal response length in intervals and the peak lag.
const RESPONSE_LEN: usize = 24;
const RESPONSE_PEAK: f64 = 5.0;

/// Foods served by the generator.
pub fn synthetic_gl_table() -> GlycemicTable {
    let rows: [(&str, f64, f64); 8] = [
        ("steamed rice", 73.0, 28.0),
        ("pork and rice dish", 60.0, 23.0),
        ("noodles", 55.0, 25.0),
        ("steamed bun", 88.0, 47.0),
        ("congee", 69.0, 9.0),
        ("whole milk", 31.0, 5.0),
        ("apple", 36.0, 13.0),
        ("boiled egg", 0.0, 1.0),
    ];
    GlycemicTable::new(
        rows.iter()
            .map(|&(p, gi, cho)| GlycemicEntry {
                pattern: p.into(),
                gi,
                cho_per_100g: cho,
            })
            .collect(),
    )
    .expect("built-in table is valid")
}

/// Start of every generated series: 2024-01-01 00:00 at UTC+8.
pub fn synthetic_start() -> DateTime<FixedOffset> {
    let tz = FixedOffset::east_opt(8 * 3600).expect("valid offset");
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
        .and_local_timezone(tz)
        .single()
        .expect("fixed offsets are unambiguous")
}

/// Ground-truth decomposition of one generated series (before noise and
/// clipping): `cgm ≈ baseline + day + meal + circadian + latent + response`.
#[derive(Clone, Debug, PartialEq)]
pub struct CgmTruth {
    pub subject_id: String,
    pub group: usize,
    pub baseline: f64,
    pub day: Vec<f64>,
    pub meal: Vec<f64>,
    pub circadian: Vec<f64>,
    pub latent: Vec<f64>,
    pub response: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCgm {
    pub series: Vec<GlucoseSeries>,
    pub truth: Vec<CgmTruth>,
    pub gl_table: GlycemicTable,
}

/// Response kernel `(k/5)² exp(2(1 − k/5))`, peaking at 1 after 75 minutes.
fn response_kernel(k: usize) -> f64 {
    let u = k as f64 / RESPONSE_PEAK;
    u * u * (2.0 * (1.0 - u)).exp()
}

fn ar1_path<R: Rng>(rng: &mut R, n: usize, ar: f64, sd: f64) -> Vec<f64> {
    let innov = sd * (1.0 - ar * ar).sqrt();
    let mut x = sd * rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            let v = x;
            x = ar * x + innov * rng.sample::<f64, _>(StandardNormal);
            v
        })
        .collect()
}

/// Random zero-mean season levels scaled to a peak magnitude of 1.
fn unit_pattern<R: Rng>(rng: &mut R, seasons: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..seasons).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mid = raw.iter().sum::<f64>() / seasons as f64;
    let centered: Vec<f64> = raw.iter().map(|v| v - mid).collect();
    let peak = centered.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        centered.iter().map(|v| v / peak).collect()
    } else {
        vec![0.0; seasons]
    }
}

fn sample_meal<R: Rng>(rng: &mut R, table: &GlycemicTable) -> Vec<FoodItem> {
    let staples = ["steamed rice", "pork and rice dish", "noodles", "steamed bun", "congee"];
    let sides = ["whole milk", "apple", "boiled egg"];
    let mut items = vec![FoodItem {
        description: staples[rng.random_range(0..staples.len())].into(),
        grams: rng.random_range(150.0..300.0f64).round(),
    }];
    if rng.random_bool(0.5) {
        items.push(FoodItem {
            description: sides[rng.random_range(0..sides.len())].into(),
            grams: rng.random_range(50.0..200.0f64).round(),
        });
    }
    debug_assert!(items.iter().all(|i| table.lookup(&i.description).is_some()));
    items
}

/// Identity, mean level and latent-sharing group of one generated subject.
#[derive(Clone, Debug, PartialEq)]
pub struct CgmSubject {
    pub subject_id: String,
    pub baseline: f64,
    pub group: usize,
}

/// Generates `cfg.n_subjects` series at `cfg.baseline`, ids `S001...`,
/// grouped in consecutive runs of `cfg.group_size`.
pub fn gen_cgm_series(cfg: &SynthConfig) -> Result<SyntheticCgm> {
    let subjects: Vec<CgmSubject> = (0..cfg.n_subjects)
        .map(|i| CgmSubject {
            subject_id: format!("S{:03}", i + 1),
            baseline: cfg.baseline,
            group: i / cfg.group_size.max(1),
        })
        .collect();
    gen_cgm_cohort(cfg, &subjects)
}

/// Generates one series per subject on a 15-minute grid over
/// `cfg.n_days` days starting at midnight.
///
/// Each member's latent signal is `c·L_group + sqrt(1 − c²)·L_own` with
/// `c = cfg.latent_sharing`, both AR(1) with stationary sd `cfg.latent_sd`.
/// Seasonal patterns follow the default layouts (four 6-hour day seasons,
/// three 8-hour meal seasons, a 48 + 24 interval circadian cycle). Day and
/// meal season levels are drawn per subject (zero mean, peak magnitude
/// equal to the amplitude); the circadian levels are fixed and scaled by a
/// subject factor in [0.8, 1.2]. Meals are
/// served at the schedule with ±30 minute jitter and raise glucose by
/// `cfg.gl_response · GL` at the response peak.
pub fn gen_cgm_cohort(cfg: &SynthConfig, subjects: &[CgmSubject]) -> Result<SyntheticCgm> {
    cfg.validate()?;
    let n = cfg.n_days * STEPS_PER_DAY;
    let table = synthetic_gl_table();
    let meal_steps: Vec<usize> = cfg
        .meal_minutes()?
        .into_iter()
        .map(|m| (m as i64 / STEP_MINUTES) as usize)
        .collect();
    let start = synthetic_start();
    let n_groups = subjects.iter().map(|s| s.group + 1).max().unwrap_or(0);
    let group_latents: Vec<Vec<f64>> = (0..n_groups)
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1000 + g as u64);
            ar1_path(&mut rng, n, cfg.latent_ar, cfg.latent_sd)
        })
        .collect();

    let mut series = Vec::with_capacity(subjects.len());
    let mut truth = Vec::with_capacity(subjects.len());
    for (i, subject) in subjects.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2000 + i as u64);
        let id = subject.subject_id.clone();
        let (baseline, group) = (subject.baseline, subject.group);
        let day_levels = unit_pattern(&mut rng, 4);
        let meal_levels = unit_pattern(&mut rng, 3);
        let fc = rng.random_range(0.8..1.2);
        let own = ar1_path(&mut rng, n, cfg.latent_ar, cfg.latent_sd);
        let c = cfg.latent_sharing;
        let latent: Vec<f64> = group_latents[group]
            .iter()
            .zip(&own)
            .map(|(g, o)| c * g + (1.0 - c * c).sqrt() * o)
            .collect();
        let day: Vec<f64> = (0..n)
            .map(|t| cfg.day_amplitude * day_levels[(t % STEPS_PER_DAY) / 24])
            .collect();
        let meal: Vec<f64> = (0..n)
            .map(|t| cfg.meal_amplitude * meal_levels[(t % STEPS_PER_DAY) / 32])
            .collect();
        let circadian: Vec<f64> = (0..n)
            .map(|t| {
                let unit = if t % 72 < 48 { CIRCADIAN_ACTIVE } else { CIRCADIAN_SLEEP };
                cfg.circadian_amplitude * fc * unit
            })
            .collect();

        let mut meals = Vec::new();
        let mut response = vec![0.0; n];
        for d in 0..cfg.n_days {
            for &m in &meal_steps {
                let jitter: i64 = rng.random_range(-2..=2);
                let idx = (d * STEPS_PER_DAY) as i64 + m as i64 + jitter;
                if idx < 0 || idx as usize >= n {
                    continue;
                }
                let idx = idx as usize;
                let meal = Meal {
                    index: idx,
                    timestamp: start + Duration::minutes(STEP_MINUTES * idx as i64),
                    content: MealContent::Items(sample_meal(&mut rng, &table)),
                };
                let gl = meal_glycemic_load(&meal, &table).expect("foods come from the table");
                for k in 0..RESPONSE_LEN.min(n - idx) {
                    response[idx + k] += cfg.gl_response * gl * response_kernel(k);
                }
                meals.push(meal);
            }
        }
        let cgm: Vec<f64> = (0..n)
            .map(|t| {
                let noise = cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
                (baseline + day[t] + meal[t] + circadian[t] + latent[t] + response[t] + noise)
                    .clamp(SYNTH_CGM_MIN, SYNTH_CGM_MAX)
            })
            .collect();
        series.push(GlucoseSeries::new(id.clone(), start, cgm, meals)?);
        truth.push(CgmTruth {
            subject_id: id,
            group,
            baseline,
            day,
            meal,
            circadian,
            latent,
            response,
        });
    }
    Ok(SyntheticCgm {
        series,
        truth,
        gl_table: table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_peaks_at_one() {
        assert!((response_kernel(5) - 1.0).abs() < 1e-15);
        assert_eq!(response_kernel(0), 0.0);
        assert!(response_kernel(4) < 1.0 && response_kernel(6) < 1.0);
    }

    #[test]
    fn degenerate_generator_is_constant() {
        let cfg = SynthConfig {
            n_subjects: 2,
            n_days: 1,
            day_amplitude: 0.0,
            meal_amplitude: 0.0,
            circadian_amplitude: 0.0,
            noise_sd: 0.0,
            latent_sd: 0.0,
            gl_response: 0.0,
            ..Default::default()
        };
        let out = gen_cgm_series(&cfg).unwrap();
        for s in &out.series {
            assert!(s.cgm.iter().all(|&v| v == cfg.baseline));
            assert_eq!(s.len(), 96);
        }
    }
}
