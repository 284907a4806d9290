use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synthetic cohort settings. Amplitudes and noise are in mg/dL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_days: usize,
    pub seed: u64,
    pub day_amplitude: f64,
    pub meal_amplitude: f64,
    pub circadian_amplitude: f64,
    /// Local meal times, "HH:MM".
    pub meal_schedule: Vec<String>,
    /// Observation noise sd of the CGM series.
    pub noise_sd: f64,
    /// Weight of the group latent signal in each member's latent signal.
    pub latent_sharing: f64,
    /// Stationary sd of the latent AR(1) signals.
    pub latent_sd: f64,
    pub latent_ar: f64,
    /// Subjects per latent-sharing group.
    pub group_size: usize,
    /// Mean CGM level when no clinical record drives the baseline.
    pub baseline: f64,
    /// Peak CGM rise per unit of meal glycemic load.
    pub gl_response: f64,
    /// Noise sd added to the MDRD eGFR.
    pub egfr_noise_sd: f64,
    /// Probability that a non-marker clinical cell is blanked.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 12,
            n_days: 5,
            seed: 0,
            day_amplitude: 20.0,
            meal_amplitude: 10.0,
            circadian_amplitude: 8.0,
            meal_schedule: vec!["07:00".into(), "12:00".into(), "18:00".into()],
            noise_sd: 3.0,
            latent_sharing: 0.9,
            latent_sd: 15.0,
            latent_ar: 0.95,
            group_size: 3,
            baseline: 140.0,
            gl_response: 1.2,
            egfr_noise_sd: 5.0,
            missing_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_days == 0 {
            return Err(Error::Config("n_days must be at least 1".into()));
        }
        for (name, v) in [
            ("day_amplitude", self.day_amplitude),
            ("meal_amplitude", self.meal_amplitude),
            ("circadian_amplitude", self.circadian_amplitude),
            ("noise_sd", self.noise_sd),
            ("latent_sd", self.latent_sd),
            ("gl_response", self.gl_response),
            ("egfr_noise_sd", self.egfr_noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.latent_sharing) {
            return Err(Error::Config("latent_sharing must lie in [0, 1]".into()));
        }
        if !(self.latent_ar.abs() < 1.0) {
            return Err(Error::Config("latent_ar must lie in (-1, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config("missing_rate must lie in [0, 1)".into()));
        }
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be at least 1".into()));
        }
        if !(self.baseline > 39.6 && self.baseline < 468.0) {
            return Err(Error::Config("baseline must lie inside the CGM range".into()));
        }
        self.meal_minutes().map(|_| ())
    }

    /// Meal times as minutes after midnight.
    pub fn meal_minutes(&self) -> Result<Vec<u32>> {
        self.meal_schedule
            .iter()
            .map(|s| {
                NaiveTime::parse_from_str(s, "%H:%M")
                    .map(|t| {
                        use chrono::Timelike;
                        t.hour() * 60 + t.minute()
                    })
                    .map_err(|_| Error::Config(format!("meal time {s:?} is not HH:MM")))
            })
            .collect()
    }
}
