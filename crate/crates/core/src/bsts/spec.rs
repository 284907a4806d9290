use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse-gamma prior on a variance, parameterized by shape and scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    /// Prior carrying `sample_size` pseudo-observations around `guess`.
    pub fn from_guess(sample_size: f64, guess: f64) -> Self {
        InvGammaPrior {
            shape: sample_size / 2.0,
            scale: sample_size * guess / 2.0,
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.shape > 0.0 && self.scale > 0.0 && self.shape.is_finite() && self.scale.is_finite() {
            Ok(())
        } else {
            Err(Error::Spec(format!("{what} prior needs positive shape and scale, got {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianPrior {
    pub fn validate(&self, what: &str) -> Result<()> {
        if self.sd > 0.0 && self.sd.is_finite() && self.mean.is_finite() {
            Ok(())
        } else {
            Err(Error::Spec(format!("{what} prior needs finite mean and positive sd, got {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlabSettings {
    /// Prior expected number of active columns.
    pub expected_model_size: f64,
    /// Weight of the full Gram matrix against its diagonal in the slab precision.
    pub information_weight: f64,
}

impl Default for SlabSettings {
    fn default() -> Self {
        SlabSettings {
            expected_model_size: 2.0,
            information_weight: 0.5,
        }
    }
}

impl SlabSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.expected_model_size >= 0.0 && self.expected_model_size.is_finite()) {
            return Err(Error::Spec("expected_model_size must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.information_weight) {
            return Err(Error::Spec("information_weight must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Prior inclusion probability for each of `j` columns.
    pub fn inclusion_probability(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            (self.expected_model_size / j as f64).min(1.0)
        }
    }
}

/// One structural component. Priors left unset are derived from the data
/// when the model is assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSpec {
    SemiLocalTrend {
        #[serde(default)]
        level_prior: Option<InvGammaPrior>,
        #[serde(default)]
        slope_prior: Option<InvGammaPrior>,
        #[serde(default)]
        d_prior: Option<GaussianPrior>,
        #[serde(default)]
        phi_prior: Option<GaussianPrior>,
    },
    Seasonal {
        name: String,
        n_seasons: usize,
        /// Intervals spent in each season; their sum is the cycle length.
        durations: Vec<usize>,
        /// Shift of the cycle relative to the series clock phase.
        #[serde(default)]
        offset: usize,
        #[serde(default)]
        variance_prior: Option<InvGammaPrior>,
    },
    Regression {
        columns: Vec<String>,
        #[serde(flatten)]
        slab: SlabSettings,
    },
}

impl ComponentSpec {
    pub fn semi_local_trend() -> Self {
        ComponentSpec::SemiLocalTrend {
            level_prior: None,
            slope_prior: None,
            d_prior: None,
            phi_prior: None,
        }
    }

    pub fn seasonal(name: impl Into<String>, durations: Vec<usize>) -> Self {
        ComponentSpec::Seasonal {
            name: name.into(),
            n_seasons: durations.len(),
            durations,
            offset: 0,
            variance_prior: None,
        }
    }

    /// Four six-hour seasons over a 96-interval day.
    pub fn day() -> Self {
        Self::seasonal("day", vec![24; 4])
    }

    /// Three 32-interval meal seasons over a 96-interval day.
    pub fn meal() -> Self {
        Self::seasonal("meal", vec![32; 3])
    }

    /// Active and sleep seasons of 48 and 24 intervals.
    pub fn circadian() -> Self {
        Self::seasonal("circadian", vec![48, 24])
    }

    pub fn regression(columns: Vec<String>) -> Self {
        ComponentSpec::Regression {
            columns,
            slab: SlabSettings::default(),
        }
    }

    pub fn seasonal_name(&self) -> Option<&str> {
        match self {
            ComponentSpec::Seasonal { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ComponentSpec::SemiLocalTrend {
                level_prior,
                slope_prior,
                d_prior,
                phi_prior,
            } => {
                if let Some(p) = level_prior {
                    p.validate("level variance")?;
                }
                if let Some(p) = slope_prior {
                    p.validate("slope variance")?;
                }
                if let Some(p) = d_prior {
                    p.validate("D")?;
                }
                if let Some(p) = phi_prior {
                    p.validate("phi")?;
                    if p.mean.abs() >= 1.0 {
                        return Err(Error::Spec("phi prior mean must lie in (-1, 1)".into()));
                    }
                }
                Ok(())
            }
            ComponentSpec::Seasonal {
                name,
                n_seasons,
                durations,
                variance_prior,
                ..
            } => {
                if *n_seasons < 2 {
                    return Err(Error::Spec(format!("seasonal {name} needs at least 2 seasons")));
                }
                if durations.len() != *n_seasons {
                    return Err(Error::Spec(format!(
                        "seasonal {name} has {} durations for {n_seasons} seasons; the schedule must tile the cycle",
                        durations.len()
                    )));
                }
                if durations.iter().any(|&d| d == 0) {
                    return Err(Error::Spec(format!("seasonal {name} has a zero duration")));
                }
                if let Some(p) = variance_prior {
                    p.validate(name)?;
                }
                Ok(())
            }
            ComponentSpec::Regression { slab, .. } => slab.validate(),
        }
    }
}

/// Trend plus day, meal and circadian seasonals.
pub fn default_components() -> Vec<ComponentSpec> {
    vec![
        ComponentSpec::semi_local_trend(),
        ComponentSpec::day(),
        ComponentSpec::meal(),
        ComponentSpec::circadian(),
    ]
}

/// Model-wide prior settings used to derive unset component priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<InvGammaPrior>,
    /// Prior sample size as a fraction of the series length.
    pub sample_size_fraction: f64,
    /// State innovation sd guess as a fraction of sd(y).
    pub state_sd_fraction: f64,
    /// Observation noise sd guess as a fraction of sd(y).
    pub observation_sd_fraction: f64,
    /// Prior sd of the trend coefficient φ (mean 0, truncated to (-1, 1)).
    pub phi_sd: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            observation: None,
            sample_size_fraction: 0.01,
            state_sd_fraction: 0.01,
            observation_sd_fraction: 0.1,
            phi_sd: 0.5,
        }
    }
}

impl PriorSettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.observation {
            p.validate("observation variance")?;
        }
        for (name, v) in [
            ("sample_size_fraction", self.sample_size_fraction),
            ("state_sd_fraction", self.state_sd_fraction),
            ("observation_sd_fraction", self.observation_sd_fraction),
            ("phi_sd", self.phi_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_BURN: usize = 200;
pub const DEFAULT_MAX_HORIZON: usize = 96;

/// Component configuration document `{components, priors, draws, burn, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BstsConfig {
    pub components: Vec<ComponentSpec>,
    pub priors: PriorSettings,
    pub draws: usize,
    pub burn: usize,
    pub seed: u64,
    pub max_horizon: usize,
}

impl Default for BstsConfig {
    fn default() -> Self {
        BstsConfig {
            components: default_components(),
            priors: PriorSettings::default(),
            draws: DEFAULT_DRAWS,
            burn: DEFAULT_BURN,
            seed: 0,
            max_horizon: DEFAULT_MAX_HORIZON,
        }
    }
}

impl BstsConfig {
    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            c.validate()?;
        }
        self.priors.validate()?;
        if self.draws <= self.burn {
            return Err(Error::Config(format!(
                "draws ({}) must exceed burn ({})",
                self.draws, self.burn
            )));
        }
        if self.max_horizon == 0 {
            return Err(Error::Config("max_horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BstsConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Drops the named seasonal component, returning whether it was present.
    pub fn remove_seasonal(&mut self, name: &str) -> bool {
        let before = self.components.len();
        self.components.retain(|c| c.seasonal_name() != Some(name));
        before != self.components.len()
    }
}
