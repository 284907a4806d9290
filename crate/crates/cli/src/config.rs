use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glycast::evaluate::{EvalConfig, Removal};
use glycast::pipeline::LearnSettings;
use glycast::synth::SynthConfig;
use serde::{Deserialize, Serialize};

/// Input and output locations. Relative paths resolve against the
/// directory holding the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Dataset directory; defaults to `<out>/data`.
    pub data: Option<PathBuf>,
    /// Output root; defaults to `out` beside the config file.
    pub out: Option<PathBuf>,
    /// Encoded CSV to learn from instead of the dataset directory.
    pub encoded: Option<PathBuf>,
    /// Variable sidecar JSON of `encoded`.
    pub sidecar: Option<PathBuf>,
    /// Fitted network (`model.json` of a learn run) reused by later stages.
    pub model: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    pub n_bins: usize,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings { n_bins: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    /// Prediction horizon in minutes: 15, 30, 45 or 60.
    pub horizon_minutes: u32,
    /// Skip MCMC and forecast with every variance fixed at zero.
    pub noiseless: bool,
    /// Slope AR coefficient of the noiseless forecaster.
    pub phi: f64,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        ForecastSettings {
            horizon_minutes: 15,
            noiseless: false,
            phi: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSettings {
    pub removals: Vec<String>,
}

impl Default for AblateSettings {
    fn default() -> Self {
        AblateSettings {
            removals: Removal::ALL.iter().map(|r| r.as_str().to_string()).collect(),
        }
    }
}

/// One run's configuration: the shared `{seed, paths}` preamble plus a
/// section per stage. Every command reads the sections it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    /// Restricts forecast, evaluate and ablate to these subject ids.
    pub subjects: Option<Vec<String>>,
    pub synth: SynthConfig,
    pub preprocess: PreprocessSettings,
    pub learn: LearnSettings,
    pub eval: EvalConfig,
    pub forecast: ForecastSettings,
    pub ablate: AblateSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub horizon_minutes: Option<u32>,
    pub subjects: Option<Vec<String>>,
}

/// Maps a prediction horizon in minutes to grid steps.
pub fn horizon_steps(minutes: u32) -> Result<usize> {
    match minutes {
        15 | 30 | 45 | 60 => Ok(minutes as usize / 15),
        _ => bail!("horizon must be 15, 30, 45 or 60 minutes, got {minutes}"),
    }
}

impl RunConfig {
    /// Reads, overrides, resolves and validates a config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.apply(overrides);
        cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.paths.out = Some(out.clone());
        }
        if let Some(h) = o.horizon_minutes {
            self.forecast.horizon_minutes = h;
        }
        if let Some(s) = &o.subjects {
            self.subjects = Some(s.clone());
        }
        self.synth.seed = self.seed;
        self.learn.bootstrap.seed = self.seed;
        self.eval.seed = self.seed;
    }

    /// Joins every relative path onto `base`; `out` defaults to `base/out`.
    pub fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.data, &mut p.out, &mut p.encoded, &mut p.sidecar, &mut p.model] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        if p.out.is_none() {
            p.out = Some(base.join("out"));
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.eval.validate()?;
        horizon_steps(self.forecast.horizon_minutes)?;
        if self.preprocess.n_bins < 2 {
            bail!("preprocess.n_bins must be at least 2");
        }
        for r in &self.ablate.removals {
            r.parse::<Removal>()?;
        }
        if !(self.learn.alpha > 0.0) {
            bail!("learn.alpha must be positive");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.paths.data.clone().unwrap_or_else(|| self.out_dir().join("data"))
    }
}
