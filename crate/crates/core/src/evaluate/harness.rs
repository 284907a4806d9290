use serde::{Deserialize, Serialize};

use crate::bsts::{
    assemble_model, default_components, mcmc_fit, rolling_forecast, BstsConfig, ComponentSpec, Params, PosteriorDraws,
    PriorSettings, RollingForecast, StateSpaceModel, DEFAULT_BURN, DEFAULT_DRAWS,
};
use crate::error::{Error, Result};
use crate::evaluate::metrics::{compute_metrics_with, glycemic_confusion, Confusion, MapeDenominator, Thresholds};
use crate::linalg::Matrix;
use crate::pipeline::{design_matrix, EvalSubject};
use crate::similarity::DEFAULT_M;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split_ratio: f64,
    pub validation_fraction_of_train: f64,
    /// Sliding-window length in intervals.
    pub window: usize,
    pub horizons: Vec<usize>,
    pub thresholds: Thresholds,
    pub mape_denominator: MapeDenominator,
    pub draws: usize,
    pub burn: usize,
    pub seed: u64,
    /// Number of similar subjects.
    pub m: usize,
    pub components: Vec<ComponentSpec>,
    pub priors: PriorSettings,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split_ratio: 0.8,
            validation_fraction_of_train: 0.2,
            window: 8,
            horizons: vec![1, 2, 3, 4],
            thresholds: Thresholds::default(),
            mape_denominator: MapeDenominator::Forecast,
            draws: DEFAULT_DRAWS,
            burn: DEFAULT_BURN,
            seed: 0,
            m: DEFAULT_M,
            components: default_components(),
            priors: PriorSettings::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio {} outside (0, 1)", self.split_ratio)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction_of_train) {
            return Err(Error::Config("validation_fraction_of_train must lie in [0, 1)".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be nonempty and all at least 1".into()));
        }
        self.thresholds.validate()?;
        self.bsts().validate()
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }

    pub fn bsts(&self) -> BstsConfig {
        BstsConfig {
            components: self.components.clone(),
            priors: self.priors.clone(),
            draws: self.draws,
            burn: self.burn,
            seed: self.seed,
            max_horizon: self.max_horizon().max(1),
        }
    }

    /// Chronological split of a series of length `n`.
    pub fn split(&self, n: usize) -> Split {
        let train = ((n as f64) * self.split_ratio).round() as usize;
        let validation = ((train as f64) * self.validation_fraction_of_train).round() as usize;
        Split {
            len: n,
            fit: train - validation,
            train,
        }
    }

    /// [`EvalConfig::split`], or a capacity error naming `id` when the
    /// series is too short for the protocol.
    pub fn checked_split(&self, id: &str, n: usize) -> Result<Split> {
        let split = self.split(n);
        if split.check(self).is_err() {
            return Err(Error::Capacity(format!(
                "series {id} has {n} points; the protocol needs at least {}",
                self.min_length()
            )));
        }
        Ok(split)
    }

    /// Shortest series the protocol accepts.
    pub fn min_length(&self) -> usize {
        (1..).find(|&n| self.split(n).check(self).is_ok()).expect("some length satisfies the split")
    }
}

/// Segment boundaries: fit `[0, fit)`, validation `[fit, train)`, test `[train, len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub len: usize,
    pub fit: usize,
    pub train: usize,
}

impl Split {
    pub fn test_len(&self) -> usize {
        self.len - self.train
    }

    fn check(&self, cfg: &EvalConfig) -> std::result::Result<(), ()> {
        let ok = self.fit >= cfg.window.max(2) && self.train < self.len && self.test_len() >= cfg.max_horizon();
        if ok {
            Ok(())
        } else {
            Err(())
        }
    }

    /// Forecast origins: every `t` whose targets `t + 1..=t + H` lie in the
    /// test segment. Their count is `test_len − H + 1`.
    pub fn anchors(&self, max_horizon: usize) -> Vec<usize> {
        (self.train - 1..=self.len - 1 - max_horizon).collect()
    }
}

/// Something that fits on a prefix and forecasts from many origins.
pub trait Forecaster: Send + Sync {
    /// Fits on the first `fit_len` points and forecasts `1..=max_horizon`
    /// steps ahead of each anchor, using the data up to the anchor.
    fn rolling(
        &self,
        subject: &EvalSubject,
        fit_len: usize,
        anchors: &[usize],
        max_horizon: usize,
        seed: u64,
    ) -> Result<RollingForecast<f64>>;
}

/// BSTS fitted by MCMC on the fit segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BstsForecaster {
    pub config: BstsConfig,
}

/// A fitted model, its posterior draws and the full-length design.
#[derive(Clone, Debug)]
pub struct FittedBsts {
    pub model: StateSpaceModel<f64>,
    pub draws: PosteriorDraws<f64>,
}

/// Splits a base seed into independent child seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl BstsForecaster {
    pub fn new(config: BstsConfig) -> Self {
        BstsForecaster { config }
    }

    /// Components for `subject`: the configured ones, with a regression on
    /// the similar-subject design when there is one.
    fn components(&self, names: &[String]) -> Vec<ComponentSpec> {
        let mut comps: Vec<ComponentSpec> = self
            .config
            .components
            .iter()
            .filter(|c| !matches!(c, ComponentSpec::Regression { .. }))
            .cloned()
            .collect();
        if !names.is_empty() {
            let slab = self.config.components.iter().find_map(|c| match c {
                ComponentSpec::Regression { slab, .. } => Some(*slab),
                _ => None,
            });
            comps.push(ComponentSpec::Regression {
                columns: names.to_vec(),
                slab: slab.unwrap_or_default(),
            });
        }
        comps
    }

    /// Model on the first `fit_len` points plus the design for `n_rows` points.
    fn prepare(&self, subject: &EvalSubject, fit_len: usize, n_rows: usize) -> Result<(StateSpaceModel<f64>, Option<Matrix<f64>>)> {
        let series = &subject.target.series;
        if fit_len > series.len() || fit_len > n_rows {
            return Err(Error::Range(format!("fit length {fit_len} exceeds the series")));
        }
        let (x, names) = design_matrix(subject, n_rows, fit_len);
        let rows: Vec<usize> = (0..fit_len).collect();
        let cols: Vec<usize> = (0..x.cols()).collect();
        let x_fit = if names.is_empty() { Matrix::zeros(0, 0) } else { x.select(&rows, &cols) };
        let y_fit = &series.cgm[..fit_len];
        let mut model = assemble_model(&self.components(&names), &self.config.priors, y_fit, x_fit, series.start_phase())?;
        model.max_horizon = self.config.max_horizon;
        Ok((model, (!names.is_empty()).then_some(x)))
    }

    /// Fits on the first `fit_len` points; the returned model carries the
    /// design for `n_rows` points.
    pub fn fit(&self, subject: &EvalSubject, fit_len: usize, n_rows: usize, seed: u64) -> Result<FittedBsts> {
        let (mut model, x) = self.prepare(subject, fit_len, n_rows)?;
        let draws = mcmc_fit(&model, &subject.target.series.cgm[..fit_len], self.config.draws, self.config.burn, seed)?;
        if let Some(x) = x {
            model = model.with_design(x)?;
        }
        Ok(FittedBsts { model, draws })
    }
}

fn rows_needed(fit_len: usize, anchors: &[usize], max_horizon: usize) -> usize {
    anchors.last().map_or(fit_len, |&a| a + max_horizon + 1).max(fit_len)
}

impl Forecaster for BstsForecaster {
    fn rolling(
        &self,
        subject: &EvalSubject,
        fit_len: usize,
        anchors: &[usize],
        max_horizon: usize,
        seed: u64,
    ) -> Result<RollingForecast<f64>> {
        let n_rows = rows_needed(fit_len, anchors, max_horizon);
        let fitted = self.fit(subject, fit_len, n_rows, derive_seed(seed, 1))?;
        rolling_forecast(
            &fitted.draws,
            &fitted.model,
            &subject.target.series.cgm,
            anchors,
            max_horizon,
            derive_seed(seed, 2),
        )
    }
}

/// The same model with every variance and coefficient fixed at zero and
/// no MCMC. At each anchor the filter sees only the last `window`
/// observations, so the forecast is the deterministic extrapolation of the
/// state those observations determine; with a trend alone and `window = 2`
/// it is the line through the last two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiselessForecaster {
    pub config: BstsConfig,
    /// Slope AR coefficient.
    pub phi: f64,
    pub window: usize,
}

impl Forecaster for NoiselessForecaster {
    fn rolling(
        &self,
        subject: &EvalSubject,
        fit_len: usize,
        anchors: &[usize],
        max_horizon: usize,
        seed: u64,
    ) -> Result<RollingForecast<f64>> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        let n_rows = rows_needed(fit_len, anchors, max_horizon);
        let inner = BstsForecaster::new(self.config.clone());
        let (mut model, x) = inner.prepare(subject, fit_len, n_rows)?;
        if let Some(x) = x {
            model = model.with_design(x)?;
        }
        let params = Params::noiseless(&model, self.phi);
        let draws = PosteriorDraws::fixed(&model, params, model.init_mean.clone(), fit_len)?;
        let y = &subject.target.series.cgm;
        let mut out = RollingForecast {
            anchors: anchors.to_vec(),
            max_horizon,
            mean: Vec::with_capacity(anchors.len()),
            lower95: Vec::with_capacity(anchors.len()),
            upper95: Vec::with_capacity(anchors.len()),
        };
        for &t in anchors {
            let start = (t + 1).saturating_sub(self.window);
            let masked: Vec<f64> = y.iter().enumerate().map(|(i, &v)| if i < start { f64::NAN } else { v }).collect();
            let mut f = rolling_forecast(&draws, &model, &masked, &[t], max_horizon, derive_seed(seed, 2))?;
            out.mean.append(&mut f.mean);
            out.lower95.append(&mut f.lower95);
            out.upper95.append(&mut f.upper95);
        }
        Ok(out)
    }
}

/// Scores of one horizon on one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    /// Steps of 15 minutes.
    pub horizon: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub n: usize,
    pub forecast_min: f64,
    pub forecast_max: f64,
    pub actual_min: f64,
    pub actual_max: f64,
    /// Share of targets inside the 95% interval, percent.
    pub coverage95: f64,
    pub confusion: Confusion,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub subject_id: String,
    pub split: Split,
    pub anchors: usize,
    pub horizons: Vec<HorizonMetrics>,
}

impl MetricsReport {
    pub fn horizon(&self, h: usize) -> Option<&HorizonMetrics> {
        self.horizons.iter().find(|m| m.horizon == h)
    }
}

/// Scores rolling forecasts of `y` at each configured horizon.
pub fn score_rolling(
    subject_id: &str,
    y: &[f64],
    split: Split,
    forecast: &RollingForecast<f64>,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    let mut horizons = Vec::with_capacity(cfg.horizons.len());
    for &h in &cfg.horizons {
        if h > forecast.max_horizon {
            return Err(Error::Range(format!("horizon {h} was not forecast")));
        }
        let mut actual = Vec::with_capacity(forecast.anchors.len());
        let mut pred = Vec::with_capacity(forecast.anchors.len());
        let mut inside = 0usize;
        for (k, &t) in forecast.anchors.iter().enumerate() {
            let target = y[t + h];
            if !target.is_finite() {
                continue;
            }
            actual.push(target);
            pred.push(forecast.mean[k][h - 1]);
            if forecast.lower95[k][h - 1] <= target && target <= forecast.upper95[k][h - 1] {
                inside += 1;
            }
        }
        let m = compute_metrics_with(&actual, &pred, cfg.mape_denominator)?;
        let confusion = glycemic_confusion(&actual, &pred, &cfg.thresholds)?;
        let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
        horizons.push(HorizonMetrics {
            horizon: h,
            mae: m.mae,
            rmse: m.rmse,
            mape: m.mape,
            n: actual.len(),
            forecast_min: fold(&pred, f64::min, f64::INFINITY),
            forecast_max: fold(&pred, f64::max, f64::NEG_INFINITY),
            actual_min: fold(&actual, f64::min, f64::INFINITY),
            actual_max: fold(&actual, f64::max, f64::NEG_INFINITY),
            coverage95: 100.0 * inside as f64 / actual.len() as f64,
            accuracy: confusion.accuracy(),
            confusion,
        });
    }
    Ok(MetricsReport {
        subject_id: subject_id.to_string(),
        split,
        anchors: forecast.anchors.len(),
        horizons,
    })
}

/// Chronological split, one fit on the fit segment, growing-window
/// forecasts from every test anchor, metrics per horizon.
pub fn sliding_window_eval(
    forecaster: &dyn Forecaster,
    subject: &EvalSubject,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let y = &subject.target.series.cgm;
    let split = cfg.checked_split(subject.subject_id(), y.len())?;
    let h = cfg.max_horizon();
    let anchors = split.anchors(h);
    let forecast = forecaster.rolling(subject, split.fit, &anchors, h, seed)?;
    score_rolling(subject.subject_id(), y, split, &forecast, cfg)
}
