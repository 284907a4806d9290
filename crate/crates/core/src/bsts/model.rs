use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bsts::spec::{
    ComponentSpec, GaussianPrior, InvGammaPrior, PriorSettings, SlabSettings, DEFAULT_MAX_HORIZON,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{mean, sample_sd, Real};

/// Index of the level in the state vector.
pub const LEVEL: usize = 0;
/// Index of the slope in the state vector.
pub const SLOPE: usize = 1;

/// Seasonal component whose state moves only at season boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBlock {
    pub name: String,
    pub durations: Vec<usize>,
    pub offset: usize,
    /// First state index of the block.
    pub state_start: usize,
    boundaries: Vec<bool>,
    seasons: Vec<usize>,
}

impl SeasonalBlock {
    fn new(name: String, durations: Vec<usize>, offset: usize, state_start: usize) -> Self {
        let mut boundaries = Vec::new();
        let mut seasons = Vec::new();
        for (s, &d) in durations.iter().enumerate() {
            for k in 0..d {
                boundaries.push(k == 0);
                seasons.push(s);
            }
        }
        SeasonalBlock {
            name,
            durations,
            offset,
            state_start,
            boundaries,
            seasons,
        }
    }

    pub fn n_seasons(&self) -> usize {
        self.durations.len()
    }

    /// State dimension, one less than the number of seasons.
    pub fn dim(&self) -> usize {
        self.durations.len() - 1
    }

    pub fn cycle(&self) -> usize {
        self.boundaries.len()
    }

    pub fn position(&self, abs_t: usize) -> usize {
        (abs_t + self.offset) % self.cycle()
    }

    /// Whether a new season starts at absolute interval `abs_t`.
    pub fn is_boundary(&self, abs_t: usize) -> bool {
        self.boundaries[self.position(abs_t)]
    }

    pub fn season_at(&self, abs_t: usize) -> usize {
        self.seasons[self.position(abs_t)]
    }
}

/// Fully resolved priors of an assembled model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPriors {
    pub observation: InvGammaPrior,
    pub level: InvGammaPrior,
    pub slope: InvGammaPrior,
    pub seasonal: Vec<InvGammaPrior>,
    pub d: GaussianPrior,
    pub phi: GaussianPrior,
}

/// Parameter point of the state-space model. Variances, not sds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub obs_var: T,
    pub level_var: T,
    pub slope_var: T,
    pub seasonal_var: Vec<T>,
    pub d: T,
    pub phi: T,
    pub beta: Vec<T>,
}

impl<T: Real> Params<T> {
    /// Every variance zero, `D = 0`, `φ = phi`, no regression effect.
    pub fn noiseless(model: &StateSpaceModel<T>, phi: T) -> Self {
        Params {
            obs_var: T::zero(),
            level_var: T::zero(),
            slope_var: T::zero(),
            seasonal_var: vec![T::zero(); model.seasonals.len()],
            d: T::zero(),
            phi,
            beta: vec![T::zero(); model.n_regressors()],
        }
    }

    /// Starting point for MCMC: prior guesses, prior means, zero coefficients.
    pub fn from_priors(model: &StateSpaceModel<T>) -> Self {
        let g = |p: &InvGammaPrior| T::lit(p.scale / p.shape);
        let pr = &model.priors;
        Params {
            obs_var: g(&pr.observation),
            level_var: g(&pr.level),
            slope_var: g(&pr.slope),
            seasonal_var: pr.seasonal.iter().map(g).collect(),
            d: T::lit(pr.d.mean),
            phi: T::lit(pr.phi.mean.clamp(-0.99, 0.99)),
            beta: vec![T::zero(); model.n_regressors()],
        }
    }

    pub fn validate(&self, model: &StateSpaceModel<T>) -> Result<()> {
        let vars = [self.obs_var, self.level_var, self.slope_var];
        if vars.iter().chain(&self.seasonal_var).any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Domain("variances must be finite and non-negative".into()));
        }
        if self.seasonal_var.len() != model.seasonals.len() || self.beta.len() != model.n_regressors() {
            return Err(Error::Shape("parameter dimensions do not match the model".into()));
        }
        if !self.phi.is_finite() || !self.d.is_finite() || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("trend and regression parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Assembled trend + seasonal + regression state space.
///
/// State layout: `[level, slope, seasonal blocks...]`. Each seasonal block
/// holds the current season effect followed by the preceding ones. The
/// regression term enters the observation equation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel<T> {
    /// Clock phase (intervals since midnight) of the first observation.
    pub start_phase: usize,
    pub seasonals: Vec<SeasonalBlock>,
    /// Design rows aligned with the series; zero columns without regression.
    pub x: Matrix<T>,
    pub x_names: Vec<String>,
    pub slab: Option<SlabSettings>,
    pub init_mean: Vec<T>,
    /// Diagonal of the initial state covariance.
    pub init_var: Vec<T>,
    pub priors: ModelPriors,
    pub max_horizon: usize,
}

fn floored_sd(xs: &[f64], floor: f64) -> f64 {
    let sd = sample_sd(xs);
    if sd.is_finite() && sd > floor {
        sd
    } else {
        floor
    }
}

/// Builds the state space for `y` (non-finite values are missing) and design `x`.
pub fn assemble_model<T: Real>(
    components: &[ComponentSpec],
    priors: &PriorSettings,
    y: &[T],
    x: Matrix<T>,
    start_phase: usize,
) -> Result<StateSpaceModel<T>> {
    priors.validate()?;
    for c in components {
        c.validate()?;
    }
    let observed: Vec<f64> = y.iter().map(|v| v.as_f64()).filter(|v| v.is_finite()).collect();
    if observed.len() < 2 {
        return Err(Error::Capacity("the series needs at least 2 observed values".into()));
    }

    let n = y.len() as f64;
    let level_y = mean(&observed);
    let sd_y = floored_sd(&observed, 1e-2 * level_y.abs().max(1.0));
    let diffs: Vec<f64> = y
        .windows(2)
        .map(|w| (w[1] - w[0]).as_f64())
        .filter(|d| d.is_finite())
        .collect();
    let mean_dy = if diffs.is_empty() { 0.0 } else { mean(&diffs) };
    let sd_dy = floored_sd(&diffs, 1e-2 * sd_y);
    let first = y.iter().copied().find(|v| v.is_finite()).map_or(level_y, |v| v.as_f64());

    let ss = priors.sample_size_fraction * n;
    let state_guess = (priors.state_sd_fraction * sd_y).powi(2);
    let obs_guess = (priors.observation_sd_fraction * sd_y).powi(2);
    let default_state = InvGammaPrior::from_guess(ss, state_guess);

    let mut trend = None;
    let mut seasonals = Vec::new();
    let mut seasonal_priors = Vec::new();
    let mut regression = None;
    let mut state_dim = 2;
    for c in components {
        match c {
            ComponentSpec::SemiLocalTrend {
                level_prior,
                slope_prior,
                d_prior,
                phi_prior,
            } => {
                if trend.is_some() {
                    return Err(Error::Spec("only one semi-local trend is allowed".into()));
                }
                trend = Some((
                    level_prior.unwrap_or(default_state),
                    slope_prior.unwrap_or(default_state),
                    d_prior.unwrap_or(GaussianPrior {
                        mean: mean_dy,
                        sd: sd_dy,
                    }),
                    phi_prior.unwrap_or(GaussianPrior {
                        mean: 0.0,
                        sd: priors.phi_sd,
                    }),
                ));
            }
            ComponentSpec::Seasonal {
                name,
                durations,
                offset,
                variance_prior,
                ..
            } => {
                if seasonals.iter().any(|s: &SeasonalBlock| &s.name == name) {
                    return Err(Error::Spec(format!("duplicate seasonal component {name}")));
                }
                let block = SeasonalBlock::new(name.clone(), durations.clone(), *offset, state_dim);
                state_dim += block.dim();
                seasonals.push(block);
                seasonal_priors.push(variance_prior.unwrap_or(default_state));
            }
            ComponentSpec::Regression { columns, slab } => {
                if regression.is_some() {
                    return Err(Error::Spec("only one regression component is allowed".into()));
                }
                regression = Some((columns.clone(), *slab));
            }
        }
    }
    let (level, slope, d, phi) = trend.ok_or_else(|| Error::Spec("a semi-local trend component is required".into()))?;

    let (x_names, slab) = match regression {
        Some((cols, slab)) if !cols.is_empty() => (cols, Some(slab)),
        _ => (Vec::new(), None),
    };
    if x.cols() != x_names.len() {
        return Err(Error::Shape(format!(
            "design has {} columns but the regression component names {}",
            x.cols(),
            x_names.len()
        )));
    }
    if x.cols() > 0 && x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "design has {} rows for a series of length {}",
            x.rows(),
            y.len()
        )));
    }
    let longest = seasonals.iter().map(SeasonalBlock::cycle).max().unwrap_or(0);
    if y.len() < 2 * longest {
        log::warn!("series length {} is below twice the longest seasonal cycle {longest}", y.len());
    }

    let mut init_mean = vec![T::zero(); state_dim];
    init_mean[LEVEL] = T::lit(first);
    let mut init_var = vec![T::lit(sd_y * sd_y); state_dim];
    init_var[SLOPE] = T::lit(sd_dy * sd_dy);

    Ok(StateSpaceModel {
        start_phase,
        seasonals,
        x,
        x_names,
        slab,
        init_mean,
        init_var,
        priors: ModelPriors {
            observation: priors.observation.unwrap_or(InvGammaPrior::from_guess(ss, obs_guess)),
            level,
            slope,
            seasonal: seasonal_priors,
            d,
            phi,
        },
        max_horizon: DEFAULT_MAX_HORIZON,
    })
}

impl<T: Real> StateSpaceModel<T> {
    pub fn state_dim(&self) -> usize {
        2 + self.seasonals.iter().map(SeasonalBlock::dim).sum::<usize>()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.cols()
    }

    /// Same model with a different design (e.g. covering a longer span).
    pub fn with_design(&self, x: Matrix<T>) -> Result<Self> {
        if x.cols() != self.n_regressors() {
            return Err(Error::Shape(format!(
                "design has {} columns, model expects {}",
                x.cols(),
                self.n_regressors()
            )));
        }
        Ok(StateSpaceModel { x, ..self.clone() })
    }

    /// Observation loading `Z`: level plus each block's current season.
    pub fn observation_vector(&self) -> Vec<T> {
        let mut z = vec![T::zero(); self.state_dim()];
        z[LEVEL] = T::one();
        for s in &self.seasonals {
            z[s.state_start] = T::one();
        }
        z
    }

    /// `Z α`.
    pub fn observe(&self, state: &[T]) -> T {
        state[LEVEL] + self.seasonals.iter().map(|s| state[s.state_start]).sum::<T>()
    }

    /// `β' x_t`; zero without regression.
    pub fn regression_effect(&self, beta: &[T], t: usize) -> T {
        if beta.is_empty() {
            T::zero()
        } else {
            self.x.row(t).iter().zip(beta).map(|(&a, &b)| a * b).sum()
        }
    }

    /// Applies the linear part of the transition from `t` to `t + 1` in place.
    pub fn apply_transition(&self, t: usize, phi: T, state: &mut [T]) {
        state[LEVEL] += state[SLOPE];
        state[SLOPE] *= phi;
        let abs_next = self.start_phase + t + 1;
        for s in &self.seasonals {
            if s.is_boundary(abs_next) {
                let block = &mut state[s.state_start..s.state_start + s.dim()];
                let sum: T = block.iter().copied().sum();
                block.rotate_right(1);
                block[0] = -sum;
            }
        }
    }

    /// Constant part of the transition, `(0, (1 - φ)D, 0, ...)`.
    pub fn add_intercept(&self, params: &Params<T>, state: &mut [T]) {
        state[SLOPE] += (T::one() - params.phi) * params.d;
    }

    /// Diagonal state-noise variances for the step from `t` to `t + 1`.
    pub fn noise_var(&self, t: usize, params: &Params<T>) -> Vec<T> {
        let mut q = vec![T::zero(); self.state_dim()];
        q[LEVEL] = params.level_var;
        q[SLOPE] = params.slope_var;
        let abs_next = self.start_phase + t + 1;
        for (s, &v) in self.seasonals.iter().zip(&params.seasonal_var) {
            if s.is_boundary(abs_next) {
                q[s.state_start] = v;
            }
        }
        q
    }

    /// Dense transition matrix `T_t`.
    pub fn transition_matrix(&self, t: usize, phi: T) -> Matrix<T> {
        let m = self.state_dim();
        let mut out = Matrix::zeros(m, m);
        for j in 0..m {
            let mut e = vec![T::zero(); m];
            e[j] = T::one();
            self.apply_transition(t, phi, &mut e);
            for i in 0..m {
                out[(i, j)] = e[i];
            }
        }
        out
    }

    /// `T_t P T_t' + Q_t`.
    pub fn propagate_cov(&self, t: usize, params: &Params<T>, p: &Matrix<T>) -> Matrix<T> {
        let m = self.state_dim();
        // columns of T P, stored as rows of (T P)'
        let mut tp_t = Matrix::zeros(m, m);
        let mut col = vec![T::zero(); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = p[(i, j)];
            }
            self.apply_transition(t, params.phi, &mut col);
            for i in 0..m {
                tp_t[(j, i)] = col[i];
            }
        }
        // T (T P)' = T P' T' = T P T'
        let mut out = Matrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                col[i] = tp_t[(i, j)];
            }
            self.apply_transition(t, params.phi, &mut col);
            for i in 0..m {
                out[(i, j)] = col[i];
            }
        }
        out.symmetrize();
        for (i, q) in self.noise_var(t, params).into_iter().enumerate() {
            out[(i, i)] += q;
        }
        out
    }

    /// Draws an initial state, states and observations for `n` steps.
    pub fn simulate<R: Rng + ?Sized>(&self, params: &Params<T>, n: usize, rng: &mut R) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        params.validate(self)?;
        if self.n_regressors() > 0 && n > self.x.rows() {
            return Err(Error::Shape(format!("design covers {} rows, {n} requested", self.x.rows())));
        }
        let mut normal = || T::lit(rng.sample::<f64, _>(StandardNormal));
        let mut state: Vec<T> = self
            .init_mean
            .iter()
            .zip(&self.init_var)
            .map(|(&m, &v)| m + v.sqrt() * normal())
            .collect();
        let mut ys = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for t in 0..n {
            ys.push(self.observe(&state) + self.regression_effect(&params.beta, t) + params.obs_var.sqrt() * normal());
            states.push(state.clone());
            let q = self.noise_var(t, params);
            self.apply_transition(t, params.phi, &mut state);
            self.add_intercept(params, &mut state);
            for (s, v) in state.iter_mut().zip(q) {
                *s += v.sqrt() * normal();
            }
        }
        Ok((ys, states))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsts::spec::default_components;

    fn model(components: &[ComponentSpec]) -> StateSpaceModel<f64> {
        let y: Vec<f64> = (0..200).map(|i| 100.0 + (i % 7) as f64).collect();
        assemble_model(components, &PriorSettings::default(), &y, Matrix::zeros(0, 0), 0).unwrap()
    }

    #[test]
    fn default_layout() {
        let m = model(&default_components());
        assert_eq!(m.state_dim(), 2 + 3 + 2 + 1);
        let cycles: Vec<usize> = m.seasonals.iter().map(SeasonalBlock::cycle).collect();
        assert_eq!(cycles, vec![96, 96, 72]);
        assert_eq!(m.seasonals[0].dim(), 3);
    }

    #[test]
    fn seasonal_sign_convention() {
        let m = model(&[ComponentSpec::semi_local_trend(), ComponentSpec::seasonal("s", vec![1; 4])]);
        let mut state = vec![0.0, 0.0, 1.0, -1.0, 2.0];
        m.apply_transition(0, 0.0, &mut state);
        assert_eq!(&state[2..], &[-2.0, 1.0, -1.0]);
    }

    #[test]
    fn seasonal_moves_only_at_boundaries() {
        let m = model(&[ComponentSpec::semi_local_trend(), ComponentSpec::seasonal("s", vec![2, 3])]);
        let mut state = vec![0.0, 0.0, 5.0];
        let mut effects = vec![];
        for t in 0..10 {
            effects.push(state[2]);
            m.apply_transition(t, 0.0, &mut state);
        }
        assert_eq!(effects, vec![5., 5., -5., -5., -5., 5., 5., -5., -5., -5.]);
    }

    #[test]
    fn dense_transition_matches_operator() {
        let m = model(&default_components());
        let params = Params::from_priors(&m);
        let p = Matrix::from_diag(&(1..=m.state_dim()).map(|i| i as f64).collect::<Vec<_>>());
        for t in [0, 23, 31, 47, 95] {
            let tm = m.transition_matrix(t, 0.3);
            let direct = tm.matmul(&p).matmul(&tm.transpose()).add(&Matrix::from_diag(&m.noise_var(t, &params)));
            let fast = m.propagate_cov(t, &Params { phi: 0.3, ..params.clone() }, &p);
            for i in 0..m.state_dim() {
                for j in 0..m.state_dim() {
                    assert!((direct[(i, j)] - fast[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let y = vec![1.0, 2.0, 3.0];
        let comps = vec![ComponentSpec::semi_local_trend(), ComponentSpec::regression(vec!["a".into()])];
        let x = Matrix::zeros(2, 1);
        assert!(matches!(
            assemble_model(&comps, &PriorSettings::default(), &y, x, 0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            assemble_model(&comps[1..], &PriorSettings::default(), &y, Matrix::zeros(3, 1), 0),
            Err(Error::Spec(_))
        ));
    }
}
