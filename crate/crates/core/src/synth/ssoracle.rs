use rand::Rng;

use crate::bsts::{assemble_model, ComponentSpec, Params, PriorSettings, StateSpaceModel};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Size guards of the dense oracles.
pub const ORACLE_MAX_LEN: usize = 20;
pub const ORACLE_MAX_DIM: usize = 8;
pub const ORACLE_MAX_HORIZON: usize = 20;

/// Moments from exact conditioning of the joint Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianPredictive {
    pub loglik: f64,
    /// `E[y_t | y_<t]` and `Var[y_t | y_<t]` for every `t`.
    pub pred_mean: Vec<f64>,
    pub pred_var: Vec<f64>,
    /// `E[y_{n-1+h} | y]` and its variance for `h = 1..=horizon`.
    pub forecast_mean: Vec<f64>,
    pub forecast_var: Vec<f64>,
    /// `E[α_{n-1} | y]` and `Cov[α_{n-1} | y]`.
    pub terminal_mean: Vec<f64>,
    pub terminal_cov: Matrix<f64>,
}

/// Joint first and second moments of states and observations over `len`
/// steps, built explicitly from the transition products.
struct Joint {
    m: usize,
    state_mean: Vec<Vec<f64>>,
    y_mean: Vec<f64>,
    /// `Φ(t, s) = T_{t-1} ⋯ T_s`, indexed `[t][s]` for `s ≤ t`.
    phi: Vec<Vec<Matrix<f64>>>,
    /// Variance of the independent noise injected at step `s`
    /// (the initial state for `s = 0`).
    noise: Vec<Vec<f64>>,
    z: Vec<f64>,
    obs_var: f64,
}

impl Joint {
    fn build(model: &StateSpaceModel<f64>, params: &Params<f64>, len: usize) -> Result<Self> {
        params.validate(model)?;
        if model.n_regressors() > 0 && model.x.rows() < len {
            return Err(Error::Shape(format!("design covers {} rows, {len} needed", model.x.rows())));
        }
        let m = model.state_dim();
        let mut state_mean = Vec::with_capacity(len);
        let mut a = model.init_mean.clone();
        let mut tmats = Vec::with_capacity(len);
        for t in 0..len {
            state_mean.push(a.clone());
            let tm = model.transition_matrix(t, params.phi);
            let mut next = tm.matvec(&a);
            model.add_intercept(params, &mut next);
            a = next;
            tmats.push(tm);
        }
        let mut phi: Vec<Vec<Matrix<f64>>> = Vec::with_capacity(len);
        for t in 0..len {
            let mut row = Vec::with_capacity(t + 1);
            for s in 0..t {
                row.push(tmats[t - 1].matmul(&phi[t - 1][s]));
            }
            row.push(Matrix::identity(m));
            phi.push(row);
        }
        let mut noise = vec![model.init_var.clone()];
        for s in 1..len {
            noise.push(model.noise_var(s - 1, params));
        }
        let z = model.observation_vector();
        let y_mean = (0..len)
            .map(|t| crate::linalg::dot(&z, &state_mean[t]) + model.regression_effect(&params.beta, t))
            .collect();
        Ok(Joint {
            m,
            state_mean,
            y_mean,
            phi,
            noise,
            z,
            obs_var: params.obs_var,
        })
    }

    /// `Cov(α_t, α_u)`.
    fn state_cov(&self, t: usize, u: usize) -> Matrix<f64> {
        let mut out = Matrix::zeros(self.m, self.m);
        for s in 0..=t.min(u) {
            let left = self.phi[t][s].matmul(&Matrix::from_diag(&self.noise[s]));
            out = out.add(&left.matmul(&self.phi[u][s].transpose()));
        }
        out
    }

    /// `Cov(α_t, y_u)` as a vector.
    fn state_obs_cov(&self, t: usize, u: usize) -> Vec<f64> {
        self.state_cov(t, u).matvec(&self.z)
    }

    fn obs_cov(&self, t: usize, u: usize) -> f64 {
        let c = crate::linalg::dot(&self.z, &self.state_obs_cov(t, u));
        if t == u {
            c + self.obs_var
        } else {
            c
        }
    }
}

fn guard(n: usize, dim: usize, horizon: usize) -> Result<()> {
    if n > ORACLE_MAX_LEN || dim > ORACLE_MAX_DIM || horizon > ORACLE_MAX_HORIZON {
        return Err(Error::Capacity(format!(
            "dense oracle limits: length ≤ {ORACLE_MAX_LEN}, state dimension ≤ {ORACLE_MAX_DIM}, \
             horizon ≤ {ORACLE_MAX_HORIZON}; got {n}, {dim}, {horizon}"
        )));
    }
    Ok(())
}

/// Conditioning set: observed indices that carry information beyond the
/// ones before them (a zero conditional variance adds none).
struct Conditioned {
    idx: Vec<usize>,
    chol: Option<Cholesky<f64>>,
    /// `Σ_II⁻¹ (y_I − μ_I)`.
    weights: Vec<f64>,
}

impl Conditioned {
    fn new(joint: &Joint, y: &[f64], idx: Vec<usize>) -> Result<Self> {
        if idx.is_empty() {
            return Ok(Conditioned {
                idx,
                chol: None,
                weights: Vec::new(),
            });
        }
        let k = idx.len();
        let mut s = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                s[(a, b)] = joint.obs_cov(idx[a], idx[b]);
            }
        }
        let chol = Cholesky::new(&s).ok_or_else(|| Error::Numerical {
            step: idx[k - 1],
            message: "observation covariance is not positive definite".into(),
        })?;
        let resid: Vec<f64> = idx.iter().map(|&i| y[i] - joint.y_mean[i]).collect();
        let weights = chol.solve(&resid);
        Ok(Conditioned {
            idx,
            chol: Some(chol),
            weights,
        })
    }

    /// Conditional mean and covariance of a quantity with prior mean `mu`,
    /// prior covariance `prior` and cross-covariance rows `cross[i] = Cov(·, y_idx[i])`.
    fn condition(&self, mu: &[f64], prior: &Matrix<f64>, cross: &[Vec<f64>]) -> (Vec<f64>, Matrix<f64>) {
        let Some(chol) = &self.chol else {
            return (mu.to_vec(), prior.clone());
        };
        let d = mu.len();
        let mut mean = mu.to_vec();
        for (c, w) in cross.iter().zip(&self.weights) {
            for i in 0..d {
                mean[i] += c[i] * w;
            }
        }
        let mut cov = prior.clone();
        // Σ_xI Σ_II⁻¹ Σ_Ix
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|i| chol.solve(&cross.iter().map(|c| c[i]).collect::<Vec<_>>()))
            .collect();
        for i in 0..d {
            for j in 0..d {
                let s: f64 = cross.iter().zip(&cols[j]).map(|(c, w)| c[i] * w).sum();
                cov[(i, j)] -= s;
            }
        }
        cov.symmetrize();
        (mean, cov)
    }
}

/// Predictive moments of the observation at `t` given the set.
fn predict_obs(joint: &Joint, cond: &Conditioned, t: usize) -> (f64, f64) {
    let cross: Vec<Vec<f64>> = cond.idx.iter().map(|&i| vec![joint.obs_cov(t, i)]).collect();
    let prior = Matrix::from_diag(&[joint.obs_cov(t, t)]);
    let (m, v) = cond.condition(&[joint.y_mean[t]], &prior, &cross);
    (m[0], v[(0, 0)])
}

/// Exact Gaussian conditioning over the stacked states and observations.
///
/// Non-finite `y` entries are missing. An observation whose conditional
/// variance is below `1e-9` of its prior variance is already determined
/// and contributes nothing, so degenerate (noiseless) models are handled.
/// The log-likelihood is the joint density of the informative
/// observations, evaluated with one Cholesky factorization.
pub fn gaussian_predictive_oracle(
    model: &StateSpaceModel<f64>,
    params: &Params<f64>,
    y: &[f64],
    horizon: usize,
) -> Result<GaussianPredictive> {
    let n = y.len();
    guard(n, model.state_dim(), horizon)?;
    if n == 0 {
        return Err(Error::Domain("the series is empty".into()));
    }
    let joint = Joint::build(model, params, n + horizon)?;
    let mut idx = Vec::new();
    let mut pred_mean = Vec::with_capacity(n);
    let mut pred_var = Vec::with_capacity(n);
    for t in 0..n {
        let cond = Conditioned::new(&joint, y, idx.clone())?;
        let (m, v) = predict_obs(&joint, &cond, t);
        pred_mean.push(m);
        pred_var.push(v);
        if y[t].is_finite() && v > 1e-9 * joint.obs_cov(t, t) && v > 0.0 {
            idx.push(t);
        }
    }
    let cond = Conditioned::new(&joint, y, idx)?;
    let loglik = match &cond.chol {
        None => 0.0,
        Some(chol) => {
            let k = cond.idx.len() as f64;
            let quad: f64 = cond
                .idx
                .iter()
                .zip(&cond.weights)
                .map(|(&i, w)| (y[i] - joint.y_mean[i]) * w)
                .sum();
            -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + chol.log_det() + quad)
        }
    };
    let mut forecast_mean = Vec::with_capacity(horizon);
    let mut forecast_var = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let (m, v) = predict_obs(&joint, &cond, n - 1 + h);
        forecast_mean.push(m);
        forecast_var.push(v);
    }
    let last = n - 1;
    let cross: Vec<Vec<f64>> = cond.idx.iter().map(|&i| joint.state_obs_cov(last, i)).collect();
    let (terminal_mean, terminal_cov) = cond.condition(&joint.state_mean[last], &joint.state_cov(last, last), &cross);
    Ok(GaussianPredictive {
        loglik,
        pred_mean,
        pred_var,
        forecast_mean,
        forecast_var,
        terminal_mean,
        terminal_cov,
    })
}

/// Smoothed state moments `E[α_t | y]`, `Cov[α_t | y]` for every `t` by
/// dense conditioning; the reference for backward-sampling draws.
pub fn gaussian_smoother_oracle(
    model: &StateSpaceModel<f64>,
    params: &Params<f64>,
    y: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Matrix<f64>>)> {
    let n = y.len();
    guard(n, model.state_dim(), 0)?;
    let joint = Joint::build(model, params, n)?;
    let mut idx = Vec::new();
    for t in 0..n {
        let cond = Conditioned::new(&joint, y, idx.clone())?;
        let (_, v) = predict_obs(&joint, &cond, t);
        if y[t].is_finite() && v > 1e-9 * joint.obs_cov(t, t) && v > 0.0 {
            idx.push(t);
        }
    }
    let cond = Conditioned::new(&joint, y, idx)?;
    let mut means = Vec::with_capacity(n);
    let mut covs = Vec::with_capacity(n);
    for t in 0..n {
        let cross: Vec<Vec<f64>> = cond.idx.iter().map(|&i| joint.state_obs_cov(t, i)).collect();
        let (m, c) = cond.condition(&joint.state_mean[t], &joint.state_cov(t, t), &cross);
        means.push(m);
        covs.push(c);
    }
    Ok((means, covs))
}

/// A random model instance for filter / oracle comparisons.
#[derive(Clone, Debug)]
pub struct RandomStateSpace {
    pub model: StateSpaceModel<f64>,
    pub params: Params<f64>,
    pub y: Vec<f64>,
}

/// Draws a model with up to two short seasonal blocks (state dimension
/// ≤ `max_dim`), an optional regression, random positive variances, a
/// random phase and series of length `2..=max_len` simulated from it,
/// with occasional missing values.
pub fn random_state_space<R: Rng + ?Sized>(rng: &mut R, max_len: usize, max_dim: usize) -> Result<RandomStateSpace> {
    if max_len < 2 || max_dim < 2 {
        return Err(Error::Domain("need max_len ≥ 2 and max_dim ≥ 2".into()));
    }
    let n = rng.random_range(2..=max_len);
    let mut comps = vec![ComponentSpec::semi_local_trend()];
    let mut dim = 2;
    for k in 0..2 {
        let room = max_dim - dim;
        if room == 0 || !rng.random_bool(0.6) {
            continue;
        }
        let seasons = rng.random_range(2..=(room + 1).min(4));
        let durations: Vec<usize> = (0..seasons).map(|_| rng.random_range(1..=3)).collect();
        let mut c = ComponentSpec::seasonal(&format!("s{k}"), durations);
        if let ComponentSpec::Seasonal { offset, .. } = &mut c {
            *offset = rng.random_range(0..5);
        }
        dim += seasons - 1;
        comps.push(c);
    }
    let n_reg = rng.random_range(0..=2);
    let mut x = Matrix::zeros(n + ORACLE_MAX_HORIZON, n_reg);
    if n_reg > 0 {
        comps.push(ComponentSpec::regression((0..n_reg).map(|j| format!("x{j}")).collect()));
        for i in 0..x.rows() {
            for j in 0..n_reg {
                x[(i, j)] = rng.random_range(-2.0..2.0);
            }
        }
    }
    let placeholder: Vec<f64> = (0..n).map(|i| 100.0 + i as f64).collect();
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (0..n_reg).collect();
    let x_fit = if n_reg > 0 { x.select(&rows, &cols) } else { Matrix::zeros(0, 0) };
    let mut model = assemble_model(&comps, &PriorSettings::default(), &placeholder, x_fit, rng.random_range(0..96))?;
    if n_reg > 0 {
        model = model.with_design(x)?;
    }
    for (i, v) in model.init_var.iter_mut().enumerate() {
        *v = rng.random_range(0.1..4.0) * if i == 0 { 25.0 } else { 1.0 };
    }
    model.init_mean[0] = rng.random_range(50.0..200.0);
    let params = Params {
        obs_var: rng.random_range(0.05..4.0),
        level_var: rng.random_range(0.01..2.0),
        slope_var: rng.random_range(0.001..0.5),
        seasonal_var: (0..model.seasonals.len()).map(|_| rng.random_range(0.01..1.0)).collect(),
        d: rng.random_range(-1.0..1.0),
        phi: rng.random_range(-0.95..0.95),
        beta: (0..n_reg).map(|_| rng.random_range(-3.0..3.0)).collect(),
    };
    let (mut y, _) = model.simulate(&params, n, rng)?;
    for v in y.iter_mut().skip(1) {
        if rng.random_bool(0.1) {
            *v = f64::NAN;
        }
    }
    Ok(RandomStateSpace { model, params, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_trend_is_deterministic() {
        let y = vec![100.0, 102.0, 104.0, 106.0];
        let base = assemble_model(&[ComponentSpec::semi_local_trend()], &PriorSettings::default(), &y, Matrix::zeros(0, 0), 0)
            .unwrap();
        let params = Params::noiseless(&base, 1.0);
        let out = gaussian_predictive_oracle(&base, &params, &y, 3).unwrap();
        for (a, b) in out.pred_mean[2..].iter().zip(&y[2..]) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (h, f) in out.forecast_mean.iter().enumerate() {
            assert!((f - (106.0 + 2.0 * (h + 1) as f64)).abs() < 1e-6);
        }
        let zero = gaussian_predictive_oracle(&base, &params, &y, 0).unwrap();
        assert!(zero.forecast_mean.is_empty());
        assert!((zero.terminal_mean[0] - 106.0).abs() < 1e-6);
    }

    #[test]
    fn size_guard() {
        let y: Vec<f64> = (0..21).map(f64::from).collect();
        let m = assemble_model(&[ComponentSpec::semi_local_trend()], &PriorSettings::default(), &y, Matrix::zeros(0, 0), 0)
            .unwrap();
        let p = Params::from_priors(&m);
        assert!(matches!(gaussian_predictive_oracle(&m, &p, &y, 1), Err(Error::Capacity(_))));
    }
}
