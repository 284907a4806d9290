use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::bsts::spec::{InvGammaPrior, SlabSettings};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;

/// Settings of one spike-and-slab sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionSettings {
    pub slab: SlabSettings,
    /// Prior on the observation variance, shared by the slab scale.
    pub obs_prior: InvGammaPrior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDraw<T> {
    pub gamma: Vec<bool>,
    /// Exactly zero wherever `gamma` is false.
    pub beta: Vec<T>,
    pub obs_var: T,
}

/// Draws from an inverse-gamma distribution with the given shape and scale.
pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("valid inverse-gamma parameters");
    (1.0 / g.sample(rng)).max(f64::MIN_POSITIVE)
}

/// Sufficient statistics of the regression on the observed rows.
struct Suff {
    n: usize,
    xtx: Matrix<f64>,
    xty: Vec<f64>,
    yty: f64,
    /// Slab precision before scaling by the observation variance.
    lambda: Matrix<f64>,
}

impl Suff {
    fn new<T: Real>(resid: &[T], x: &Matrix<T>, w: f64) -> Self {
        let j = x.cols();
        let mut xtx = Matrix::zeros(j, j);
        let mut xty = vec![0.0; j];
        let mut yty = 0.0;
        let mut n = 0;
        for (t, &r) in resid.iter().enumerate() {
            let r = r.as_f64();
            if !r.is_finite() {
                continue;
            }
            n += 1;
            yty += r * r;
            let row = x.row(t);
            for a in 0..j {
                let xa = row[a].as_f64();
                xty[a] += xa * r;
                for b in 0..j {
                    xtx[(a, b)] += xa * row[b].as_f64();
                }
            }
        }
        let nf = n.max(1) as f64;
        let mut lambda = Matrix::zeros(j, j);
        for a in 0..j {
            for b in 0..j {
                let v = if a == b { xtx[(a, a)] } else { w * xtx[(a, b)] };
                lambda[(a, b)] = v / nf;
            }
            if lambda[(a, a)] <= 0.0 {
                lambda[(a, a)] = 1.0;
            }
        }
        Suff { n, xtx, xty, yty, lambda }
    }
}

fn chol_jittered(m: &Matrix<f64>) -> Result<Cholesky<f64>> {
    if let Some(c) = Cholesky::new(m) {
        return Ok(c);
    }
    let jitter = 1e-8 * m.trace().abs().max(f64::MIN_POSITIVE);
    log::warn!("singular Gram matrix in regression sweep; adding ridge jitter {jitter:e}");
    let mut r = m.clone();
    for i in 0..r.rows() {
        r[(i, i)] += jitter;
    }
    Cholesky::new(&r).ok_or_else(|| Error::Numerical {
        step: 0,
        message: "regression Gram matrix is not positive definite after jitter".into(),
    })
}

/// Log marginal likelihood of the active set with β and σ² integrated out,
/// plus the pieces needed to draw them.
struct Marginal {
    logml: f64,
    shape: f64,
    rate: f64,
    post: Option<(Vec<usize>, Cholesky<f64>, Vec<f64>)>,
}

fn marginal(s: &Suff, active: &[usize], prior: &InvGammaPrior) -> Result<Marginal> {
    let shape = prior.shape + s.n as f64 / 2.0;
    if active.is_empty() {
        let rate = prior.scale + s.yty / 2.0;
        return Ok(Marginal {
            logml: -shape * rate.ln(),
            shape,
            rate,
            post: None,
        });
    }
    let lam = s.lambda.select(active, active);
    let prec = lam.add(&s.xtx.select(active, active));
    let lc = chol_jittered(&lam)?;
    let pc = chol_jittered(&prec)?;
    let b: Vec<f64> = active.iter().map(|&a| s.xty[a]).collect();
    let mean = pc.solve(&b);
    let fit: f64 = b.iter().zip(&mean).map(|(x, y)| x * y).sum();
    let ss = (s.yty - fit).max(0.0);
    let rate = prior.scale + ss / 2.0;
    Ok(Marginal {
        logml: 0.5 * lc.log_det() - 0.5 * pc.log_det() - shape * rate.ln(),
        shape,
        rate,
        post: Some((active.to_vec(), pc, mean)),
    })
}

fn active_set(gamma: &[bool]) -> Vec<usize> {
    gamma.iter().enumerate().filter(|(_, &g)| g).map(|(j, _)| j).collect()
}

/// One stochastic-search sweep: each inclusion indicator is resampled from
/// its collapsed conditional, then `σ²` and the active coefficients are
/// drawn from their conjugate conditionals.
pub fn sample_regression<T: Real, R: Rng + ?Sized>(
    resid: &[T],
    x: &Matrix<T>,
    gamma: &[bool],
    settings: &RegressionSettings,
    rng: &mut R,
) -> Result<RegressionDraw<T>> {
    settings.slab.validate().map_err(|e| Error::Config(e.to_string()))?;
    settings.obs_prior.validate("observation variance")?;
    let j = x.cols();
    if gamma.len() != j || x.rows() < resid.len() {
        return Err(Error::Shape(format!(
            "regression sweep got {} indicators, {} columns and {} design rows for {} residuals",
            gamma.len(),
            j,
            x.rows(),
            resid.len()
        )));
    }
    let s = Suff::new(resid, x, settings.slab.information_weight);
    let pi = settings.slab.inclusion_probability(j);
    let mut gamma = gamma.to_vec();
    for k in 0..j {
        gamma[k] = if pi >= 1.0 {
            true
        } else if pi <= 0.0 {
            false
        } else {
            gamma[k] = true;
            let on = marginal(&s, &active_set(&gamma), &settings.obs_prior)?.logml + pi.ln();
            gamma[k] = false;
            let off = marginal(&s, &active_set(&gamma), &settings.obs_prior)?.logml + (1.0 - pi).ln();
            let p_on = 1.0 / (1.0 + (off - on).exp());
            rng.random::<f64>() < p_on
        };
    }
    let m = marginal(&s, &active_set(&gamma), &settings.obs_prior)?;
    let obs_var = sample_inv_gamma(rng, m.shape, m.rate);
    let mut beta = vec![T::zero(); j];
    if let Some((active, pc, mean)) = m.post {
        // β | σ² ~ N(mean, σ² · prec⁻¹); with prec = L L', β = mean + σ L'⁻¹ z
        let z: Vec<f64> = (0..active.len()).map(|_| rng.sample(StandardNormal)).collect();
        let dev = pc.backward(&z);
        let sd = obs_var.sqrt();
        for (k, &a) in active.iter().enumerate() {
            beta[a] = T::lit(mean[k] + sd * dev[k]);
        }
    }
    Ok(RegressionDraw {
        gamma,
        beta,
        obs_var: T::lit(obs_var),
    })
}

/// Exhaustive posterior model probabilities over all `2^J` inclusion
/// vectors (index bit `k` ↔ column `k`), for checking the sampler.
pub fn model_posterior<T: Real>(resid: &[T], x: &Matrix<T>, settings: &RegressionSettings) -> Result<Vec<f64>> {
    let j = x.cols();
    if j > 16 {
        return Err(Error::Capacity("model enumeration is limited to 16 columns".into()));
    }
    let s = Suff::new(resid, x, settings.slab.information_weight);
    let pi = settings.slab.inclusion_probability(j);
    let mut logp = Vec::with_capacity(1 << j);
    for mask in 0..(1usize << j) {
        let active: Vec<usize> = (0..j).filter(|k| mask >> k & 1 == 1).collect();
        let k = active.len() as f64;
        let prior = k * pi.ln() + (j as f64 - k) * (1.0 - pi).ln();
        logp.push(marginal(&s, &active, &settings.obs_prior)?.logml + prior);
    }
    let max = logp.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}
