use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bsts::ffbs::ffbs_sample;
use crate::bsts::model::{Params, StateSpaceModel, LEVEL, SLOPE};
use crate::bsts::regression::{sample_inv_gamma, sample_regression, RegressionSettings};
use crate::bsts::spec::{GaussianPrior, InvGammaPrior};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One retained Gibbs draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw<T> {
    pub params: Params<T>,
    pub gamma: Vec<bool>,
    /// Sampled state at the last fitted time step.
    pub terminal_state: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws<T> {
    pub draws: Vec<Draw<T>>,
    pub requested: usize,
    pub burn: usize,
    /// Number of fitted time steps; the terminal state belongs to step `n_obs - 1`.
    pub n_obs: usize,
    pub seasonal_names: Vec<String>,
    pub x_names: Vec<String>,
}

impl<T: Real> PosteriorDraws<T> {
    /// A single fixed draw, bypassing MCMC.
    pub fn fixed(model: &StateSpaceModel<T>, params: Params<T>, terminal_state: Vec<T>, n_obs: usize) -> Result<Self> {
        params.validate(model)?;
        if terminal_state.len() != model.state_dim() {
            return Err(Error::Shape(format!(
                "terminal state has {} entries, model state dimension is {}",
                terminal_state.len(),
                model.state_dim()
            )));
        }
        let gamma = params.beta.iter().map(|b| *b != T::zero()).collect();
        Ok(PosteriorDraws {
            draws: vec![Draw {
                params,
                gamma,
                terminal_state,
            }],
            requested: 1,
            burn: 0,
            n_obs,
            seasonal_names: model.seasonals.iter().map(|s| s.name.clone()).collect(),
            x_names: model.x_names.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Inclusion frequency of each regression column.
    pub fn inclusion_frequency(&self) -> Vec<f64> {
        let n = self.draws.len().max(1) as f64;
        (0..self.x_names.len())
            .map(|j| self.draws.iter().filter(|d| d.gamma[j]).count() as f64 / n)
            .collect()
    }

    /// Columnar CSV, one row per draw; variance parameters written as sds.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.draws.first().map_or(0, |d| d.terminal_state.len());
        let mut header = vec!["draw".to_string(), "obs_sd".into(), "level_sd".into(), "slope_sd".into()];
        header.extend(self.seasonal_names.iter().map(|s| format!("sd_{s}")));
        header.extend(["d".to_string(), "phi".to_string()]);
        header.extend(self.x_names.iter().map(|s| format!("gamma_{s}")));
        header.extend(self.x_names.iter().map(|s| format!("beta_{s}")));
        header.extend((0..m).map(|i| format!("state_{i}")));
        w.write_record(&header)?;
        for (i, d) in self.draws.iter().enumerate() {
            let p = &d.params;
            let mut row = vec![
                i.to_string(),
                p.obs_var.sqrt().to_string(),
                p.level_var.sqrt().to_string(),
                p.slope_var.sqrt().to_string(),
            ];
            row.extend(p.seasonal_var.iter().map(|v| v.sqrt().to_string()));
            row.push(p.d.to_string());
            row.push(p.phi.to_string());
            row.extend(d.gamma.iter().map(|&g| u8::from(g).to_string()));
            row.extend(p.beta.iter().map(|b| b.to_string()));
            row.extend(d.terminal_state.iter().map(|s| s.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Draws from N(mean, sd²) truncated to (lo, hi), strictly inside the bounds.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let inside = |v: f64| {
        let eps = 1e-12 * (hi - lo);
        v.clamp(lo + eps, hi - eps)
    };
    if mean < lo {
        // reflect so the interval lies in the lower tail, where the cdf is precise
        return -sample_truncated_normal(rng, -mean, sd, -hi, -lo);
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let (pa, pb) = (std.cdf(a), std.cdf(b));
    let v = if pb - pa > 1e-300 && pb > pa {
        let u = pa + rng.random::<f64>() * (pb - pa);
        mean + sd * std.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    } else {
        // effectively a point mass at the nearest bound
        if mean < lo {
            lo
        } else {
            hi
        }
    };
    if v.is_finite() {
        inside(v)
    } else {
        inside(mean)
    }
}

fn draw_variance<R: Rng + ?Sized>(rng: &mut R, prior: &InvGammaPrior, count: usize, ss: f64) -> f64 {
    sample_inv_gamma(rng, prior.shape + count as f64 / 2.0, prior.scale + ss / 2.0)
}

fn draw_d<R: Rng + ?Sized>(rng: &mut R, prior: &GaussianPrior, slope: &[f64], phi: f64, var: f64) -> f64 {
    let c = 1.0 - phi;
    let z: f64 = slope.windows(2).map(|w| w[1] - phi * w[0]).sum();
    let k = (slope.len().saturating_sub(1)) as f64;
    let prec = 1.0 / (prior.sd * prior.sd) + k * c * c / var;
    let mean = (prior.mean / (prior.sd * prior.sd) + c * z / var) / prec;
    mean + rng.sample::<f64, _>(StandardNormal) / prec.sqrt()
}

fn draw_phi<R: Rng + ?Sized>(rng: &mut R, prior: &GaussianPrior, slope: &[f64], d: f64, var: f64) -> f64 {
    let (sxx, sxy) = slope.windows(2).fold((0.0, 0.0), |(a, b), w| {
        let (x, y) = (w[0] - d, w[1] - d);
        (a + x * x, b + x * y)
    });
    let prec = 1.0 / (prior.sd * prior.sd) + sxx / var;
    let mean = (prior.mean / (prior.sd * prior.sd) + sxy / var) / prec;
    sample_truncated_normal(rng, mean, 1.0 / prec.sqrt(), -1.0, 1.0)
}

/// Gibbs sampler: states by FFBS, state variances by their inverse-gamma
/// conditionals, `D` and `φ` given the slope path, then the regression
/// (or the observation variance alone) given the state contribution.
pub fn mcmc_fit<T: Real>(
    model: &StateSpaceModel<T>,
    y: &[T],
    draws: usize,
    burn: usize,
    seed: u64,
) -> Result<PosteriorDraws<T>> {
    if draws == 0 || draws <= burn {
        return Err(Error::Config(format!("draws ({draws}) must exceed burn ({burn})")));
    }
    if model.n_regressors() > 0 && model.x.rows() < y.len() {
        return Err(Error::Shape("design shorter than the series".into()));
    }
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params::from_priors(model);
    let mut gamma = vec![false; model.n_regressors()];
    let pr = model.priors.clone();
    let reg_settings = model.slab.map(|slab| RegressionSettings {
        slab,
        obs_prior: pr.observation,
    });
    let mut kept = Vec::with_capacity(draws - burn);

    for iter in 0..draws {
        let wrap = |e: Error| match e {
            Error::Numerical { message, .. } => Error::Numerical {
                step: iter,
                message: format!("MCMC draw {iter}: {message}"),
            },
            other => other,
        };
        let path = ffbs_sample(model, &params, y, &mut rng).map_err(wrap)?;

        let f = |v: T| v.as_f64();
        let level: Vec<f64> = path.iter().map(|s| f(s[LEVEL])).collect();
        let slope: Vec<f64> = path.iter().map(|s| f(s[SLOPE])).collect();
        let ss_level: f64 = (0..n.saturating_sub(1))
            .map(|t| (level[t + 1] - level[t] - slope[t]).powi(2))
            .sum();
        params.level_var = T::lit(draw_variance(&mut rng, &pr.level, n - 1, ss_level));
        let (d, phi) = (f(params.d), f(params.phi));
        let ss_slope: f64 = (0..n.saturating_sub(1))
            .map(|t| (slope[t + 1] - d - phi * (slope[t] - d)).powi(2))
            .sum();
        params.slope_var = T::lit(draw_variance(&mut rng, &pr.slope, n - 1, ss_slope));
        for (k, block) in model.seasonals.iter().enumerate() {
            let (mut ss, mut count) = (0.0, 0);
            for t in 0..n.saturating_sub(1) {
                if block.is_boundary(model.start_phase + t + 1) {
                    let cur = &path[t][block.state_start..block.state_start + block.dim()];
                    let w = f(path[t + 1][block.state_start]) + cur.iter().map(|&v| f(v)).sum::<f64>();
                    ss += w * w;
                    count += 1;
                }
            }
            params.seasonal_var[k] = T::lit(draw_variance(&mut rng, &pr.seasonal[k], count, ss));
        }

        let sv = f(params.slope_var);
        let d = draw_d(&mut rng, &pr.d, &slope, phi, sv);
        params.d = T::lit(d);
        params.phi = T::lit(draw_phi(&mut rng, &pr.phi, &slope, d, sv));

        let resid: Vec<T> = y.iter().zip(&path).map(|(&v, s)| v - model.observe(s)).collect();
        if let Some(settings) = &reg_settings {
            let draw = sample_regression(&resid, &model.x, &gamma, settings, &mut rng).map_err(wrap)?;
            gamma = draw.gamma;
            params.beta = draw.beta;
            params.obs_var = draw.obs_var;
        } else {
            let obs: Vec<f64> = resid.iter().map(|&r| f(r)).filter(|r| r.is_finite()).collect();
            let ss: f64 = obs.iter().map(|r| r * r).sum();
            params.obs_var = T::lit(draw_variance(&mut rng, &pr.observation, obs.len(), ss));
        }

        let all_finite = [params.obs_var, params.level_var, params.slope_var, params.d, params.phi]
            .iter()
            .chain(&params.seasonal_var)
            .chain(&params.beta)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Numerical {
                step: iter,
                message: format!("MCMC draw {iter} produced non-finite parameters"),
            });
        }
        if iter >= burn {
            kept.push(Draw {
                params: params.clone(),
                gamma: gamma.clone(),
                terminal_state: path.last().cloned().unwrap_or_default(),
            });
        }
    }
    Ok(PosteriorDraws {
        draws: kept,
        requested: draws,
        burn,
        n_obs: n,
        seasonal_names: model.seasonals.iter().map(|s| s.name.clone()).collect(),
        x_names: model.x_names.clone(),
    })
}
