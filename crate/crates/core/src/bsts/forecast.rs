use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsts::kalman::KalmanStepper;
use crate::bsts::mcmc::PosteriorDraws;
use crate::bsts::model::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::{quantile_sorted, Real};

/// Model-averaged forecast. `mean` averages each draw's conditional mean;
/// the bounds are empirical 2.5% / 97.5% quantiles of the sampled paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast<T> {
    pub mean: Vec<T>,
    pub lower95: Vec<T>,
    pub upper95: Vec<T>,
    /// One sampled path per draw.
    pub paths: Vec<Vec<T>>,
}

fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn check_horizon<T: Real>(model: &StateSpaceModel<T>, horizon: usize) -> Result<()> {
    if horizon == 0 || horizon > model.max_horizon {
        return Err(Error::Range(format!(
            "forecast horizon {horizon} is outside 1..={}",
            model.max_horizon
        )));
    }
    Ok(())
}

fn summarize<T: Real>(values: &mut [T]) -> (T, T) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    (quantile_sorted(values, 0.025), quantile_sorted(values, 0.975))
}

/// Propagates each draw's terminal state `horizon` steps ahead.
///
/// `x_future` holds the design rows of the forecast steps (ignored without
/// regression). Per-draw randomness comes from independent streams of
/// `seed`, so results do not depend on thread scheduling.
pub fn posterior_forecast<T: Real>(
    draws: &PosteriorDraws<T>,
    model: &StateSpaceModel<T>,
    horizon: usize,
    x_future: &Matrix<T>,
    seed: u64,
) -> Result<Forecast<T>> {
    check_horizon(model, horizon)?;
    if draws.is_empty() {
        return Err(Error::Capacity("no posterior draws to forecast from".into()));
    }
    let j = model.n_regressors();
    if j > 0 && (x_future.cols() != j || x_future.rows() < horizon) {
        return Err(Error::Shape(format!(
            "future design must be {horizon}x{j}, got {}x{}",
            x_future.rows(),
            x_future.cols()
        )));
    }
    let t0 = draws.n_obs.saturating_sub(1);
    let per_draw: Vec<(Vec<T>, Vec<T>)> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut rng = draw_rng(seed, i);
            let p = &d.params;
            let mut cond = d.terminal_state.clone();
            let mut sampled = d.terminal_state.clone();
            let (mut means, mut path) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon));
            for h in 0..horizon {
                let t = t0 + h;
                let q = model.noise_var(t, p);
                for s in [&mut cond, &mut sampled] {
                    model.apply_transition(t, p.phi, s);
                    model.add_intercept(p, s);
                }
                for (s, v) in sampled.iter_mut().zip(q) {
                    if v > T::zero() {
                        *s += v.sqrt() * normal::<T, _>(&mut rng);
                    }
                }
                let reg = if j > 0 { dot(x_future.row(h), &p.beta) } else { T::zero() };
                means.push(model.observe(&cond) + reg);
                path.push(model.observe(&sampled) + reg + p.obs_var.sqrt() * normal::<T, _>(&mut rng));
            }
            (means, path)
        })
        .collect();

    let n = T::from_usize_lossy(per_draw.len());
    let mut out = Forecast {
        mean: vec![T::zero(); horizon],
        lower95: Vec::with_capacity(horizon),
        upper95: Vec::with_capacity(horizon),
        paths: Vec::with_capacity(per_draw.len()),
    };
    for (means, _) in &per_draw {
        for (acc, &m) in out.mean.iter_mut().zip(means) {
            *acc += m;
        }
    }
    out.mean.iter_mut().for_each(|m| *m /= n);
    for h in 0..horizon {
        let mut col: Vec<T> = per_draw.iter().map(|(_, p)| p[h]).collect();
        let (lo, hi) = summarize(&mut col);
        out.lower95.push(lo);
        out.upper95.push(hi);
    }
    out.paths = per_draw.into_iter().map(|(_, p)| p).collect();
    Ok(out)
}

/// Forecasts at many anchors of one series, `[anchor][h - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingForecast<T> {
    pub anchors: Vec<usize>,
    pub max_horizon: usize,
    pub mean: Vec<Vec<T>>,
    pub lower95: Vec<Vec<T>>,
    pub upper95: Vec<Vec<T>>,
}

/// Growing-window forecasts: for every draw the filter consumes `y` up to
/// and including each anchor, and the filtered state is projected
/// `1..=max_horizon` steps ahead. Observations after an anchor never
/// influence the forecasts made from it.
///
/// `model.x` must cover every forecast target (`anchor + max_horizon`).
pub fn rolling_forecast<T: Real>(
    draws: &PosteriorDraws<T>,
    model: &StateSpaceModel<T>,
    y: &[T],
    anchors: &[usize],
    max_horizon: usize,
    seed: u64,
) -> Result<RollingForecast<T>> {
    check_horizon(model, max_horizon)?;
    if draws.is_empty() {
        return Err(Error::Capacity("no posterior draws to forecast from".into()));
    }
    if anchors.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("anchors must be strictly increasing".into()));
    }
    let Some(&last) = anchors.last() else {
        return Ok(RollingForecast {
            anchors: vec![],
            max_horizon,
            mean: vec![],
            lower95: vec![],
            upper95: vec![],
        });
    };
    if last >= y.len() {
        return Err(Error::Range(format!("anchor {last} beyond series of length {}", y.len())));
    }
    let j = model.n_regressors();
    if j > 0 && model.x.rows() < last + max_horizon + 1 {
        return Err(Error::Shape(format!(
            "design covers {} rows, forecasts need {}",
            model.x.rows(),
            last + max_horizon + 1
        )));
    }
    let z = model.observation_vector();
    let zi: Vec<usize> = (0..z.len()).filter(|&i| z[i] != T::zero()).collect();

    let per_draw: Vec<Vec<(T, T)>> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<Vec<(T, T)>> {
            let mut rng = draw_rng(seed, i);
            let p = &d.params;
            let mut k = KalmanStepper::new(model, p);
            let mut out = Vec::with_capacity(anchors.len() * max_horizon);
            let mut next = 0;
            for t in 0..=last {
                k.update(y[t])?;
                if anchors[next] == t {
                    let mut m = k.mean.clone();
                    let mut cov = k.cov.clone();
                    for h in 1..=max_horizon {
                        let step = t + h - 1;
                        cov = model.propagate_cov(step, p, &cov);
                        model.apply_transition(step, p.phi, &mut m);
                        model.add_intercept(p, &mut m);
                        let mean = model.observe(&m) + model.regression_effect(&p.beta, t + h);
                        let zpz: T = zi.iter().flat_map(|&a| zi.iter().map(move |&b| (a, b))).map(|(a, b)| cov[(a, b)]).sum();
                        let var = (zpz + p.obs_var).max(T::zero());
                        out.push((mean, mean + var.sqrt() * normal::<T, _>(&mut rng)));
                    }
                    next += 1;
                }
                if t < last {
                    k.predict()?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let n = T::from_usize_lossy(per_draw.len());
    let mut res = RollingForecast {
        anchors: anchors.to_vec(),
        max_horizon,
        mean: Vec::with_capacity(anchors.len()),
        lower95: Vec::with_capacity(anchors.len()),
        upper95: Vec::with_capacity(anchors.len()),
    };
    let mut col = Vec::with_capacity(per_draw.len());
    for a in 0..anchors.len() {
        let (mut mrow, mut lrow, mut urow) = (vec![], vec![], vec![]);
        for h in 0..max_horizon {
            let idx = a * max_horizon + h;
            mrow.push(per_draw.iter().map(|d| d[idx].0).sum::<T>() / n);
            col.clear();
            col.extend(per_draw.iter().map(|d| d[idx].1));
            let (lo, hi) = summarize(&mut col);
            lrow.push(lo);
            urow.push(hi);
        }
        res.mean.push(mrow);
        res.lower95.push(lrow);
        res.upper95.push(urow);
    }
    Ok(res)
}
