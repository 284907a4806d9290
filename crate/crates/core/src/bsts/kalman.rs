use crate::bsts::model::{Params, StateSpaceModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Filter output: exact log-likelihood, filtered moments `a_{t|t}`,
/// `P_{t|t}` and one-step predictive moments of each observation.
#[derive(Clone, Debug)]
pub struct KalmanOutput<T> {
    pub loglik: T,
    pub filtered_mean: Vec<Vec<T>>,
    pub filtered_cov: Vec<Matrix<T>>,
    pub pred_mean: Vec<T>,
    pub pred_var: Vec<T>,
}

/// Incremental filter. Holds the predicted moments for the next time step.
#[derive(Clone, Debug)]
pub struct KalmanStepper<'a, T> {
    model: &'a StateSpaceModel<T>,
    params: &'a Params<T>,
    z: Vec<T>,
    pub t: usize,
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

/// One-step predictive moments returned by [`KalmanStepper::update`].
#[derive(Clone, Copy, Debug)]
pub struct StepInfo<T> {
    pub pred_mean: T,
    pub pred_var: T,
    /// Log-density contribution; zero when the step carried no information.
    pub loglik: T,
}

impl<'a, T: Real> KalmanStepper<'a, T> {
    pub fn new(model: &'a StateSpaceModel<T>, params: &'a Params<T>) -> Self {
        KalmanStepper {
            model,
            params,
            z: model.observation_vector(),
            t: 0,
            mean: model.init_mean.clone(),
            cov: Matrix::from_diag(&model.init_var),
        }
    }

    /// Conditions the current predicted state on `y` (non-finite = missing).
    ///
    /// A numerically zero predictive variance means the observation is
    /// already determined by the state; the update is skipped.
    pub fn update(&mut self, y: T) -> Result<StepInfo<T>> {
        let m = self.mean.len();
        let t = self.t;
        let pz: Vec<T> = (0..m)
            .map(|i| (0..m).filter(|&j| self.z[j] != T::zero()).map(|j| self.cov[(i, j)]).sum())
            .collect();
        let f = self.model.observe(&self.mean) + self.model.regression_effect(&self.params.beta, t);
        let zpz: T = (0..m).filter(|&j| self.z[j] != T::zero()).map(|j| pz[j]).sum();
        let var = zpz + self.params.obs_var;
        if !f.is_finite() || !var.is_finite() {
            return Err(Error::Numerical {
                step: t,
                message: "non-finite predictive moments".into(),
            });
        }
        let scale = (0..m).filter(|&j| self.z[j] != T::zero()).map(|j| self.cov[(j, j)].abs()).sum::<T>()
            + self.params.obs_var;
        let tol = T::epsilon() * T::lit(64.0) * scale + T::min_positive_value();
        let mut info = StepInfo {
            pred_mean: f,
            pred_var: var,
            loglik: T::zero(),
        };
        if y.is_finite() && var > tol {
            let v = y - f;
            for i in 0..m {
                self.mean[i] += pz[i] * v / var;
            }
            for i in 0..m {
                for j in 0..m {
                    let d = pz[i] * pz[j] / var;
                    self.cov[(i, j)] -= d;
                }
            }
            self.cov.symmetrize();
            let two_pi = T::lit(2.0 * std::f64::consts::PI);
            info.loglik = -T::lit(0.5) * (two_pi.ln() + var.ln() + v * v / var);
        }
        Ok(info)
    }

    /// Moves the filtered state forward to the prediction for `t + 1`.
    pub fn predict(&mut self) -> Result<()> {
        let t = self.t;
        self.model.apply_transition(t, self.params.phi, &mut self.mean);
        self.model.add_intercept(self.params, &mut self.mean);
        self.cov = self.model.propagate_cov(t, self.params, &self.cov);
        self.t += 1;
        if self.mean.iter().any(|v| !v.is_finite()) || !self.cov.is_finite() {
            return Err(Error::Numerical {
                step: t,
                message: "state moments overflowed".into(),
            });
        }
        Ok(())
    }
}

/// Runs the filter over `y`, returning the log-likelihood and moments.
pub fn kalman_loglik<T: Real>(model: &StateSpaceModel<T>, params: &Params<T>, y: &[T]) -> Result<KalmanOutput<T>> {
    params.validate(model)?;
    if model.n_regressors() > 0 && model.x.rows() < y.len() {
        return Err(Error::Shape(format!(
            "design covers {} rows for {} observations",
            model.x.rows(),
            y.len()
        )));
    }
    let mut k = KalmanStepper::new(model, params);
    let mut out = KalmanOutput {
        loglik: T::zero(),
        filtered_mean: Vec::with_capacity(y.len()),
        filtered_cov: Vec::with_capacity(y.len()),
        pred_mean: Vec::with_capacity(y.len()),
        pred_var: Vec::with_capacity(y.len()),
    };
    for (t, &obs) in y.iter().enumerate() {
        let info = k.update(obs)?;
        out.loglik += info.loglik;
        out.pred_mean.push(info.pred_mean);
        out.pred_var.push(info.pred_var);
        out.filtered_mean.push(k.mean.clone());
        out.filtered_cov.push(k.cov.clone());
        if t + 1 < y.len() {
            k.predict()?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsts::spec::{ComponentSpec, PriorSettings};
    use crate::bsts::model::assemble_model;

    fn trend_model(y: &[f64]) -> StateSpaceModel<f64> {
        assemble_model(&[ComponentSpec::semi_local_trend()], &PriorSettings::default(), y, Matrix::zeros(0, 0), 0)
            .unwrap()
    }

    #[test]
    fn noiseless_trend_recursion() {
        let y = [100.0, 102.0, 103.0, 103.5];
        let mut m = trend_model(&y);
        m.init_mean = vec![100.0, 2.0];
        m.init_var = vec![0.0, 0.0];
        let p = Params::noiseless(&m, 0.5);
        let out = kalman_loglik(&m, &p, &y).unwrap();
        assert_eq!(out.pred_mean, vec![100.0, 102.0, 103.0, 103.5]);
        assert_eq!(out.loglik, 0.0);
    }

    #[test]
    fn white_noise_loglik() {
        let y = [1.0, -0.5, 2.0, 0.3];
        let mut m = trend_model(&[0.0, 1.0]);
        m.init_mean = vec![0.0, 0.0];
        m.init_var = vec![0.0, 0.0];
        let p = Params {
            obs_var: 2.0,
            ..Params::noiseless(&m, 0.0)
        };
        let out = kalman_loglik(&m, &p, &y).unwrap();
        let expect: f64 = y
            .iter()
            .map(|v| -0.5 * ((2.0 * std::f64::consts::PI * 2.0).ln() + v * v / 2.0))
            .sum();
        assert!((out.loglik - expect).abs() < 1e-12);
    }

    #[test]
    fn missing_observation_skipped() {
        let mut m = trend_model(&[0.0, 1.0]);
        m.init_mean = vec![0.0, 0.0];
        m.init_var = vec![1.0, 0.0];
        let p = Params {
            obs_var: 1.0,
            ..Params::noiseless(&m, 0.0)
        };
        let full = kalman_loglik(&m, &p, &[0.5, f64::NAN]).unwrap();
        let part = kalman_loglik(&m, &p, &[0.5]).unwrap();
        assert_eq!(full.loglik, part.loglik);
    }
}
