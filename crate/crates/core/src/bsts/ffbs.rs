use rand::Rng;
use rand_distr::StandardNormal;

use crate::bsts::kalman::kalman_loglik;
use crate::bsts::model::{Params, StateSpaceModel};
use crate::error::Result;
use crate::linalg::{Matrix, PsdFactor};
use crate::scalar::Real;

/// Draws `α_1..α_n` from the smoothing distribution by forward filtering and
/// backward sampling. Singular covariances (deterministic state elements)
/// are handled through a generalized inverse.
pub fn ffbs_sample<T: Real, R: Rng + ?Sized>(
    model: &StateSpaceModel<T>,
    params: &Params<T>,
    y: &[T],
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    let filt = kalman_loglik(model, params, y)?;
    let n = y.len();
    let m = model.state_dim();
    let mut path = vec![Vec::new(); n];
    if n == 0 {
        return Ok(path);
    }
    let mut normals = |k: usize| -> Vec<T> { (0..k).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect() };

    let draw = |mean: &[T], cov: &Matrix<T>, z: Vec<T>| -> Vec<T> {
        let f = PsdFactor::new(cov);
        mean.iter().zip(f.mul_sqrt(&z)).map(|(&a, b)| a + b).collect()
    };

    path[n - 1] = draw(&filt.filtered_mean[n - 1], &filt.filtered_cov[n - 1], normals(m));
    for t in (0..n - 1).rev() {
        let a = &filt.filtered_mean[t];
        let p = &filt.filtered_cov[t];
        let mut pred = a.clone();
        model.apply_transition(t, params.phi, &mut pred);
        model.add_intercept(params, &mut pred);
        let pp = model.propagate_cov(t, params, p);
        // M = T P, built row by row from the columns of P
        let mut tp = Matrix::zeros(m, m);
        let mut col = vec![T::zero(); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = p[(i, j)];
            }
            model.apply_transition(t, params.phi, &mut col);
            for i in 0..m {
                tp[(i, j)] = col[i];
            }
        }
        let factor = PsdFactor::new(&pp);
        // X = Pp⁻ M, column by column; gain J = M' Pp⁻ = X'
        let mut x = Matrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                col[i] = tp[(i, j)];
            }
            let s = factor.solve(&col);
            for i in 0..m {
                x[(i, j)] = s[i];
            }
        }
        let resid: Vec<T> = path[t + 1].iter().zip(&pred).map(|(&b, &c)| b - c).collect();
        let mean: Vec<T> = (0..m)
            .map(|i| a[i] + (0..m).map(|k| x[(k, i)] * resid[k]).sum::<T>())
            .collect();
        let mut cov = p.sub(&x.transpose().matmul(&tp));
        cov.symmetrize();
        path[t] = draw(&mean, &cov, normals(m));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsts::model::assemble_model;
    use crate::bsts::spec::{ComponentSpec, PriorSettings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_draw_is_deterministic_path() {
        let y = [100.0, 102.0, 103.0, 103.5];
        let mut m = assemble_model::<f64>(
            &[ComponentSpec::semi_local_trend()],
            &PriorSettings::default(),
            &y,
            Matrix::zeros(0, 0),
            0,
        )
        .unwrap();
        m.init_mean = vec![100.0, 2.0];
        m.init_var = vec![0.0, 0.0];
        let p = Params::noiseless(&m, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = ffbs_sample(&m, &p, &y, &mut rng).unwrap();
        let levels: Vec<f64> = path.iter().map(|s| s[0]).collect();
        assert_eq!(levels, vec![100.0, 102.0, 103.0, 103.5]);
        assert_eq!(path[3][1], 0.25);
    }
}
