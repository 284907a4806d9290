use glycast::bsts::{
    assemble_model, ffbs_sample, kalman_loglik, mcmc_fit, posterior_forecast, ComponentSpec, Draw, PriorSettings,
};
use glycast::synth::{gaussian_predictive_oracle, gaussian_smoother_oracle, random_state_space};
use glycast::{Matrix, Params, PosteriorDraws};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_matches_dense_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_state_space(&mut rng, 20, 8).unwrap();
        let k = kalman_loglik(&inst.model, &inst.params, &inst.y).unwrap();
        let o = gaussian_predictive_oracle(&inst.model, &inst.params, &inst.y, 1).unwrap();
        prop_assert!((k.loglik - o.loglik).abs() <= 1e-8 * o.loglik.abs().max(1.0), "{} vs {}", k.loglik, o.loglik);
    }
}

#[test]
fn filter_is_generic_over_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let y: Vec<f64> = (0..60).map(|t| 120.0 + 0.5 * t as f64 + 4.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let specs = [ComponentSpec::semi_local_trend(), ComponentSpec::seasonal("s", vec![1; 4])];
    let m64 = assemble_model::<f64>(&specs, &PriorSettings::default(), &y, Matrix::zeros(0, 0), 0).unwrap();
    let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    let m32 = assemble_model::<f32>(&specs, &PriorSettings::default(), &y32, glycast::linalg::Matrix::zeros(0, 0), 0).unwrap();
    let p64 = Params::from_priors(&m64);
    let p32 = glycast::bsts::Params::<f32>::from_priors(&m32);
    let a = kalman_loglik(&m64, &p64, &y).unwrap().loglik;
    let b = kalman_loglik(&m32, &p32, &y32).unwrap().loglik as f64;
    assert!((a - b).abs() < 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn seasonal_identity_in_forecast() {
    let specs = [ComponentSpec::semi_local_trend(), ComponentSpec::seasonal("s", vec![1; 4])];
    let y = [0.0; 4];
    let m = assemble_model::<f64>(&specs, &PriorSettings::default(), &y, Matrix::zeros(0, 0), 0).unwrap();
    let draws = PosteriorDraws::fixed(&m, Params::noiseless(&m, 1.0), vec![0.0, 0.0, 1.0, -1.0, 2.0], 4).unwrap();
    let f = posterior_forecast(&draws, &m, 4, &Matrix::zeros(0, 0), 0).unwrap();
    assert_eq!(f.mean, vec![-2.0, 2.0, -1.0, 1.0]);
}

#[test]
fn backward_sampling_matches_smoother_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let inst = loop {
        let i = random_state_space(&mut rng, 12, 5).unwrap();
        if i.y.len() >= 6 {
            break i;
        }
    };
    let (mean, cov) = gaussian_smoother_oracle(&inst.model, &inst.params, &inst.y).unwrap();
    let reps = 4000;
    let n = inst.y.len();
    let d = inst.model.state_dim();
    let mut acc = vec![vec![0.0; d]; n];
    let mut draw_rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..reps {
        let path = ffbs_sample(&inst.model, &inst.params, &inst.y, &mut draw_rng).unwrap();
        for t in 0..n {
            for i in 0..d {
                acc[t][i] += path[t][i];
            }
        }
    }
    for t in 0..n {
        for i in 0..d {
            let est = acc[t][i] / reps as f64;
            let se = (cov[t][(i, i)] / reps as f64).sqrt();
            assert!((est - mean[t][i]).abs() <= 5.0 * se + 1e-9, "t={t} i={i}: {est} vs {}", mean[t][i]);
        }
    }
}

fn regression_data(seed: u64, n: usize) -> (Vec<f64>, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut level = 100.0;
    let y = rows
        .iter()
        .map(|r| {
            level += 0.5 * rng.sample::<f64, _>(StandardNormal);
            level + 3.0 * r[0] + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (y, Matrix::from_rows(&rows))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gibbs_draws_respect_support(seed in any::<u64>()) {
        let (y, x) = regression_data(seed, 80);
        let specs = [
            ComponentSpec::semi_local_trend(),
            ComponentSpec::regression(vec!["a".into(), "b".into(), "c".into()]),
        ];
        let m = assemble_model::<f64>(&specs, &PriorSettings::default(), &y, x, 0).unwrap();
        let post = mcmc_fit(&m, &y, 60, 10, seed).unwrap();
        prop_assert_eq!(post.len(), 50);
        for d in &post.draws {
            let p = &d.params;
            prop_assert!(p.phi > -1.0 && p.phi < 1.0);
            prop_assert!(p.obs_var > 0.0 && p.level_var > 0.0 && p.slope_var > 0.0);
            prop_assert!(p.seasonal_var.iter().all(|&v| v > 0.0));
            for (g, b) in d.gamma.iter().zip(&p.beta) {
                if !g {
                    prop_assert_eq!(*b, 0.0);
                }
            }
        }
    }
}

#[test]
fn forecast_mean_is_linear_in_coefficients() {
    let n = 6;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
    let y = vec![100.0; n];
    let specs = [ComponentSpec::semi_local_trend(), ComponentSpec::regression(vec!["a".into(), "b".into()])];
    let m = assemble_model::<f64>(&specs, &PriorSettings::default(), &y, Matrix::from_rows(&rows), 0).unwrap();
    let base = Params::noiseless(&m, 1.0);
    let fixed = PosteriorDraws::fixed(&m, base.clone(), vec![100.0, 2.0], n).unwrap();
    let betas = [[1.5, 0.0], [0.5, -2.0], [0.0, 4.0], [-1.0, 1.0]];
    let make = |beta: &[f64; 2]| {
        let mut params = base.clone();
        params.beta = beta.to_vec();
        Draw {
            params,
            gamma: beta.iter().map(|&b| b != 0.0).collect(),
            terminal_state: vec![100.0, 2.0],
        }
    };
    let draws = PosteriorDraws {
        draws: betas.iter().map(make).collect(),
        ..fixed.clone()
    };
    let x_future = Matrix::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0], vec![-1.0, 0.0]]);
    let f = posterior_forecast(&draws, &m, 3, &x_future, 9).unwrap();
    let shared = posterior_forecast(&fixed, &m, 3, &x_future, 9).unwrap();
    let mean_beta = [
        betas.iter().map(|b| b[0]).sum::<f64>() / 4.0,
        betas.iter().map(|b| b[1]).sum::<f64>() / 4.0,
    ];
    for h in 0..3 {
        let reg = mean_beta[0] * x_future[(h, 0)] + mean_beta[1] * x_future[(h, 1)];
        assert!((f.mean[h] - (shared.mean[h] + reg)).abs() < 1e-10, "h={h}");
    }
    assert_eq!(shared.mean, vec![102.0, 104.0, 106.0]);
}
