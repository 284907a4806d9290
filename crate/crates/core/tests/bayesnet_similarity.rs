use glycast::bayesnet::{
    bic_score, bootstrap_consensus, fit_parameters, infer_markers, tabu_search, BootstrapParams, Dag, Evidence,
    TabuParams, FPG_VARIABLE, HPP2_VARIABLE,
};
use glycast::similarity::{select_similar, MarkerPoint, MarkerSource};
use glycast::synth::{brute_force_bic, brute_force_posterior, enumerate_dags, random_network, sample_network};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sampled(seed: u64, nodes: usize, rows: usize) -> glycast::preprocess::DiscreteDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_network(&mut rng, nodes, 3, 2).unwrap();
    sample_network(&net, rows, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bic_matches_brute_force(seed in any::<u64>(), nodes in 2usize..=5, rows in 5usize..200) {
        let data = sampled(seed, nodes, rows);
        let names = data.variable_names();
        let dags = enumerate_dags(&names).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        for _ in 0..5 {
            let dag = &dags[rng.random_range(0..dags.len())];
            let fast = bic_score(dag, &data).unwrap();
            let slow = brute_force_bic(dag, &data).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0), "{} vs {}", fast, slow);
        }
    }

    #[test]
    fn tabu_is_acyclic_and_beats_empty(seed in any::<u64>(), nodes in 2usize..=6, rows in 20usize..300) {
        let data = sampled(seed, nodes, rows);
        let dag = tabu_search(&data, &TabuParams::default()).unwrap();
        prop_assert!(dag.is_acyclic());
        prop_assert!(dag.topological_order().is_some());
        let empty = Dag::new(data.variable_names());
        prop_assert!(bic_score(&dag, &data).unwrap() >= bic_score(&empty, &data).unwrap() - 1e-9);
    }

    #[test]
    fn consensus_is_acyclic_and_deterministic(seed in any::<u64>(), threshold in 0.3..1.0f64) {
        let data = sampled(seed, 5, 150);
        let params = BootstrapParams { replicates: 8, threshold, seed, ..Default::default() };
        let (t1, d1) = bootstrap_consensus(&data, &params).unwrap();
        let (t2, d2) = bootstrap_consensus(&data, &params).unwrap();
        prop_assert!(d1.is_acyclic() && d1.topological_order().is_some());
        prop_assert_eq!(&d1, &d2);
        prop_assert_eq!(t1.ranked(), t2.ranked());
    }

    #[test]
    fn single_replicate_is_one_tabu_run(seed in any::<u64>()) {
        let data = sampled(seed, 4, 120);
        let params = BootstrapParams { replicates: 1, threshold: 0.85, seed, ..Default::default() };
        let (table, dag) = bootstrap_consensus(&data, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let n = data.n_rows();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let single = tabu_search(&data.take_rows(&rows), &params.tabu).unwrap();
        prop_assert_eq!(&dag, &single);
        for i in 0..data.n_vars() {
            for j in 0..data.n_vars() {
                if i != j {
                    let s = table.strength(i, j);
                    prop_assert!(s == 0.0 || s == 1.0);
                    prop_assert_eq!(s == 1.0, single.has_arc(i, j));
                }
            }
        }
    }

    #[test]
    fn marker_posteriors_match_enumeration(seed in any::<u64>(), nodes in 2usize..=6, observed in prop::collection::vec(any::<bool>(), 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, nodes, 3, 2).unwrap();
        let mut evidence = Evidence::new();
        for (k, v) in net.variables.iter().enumerate() {
            if observed[k] && v.name != FPG_VARIABLE && v.name != HPP2_VARIABLE {
                evidence.insert(v.name.clone(), rng.random_range(0..v.cardinality));
            }
        }
        let post = infer_markers(&net, &evidence).unwrap();
        let again = infer_markers(&net, &evidence).unwrap();
        prop_assert_eq!(&post, &again);
        for (q, p) in [(FPG_VARIABLE, &post.fpg_posterior), (HPP2_VARIABLE, &post.hpp2_posterior)] {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let exact = brute_force_posterior(&net, q, &evidence).unwrap();
            for (a, b) in p.iter().zip(&exact) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn learning_is_deterministic() {
    let data = sampled(17, 5, 400);
    let params = BootstrapParams { replicates: 20, seed: 4, ..Default::default() };
    let (t1, d1) = bootstrap_consensus(&data, &params).unwrap();
    let (t2, d2) = bootstrap_consensus(&data, &params).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(t1.ranked(), t2.ranked());
    let m1 = fit_parameters(&d1, &data, 1.0).unwrap();
    let m2 = fit_parameters(&d2, &data, 1.0).unwrap();
    assert_eq!(m1, m2);
}

fn points() -> impl Strategy<Value = (Vec<(f64, f64)>, (f64, f64))> {
    (prop::collection::vec((50.0..300.0f64, 80.0..400.0f64), 1..25), (50.0..300.0f64, 80.0..400.0f64))
}

fn pool_of(coords: &[(f64, f64)], shift: (f64, f64)) -> Vec<MarkerPoint> {
    coords
        .iter()
        .enumerate()
        .map(|(i, &(f, h))| MarkerPoint::new(format!("P{i:02}"), f + shift.0, h + shift.1, MarkerSource::Inferred).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn selection_length_and_order((coords, t) in points(), m in 1usize..25) {
        let m = 1 + (m - 1) % coords.len();
        let pool = pool_of(&coords, (0.0, 0.0));
        let tester = MarkerPoint::new("T", t.0, t.1, MarkerSource::Measured).unwrap();
        let s = select_similar(&pool, &tester, m).unwrap();
        prop_assert_eq!(s.selected.len(), m);
        prop_assert!(s.selected.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn selection_is_translation_invariant((coords, t) in points(), m in 1usize..25, shift in (0.0..200.0f64, 0.0..200.0f64)) {
        let m = 1 + (m - 1) % coords.len();
        // dyadic shifts keep the coordinate differences exact
        let shift = ((shift.0 * 4.0).round() / 4.0, (shift.1 * 4.0).round() / 4.0);
        let coords: Vec<(f64, f64)> = coords.iter().map(|&(f, h)| ((f * 4.0).round() / 4.0, (h * 4.0).round() / 4.0)).collect();
        let t = ((t.0 * 4.0).round() / 4.0, (t.1 * 4.0).round() / 4.0);
        let a = select_similar(&pool_of(&coords, (0.0, 0.0)), &MarkerPoint::new("T", t.0, t.1, MarkerSource::Measured).unwrap(), m).unwrap();
        let tb = MarkerPoint::new("T", t.0 + shift.0, t.1 + shift.1, MarkerSource::Measured).unwrap();
        let b = select_similar(&pool_of(&coords, shift), &tb, m).unwrap();
        prop_assert_eq!(a.subject_ids(), b.subject_ids());
    }

    #[test]
    fn selection_grows_by_prefix((coords, t) in points(), m in 1usize..25) {
        prop_assume!(coords.len() >= 2);
        let m = 1 + (m - 1) % (coords.len() - 1);
        let pool = pool_of(&coords, (0.0, 0.0));
        let tester = MarkerPoint::new("T", t.0, t.1, MarkerSource::Measured).unwrap();
        let small = select_similar(&pool, &tester, m).unwrap();
        let large = select_similar(&pool, &tester, m + 1).unwrap();
        prop_assert_eq!(&large.selected[..m], &small.selected[..]);
    }
}
