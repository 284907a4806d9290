use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bayesnet::score::ScoreCache;
use crate::bayesnet::Dag;
use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabuParams {
    /// Number of most recently visited structures that may not be revisited.
    pub tabu_len: usize,
    pub max_iter: usize,
}

impl Default for TabuParams {
    fn default() -> Self {
        TabuParams {
            tabu_len: 100,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

/// Zobrist key for arc `(i, j)`; a structure hashes to the XOR of its arcs.
fn arc_key(i: usize, j: usize) -> u64 {
    let mut z = ((i as u64) << 32 | j as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn with(parents: &[usize], extra: usize) -> Vec<usize> {
    let mut p = parents.to_vec();
    let pos = p.partition_point(|&x| x < extra);
    p.insert(pos, extra);
    p
}

fn without(parents: &[usize], gone: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&x| x != gone).collect()
}

/// Tabu-search structure learning from the empty graph.
///
/// Every iteration takes the highest-scoring single-arc move (add, delete,
/// reverse) whose resulting structure is not among the last `tabu_len`
/// visited structures, even when it lowers the score. The best structure
/// seen is returned. Moves whose score changes agree to within 1e-9 are
/// resolved by a fixed enumeration order (source index, then target
/// index), so the search is deterministic.
pub fn tabu_search(data: &DiscreteDataset, params: &TabuParams) -> Result<Dag> {
    if data.n_rows() == 0 {
        return Err(Error::Domain("tabu search needs at least one row".into()));
    }
    if params.tabu_len == 0 {
        return Err(Error::Domain("tabu_len must be at least 1".into()));
    }
    let n = data.n_vars();
    let names: Vec<&str> = data.variable_names();
    let mut dag = Dag::new(names.iter().copied());
    let mut cache = ScoreCache::new(data);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut family: Vec<f64> = (0..n).map(|j| cache.family(j, &[])).collect();
    let mut score: f64 = family.iter().sum();
    let mut hash = 0u64;

    let mut best = dag.clone();
    let mut best_score = score;
    let mut tabu: VecDeque<u64> = VecDeque::with_capacity(params.tabu_len + 1);
    tabu.push_back(hash);

    for _ in 0..params.max_iter {
        let mut chosen: Option<(Move, f64, u64)> = None;
        let consider = |mv: Move, delta: f64, h: u64, chosen: &mut Option<(Move, f64, u64)>| {
            if tabu.contains(&h) {
                return;
            }
            let better = match chosen {
                None => true,
                Some((_, d, _)) => delta > *d + 1e-9 * d.abs().max(1.0),
            };
            if better {
                *chosen = Some((mv, delta, h));
            }
        };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if dag.has_arc(i, j) {
                    let del_j = cache.family(j, &without(&parents[j], i)) - family[j];
                    consider(Move::Delete(i, j), del_j, hash ^ arc_key(i, j), &mut chosen);
                    dag.remove_arc(i, j);
                    let acyclic = !dag.has_path(i, j);
                    dag.set_arc(i, j);
                    if acyclic {
                        let add_i = cache.family(i, &with(&parents[i], j)) - family[i];
                        consider(
                            Move::Reverse(i, j),
                            del_j + add_i,
                            hash ^ arc_key(i, j) ^ arc_key(j, i),
                            &mut chosen,
                        );
                    }
                } else if !dag.has_arc(j, i) && !dag.has_path(j, i) {
                    let add_j = cache.family(j, &with(&parents[j], i)) - family[j];
                    consider(Move::Add(i, j), add_j, hash ^ arc_key(i, j), &mut chosen);
                }
            }
        }
        let Some((mv, _, h)) = chosen else { break };
        match mv {
            Move::Add(i, j) => {
                dag.set_arc(i, j);
                parents[j] = with(&parents[j], i);
            }
            Move::Delete(i, j) => {
                dag.remove_arc(i, j);
                parents[j] = without(&parents[j], i);
            }
            Move::Reverse(i, j) => {
                dag.remove_arc(i, j);
                dag.set_arc(j, i);
                parents[j] = without(&parents[j], i);
                parents[i] = with(&parents[i], j);
            }
        }
        for (k, p) in parents.iter().enumerate() {
            family[k] = cache.family(k, p);
        }
        score = family.iter().sum();
        hash = h;
        tabu.push_back(hash);
        if tabu.len() > params.tabu_len {
            tabu.pop_front();
        }
        debug_assert!(dag.is_acyclic());
        if score > best_score + 1e-9 * best_score.abs().max(1.0) {
            best_score = score;
            best = dag.clone();
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::bic_score;
    use crate::preprocess::Variable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, vars: usize, seed: u64) -> DiscreteDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..vars).map(|_| (0..n).map(|_| rng.random_range(0..3)).collect()).collect();
        DiscreteDataset::from_columns(
            (0..vars).map(|i| Variable::categorical(format!("x{i}"), 3)).collect(),
            cols,
        )
        .unwrap()
    }

    #[test]
    fn zero_iterations_returns_empty_graph() {
        let data = uniform(50, 3, 1);
        let dag = tabu_search(&data, &TabuParams { tabu_len: 5, max_iter: 0 }).unwrap();
        assert_eq!(dag.n_arcs(), 0);
    }

    #[test]
    fn independent_columns_give_empty_graph() {
        let data = uniform(2000, 4, 7);
        let dag = tabu_search(&data, &TabuParams::default()).unwrap();
        assert_eq!(dag.n_arcs(), 0, "{:?}", dag.arc_names());
    }

    #[test]
    fn never_worse_than_empty() {
        for seed in 0..5 {
            let data = uniform(60, 4, seed);
            let dag = tabu_search(&data, &TabuParams { tabu_len: 10, max_iter: 50 }).unwrap();
            let empty = bic_score(&Dag::new(data.variable_names()), &data).unwrap();
            assert!(bic_score(&dag, &data).unwrap() >= empty - 1e-9);
            assert!(dag.is_acyclic());
        }
    }

    #[test]
    fn rejects_zero_tabu_len() {
        let data = uniform(10, 2, 0);
        assert!(tabu_search(&data, &TabuParams { tabu_len: 0, max_iter: 5 }).is_err());
    }
}
