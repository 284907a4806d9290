use std::collections::HashMap;

use crate::bayesnet::Dag;
use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

/// Mixed-radix index of the parent configuration of `row`.
fn parent_config(data: &DiscreteDataset, row: usize, parents: &[usize]) -> usize {
    parents
        .iter()
        .fold(0, |acc, &p| acc * data.cardinality(p) + data.get(row, p))
}

/// Maximum log-likelihood of `child` given `parents` from count statistics.
pub fn family_loglik(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    let r = data.cardinality(child);
    let q: usize = parents.iter().map(|&p| data.cardinality(p)).product();
    let mut ll = 0.0;
    let mut accumulate = |counts: &[u32]| {
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return;
        }
        let t = f64::from(total);
        for &c in counts.iter().filter(|&&c| c > 0) {
            let c = f64::from(c);
            ll += c * (c / t).ln();
        }
    };
    if q.saturating_mul(r) <= 1 << 20 {
        let mut counts = vec![0u32; q * r];
        for row in 0..data.n_rows() {
            counts[parent_config(data, row, parents) * r + data.get(row, child)] += 1;
        }
        counts.chunks(r).for_each(&mut accumulate);
    } else {
        let mut sparse: HashMap<usize, Vec<u32>> = HashMap::new();
        for row in 0..data.n_rows() {
            sparse
                .entry(parent_config(data, row, parents))
                .or_insert_with(|| vec![0; r])[data.get(row, child)] += 1;
        }
        let mut keys: Vec<_> = sparse.keys().copied().collect();
        keys.sort_unstable();
        for k in keys {
            accumulate(&sparse[&k]);
        }
    }
    ll
}

/// BIC contribution of one family: log-likelihood − (k/2)·ln n with
/// k = (r − 1)·q free parameters.
pub fn family_bic(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    let r = data.cardinality(child) as f64;
    let q: f64 = parents.iter().map(|&p| data.cardinality(p) as f64).product();
    let n = data.n_rows() as f64;
    family_loglik(data, child, parents) - 0.5 * (r - 1.0) * q * n.ln()
}

/// Maps DAG node names onto dataset columns.
pub(crate) fn column_map(dag: &Dag, data: &DiscreteDataset) -> Result<Vec<usize>> {
    dag.nodes()
        .iter()
        .map(|n| {
            data.index_of(n)
                .ok_or_else(|| Error::Schema(format!("node {n} absent from data")))
        })
        .collect()
}

/// BIC of a DAG on a dataset; higher is better.
pub fn bic_score(dag: &Dag, data: &DiscreteDataset) -> Result<f64> {
    if data.n_rows() == 0 {
        return Err(Error::Domain("BIC needs at least one row".into()));
    }
    let cols = column_map(dag, data)?;
    Ok((0..dag.n_nodes())
        .map(|j| {
            let parents: Vec<usize> = dag.parents(j).iter().map(|&p| cols[p]).collect();
            family_bic(data, cols[j], &parents)
        })
        .sum())
}

/// Memoized family scores keyed by (child, sorted parent set).
pub struct ScoreCache<'a> {
    data: &'a DiscreteDataset,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> ScoreCache<'a> {
    pub fn new(data: &'a DiscreteDataset) -> Self {
        ScoreCache {
            data,
            cache: HashMap::new(),
        }
    }

    /// `parents` must be sorted ascending.
    pub fn family(&mut self, child: usize, parents: &[usize]) -> f64 {
        debug_assert!(parents.windows(2).all(|w| w[0] < w[1]));
        if let Some(&s) = self.cache.get(&(child, parents.to_vec())) {
            return s;
        }
        let s = family_bic(self.data, child, parents);
        self.cache.insert((child, parents.to_vec()), s);
        s
    }

    pub fn dag(&mut self, dag: &Dag) -> f64 {
        (0..dag.n_nodes()).map(|j| self.family(j, &dag.parents(j))).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Variable;

    fn ds(cards: &[usize], cols: Vec<Vec<usize>>) -> DiscreteDataset {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Variable::categorical(format!("v{i}"), c))
            .collect();
        DiscreteDataset::from_columns(vars, cols).unwrap()
    }

    #[test]
    fn single_binary_node() {
        let data = ds(&[2], vec![vec![0, 1]]);
        let dag = Dag::new(["v0"]);
        let s = bic_score(&dag, &data).unwrap();
        // 2 ln 0.5 − 0.5 ln 2
        assert!((s - (-1.7328679513998633)).abs() < 1e-12, "{s}");
        assert!((family_loglik(&data, 0, &[]) - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn missing_node_is_schema_error() {
        let data = ds(&[2], vec![vec![0, 1]]);
        assert!(matches!(bic_score(&Dag::new(["zz"]), &data), Err(Error::Schema(_))));
    }

    #[test]
    fn score_decomposes() {
        let data = ds(&[2, 3, 2], vec![vec![0, 1, 1, 0, 1], vec![2, 0, 1, 1, 0], vec![0, 0, 1, 1, 1]]);
        let mut dag = Dag::new(["v0", "v1", "v2"]);
        dag.add_arc(0, 1).unwrap();
        dag.add_arc(2, 1).unwrap();
        let total = bic_score(&dag, &data).unwrap();
        let parts = family_bic(&data, 0, &[]) + family_bic(&data, 1, &[0, 2]) + family_bic(&data, 2, &[]);
        assert!((total - parts).abs() < 1e-12);
        let mut cache = ScoreCache::new(&data);
        assert!((cache.dag(&dag) - total).abs() < 1e-12);
    }
}
