use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayesnet::export::ArcType;
use crate::bayesnet::{tabu_search, Dag, TabuParams};
use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapParams {
    pub replicates: usize,
    pub threshold: f64,
    pub seed: u64,
    pub tabu: TabuParams,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            replicates: 100,
            threshold: 0.85,
            seed: 0,
            tabu: TabuParams::default(),
        }
    }
}

/// Directed-arc frequencies across bootstrap networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcStrengthTable {
    pub nodes: Vec<String>,
    pub replicates: usize,
    /// Occurrence count of each directed arc `(from, to)`.
    pub counts: BTreeMap<(usize, usize), usize>,
}

impl ArcStrengthTable {
    pub fn from_dags(nodes: Vec<String>, dags: &[Dag]) -> Self {
        let mut counts = BTreeMap::new();
        for d in dags {
            for arc in d.arcs() {
                *counts.entry(arc).or_insert(0) += 1;
            }
        }
        ArcStrengthTable {
            nodes,
            replicates: dags.len(),
            counts,
        }
    }

    /// Fraction of networks containing `from → to` with that direction.
    pub fn strength(&self, from: usize, to: usize) -> f64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0) as f64 / self.replicates.max(1) as f64
    }

    pub fn strength_by_name(&self, from: &str, to: &str) -> f64 {
        let f = self.nodes.iter().position(|n| n == from);
        let t = self.nodes.iter().position(|n| n == to);
        match (f, t) {
            (Some(f), Some(t)) => self.strength(f, t),
            _ => 0.0,
        }
    }

    /// Observed arcs with their strengths, strongest first; equal strengths
    /// order by (source name, target name).
    pub fn ranked(&self) -> Vec<((usize, usize), f64)> {
        let mut v: Vec<_> = self.counts.keys().map(|&a| (a, self.strength(a.0, a.1))).collect();
        v.sort_by(|(a, sa), (b, sb)| {
            sb.total_cmp(sa)
                .then_with(|| self.nodes[a.0].cmp(&self.nodes[b.0]))
                .then_with(|| self.nodes[a.1].cmp(&self.nodes[b.1]))
        });
        v
    }

    /// Consensus DAG: arcs with strength ≥ `threshold`. When both directions
    /// qualify the stronger is kept (ties toward the lexicographically
    /// smaller source); arcs are then admitted strongest first, skipping any
    /// that would close a cycle.
    pub fn consensus(&self, threshold: f64) -> Dag {
        let passing: Vec<_> = self
            .ranked()
            .into_iter()
            .filter(|&(_, s)| s >= threshold)
            .collect();
        let mut dag = Dag::new(self.nodes.iter().cloned());
        for &((i, j), s) in &passing {
            let rev = self.strength(j, i);
            if rev >= threshold && (rev > s || (rev == s && self.nodes[j] < self.nodes[i])) {
                continue;
            }
            if dag.has_arc(j, i) || dag.has_path(j, i) {
                continue;
            }
            dag.set_arc(i, j);
        }
        dag
    }
}

fn replicate(data: &DiscreteDataset, params: &BootstrapParams, index: usize) -> Result<Dag> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);
    let n = data.n_rows();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    tabu_search(&data.take_rows(&rows), &params.tabu)
}

/// Bootstrap tabu search: `replicates` resamples of the rows with
/// replacement, each learned independently, aggregated into arc strengths
/// and a thresholded consensus DAG.
pub fn bootstrap_consensus(
    data: &DiscreteDataset,
    params: &BootstrapParams,
) -> Result<(ArcStrengthTable, Dag)> {
    if params.replicates == 0 {
        return Err(Error::Domain("bootstrap needs at least one replicate".into()));
    }
    if !(params.threshold > 0.0 && params.threshold <= 1.0) {
        return Err(Error::Domain(format!("threshold {} outside (0, 1]", params.threshold)));
    }
    if data.n_rows() == 0 {
        return Err(Error::Domain("bootstrap needs at least one row".into()));
    }
    let dags = (0..params.replicates)
        .into_par_iter()
        .map(|b| replicate(data, params, b))
        .collect::<Result<Vec<_>>>()?;
    let nodes: Vec<String> = data.variable_names().iter().map(|s| s.to_string()).collect();
    let table = ArcStrengthTable::from_dags(nodes, &dags);
    let dag = table.consensus(params.threshold);
    Ok((table, dag))
}

/// Adds sub-threshold arcs until the graph is weakly connected: repeatedly
/// the strongest observed arc joining two different components. Returns the
/// arcs added.
pub fn connect_components(dag: &mut Dag, strengths: &ArcStrengthTable) -> Vec<(usize, usize)> {
    let mut added = Vec::new();
    loop {
        let comp = dag.components();
        let pick = strengths
            .ranked()
            .into_iter()
            .find(|&((i, j), s)| s > 0.0 && comp[i] != comp[j]);
        match pick {
            Some(((i, j), _)) => {
                dag.set_arc(i, j);
                added.push((i, j));
            }
            None => return added,
        }
    }
}

/// Union of two networks over the same nodes, arcs tagged by provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedNetwork {
    pub dag: Dag,
    pub arc_types: BTreeMap<(String, String), ArcType>,
}

/// Arcs present in both networks are [`ArcType::Consensus`]; arcs in only
/// one are [`ArcType::Unique`]. Shared arcs go in first, then the first
/// network's, then the second's; an arc that would close a cycle or oppose
/// an admitted arc is skipped.
pub fn merge_networks(first: &Dag, second: &Dag) -> Result<MergedNetwork> {
    if first.nodes() != second.nodes() {
        return Err(Error::Schema("networks to merge must share the same node list".into()));
    }
    let mut dag = Dag::new(first.nodes().iter().cloned());
    let mut arc_types = BTreeMap::new();
    let shared: Vec<_> = first.arcs().into_iter().filter(|&(i, j)| second.has_arc(i, j)).collect();
    let only: Vec<_> = first
        .arcs()
        .into_iter()
        .chain(second.arcs())
        .filter(|&(i, j)| !(first.has_arc(i, j) && second.has_arc(i, j)))
        .collect();
    for (arcs, ty) in [(shared, ArcType::Consensus), (only, ArcType::Unique)] {
        for (i, j) in arcs {
            if dag.add_arc(i, j).is_ok() {
                arc_types.insert((first.nodes()[i].clone(), first.nodes()[j].clone()), ty);
            }
        }
    }
    Ok(MergedNetwork { dag, arc_types })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_dags(count_ab: usize, count_ba: usize, total: usize) -> Vec<Dag> {
        (0..total)
            .map(|k| {
                let mut d = Dag::new(["a", "b", "c"]);
                if k < count_ab {
                    d.add_arc(0, 1).unwrap();
                } else if k < count_ab + count_ba {
                    d.add_arc(1, 0).unwrap();
                }
                d.add_arc(1, 2).unwrap();
                d
            })
            .collect()
    }

    #[test]
    fn strength_is_frequency() {
        let t = ArcStrengthTable::from_dags(vec!["a".into(), "b".into(), "c".into()], &chain_dags(84, 0, 100));
        assert_eq!(t.strength(1, 2), 1.0);
        assert_eq!(t.strength(0, 1), 0.84);
        let c = t.consensus(0.85);
        assert!(c.has_arc(1, 2));
        assert!(!c.has_arc(0, 1));
        assert!(t.consensus(0.84).has_arc(0, 1));
    }

    #[test]
    fn both_directions_keep_stronger() {
        let t = ArcStrengthTable::from_dags(vec!["a".into(), "b".into(), "c".into()], &chain_dags(45, 55, 100));
        let c = t.consensus(0.4);
        assert!(c.has_arc(1, 0) && !c.has_arc(0, 1));
        let tie = ArcStrengthTable::from_dags(vec!["a".into(), "b".into(), "c".into()], &chain_dags(50, 50, 100));
        let c = tie.consensus(0.5);
        assert!(c.has_arc(0, 1) && !c.has_arc(1, 0));
    }

    #[test]
    fn cycles_resolved_by_strength() {
        let nodes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let mut counts = BTreeMap::new();
        counts.insert((0, 1), 10);
        counts.insert((1, 2), 9);
        counts.insert((2, 0), 8);
        let t = ArcStrengthTable { nodes, replicates: 10, counts };
        let c = t.consensus(0.5);
        assert!(c.has_arc(0, 1) && c.has_arc(1, 2) && !c.has_arc(2, 0));
        assert!(c.is_acyclic());
    }

    #[test]
    fn merge_tags_consensus_and_unique() {
        let mut m1 = Dag::new(["a", "b", "c", "d"]);
        m1.add_arc(0, 1).unwrap();
        let mut m2 = m1.clone();
        m2.add_arc(2, 3).unwrap();
        let merged = merge_networks(&m1, &m2).unwrap();
        assert_eq!(merged.arc_types[&("a".into(), "b".into())], ArcType::Consensus);
        assert_eq!(merged.arc_types[&("c".into(), "d".into())], ArcType::Unique);
        assert_eq!(merged.dag.n_arcs(), 2);
    }

    #[test]
    fn components_joined_by_possible_arcs() {
        let nodes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let mut counts = BTreeMap::new();
        counts.insert((0, 1), 10);
        counts.insert((2, 1), 3);
        counts.insert((0, 2), 2);
        let t = ArcStrengthTable { nodes, replicates: 10, counts };
        let mut dag = t.consensus(0.85);
        let added = connect_components(&mut dag, &t);
        assert_eq!(added, vec![(2, 1)]);
        assert!(dag.is_acyclic());
    }
}
