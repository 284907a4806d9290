use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bayesnet::export::{ArcCategory, ArcType};
use crate::bayesnet::score::column_map;
use crate::bayesnet::Dag;
use crate::error::{Error, Result};
use crate::preprocess::{DiscreteDataset, Variable};

/// Conditional probability table of one node.
///
/// Rows follow the mixed-radix order of the parent configuration (first
/// parent most significant); each row holds `cardinality` probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: usize,
    pub parents: Vec<usize>,
    pub parent_cards: Vec<usize>,
    pub cardinality: usize,
    pub table: Vec<f64>,
}

impl Cpt {
    pub fn n_rows(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn row_index(&self, parent_classes: &[usize]) -> usize {
        parent_classes
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&c, &k)| acc * k + c)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.table[index * self.cardinality..(index + 1) * self.cardinality]
    }

    /// P(node = `class` | parents = `parent_classes`).
    pub fn prob(&self, class: usize, parent_classes: &[usize]) -> f64 {
        self.row(self.row_index(parent_classes))[class]
    }
}

/// A DAG with fitted CPTs over encoded variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesianNetworkModel {
    pub dag: Dag,
    /// Variable metadata in DAG node order (carries decoding statistics).
    pub variables: Vec<Variable>,
    pub cpts: Vec<Cpt>,
    /// Bootstrap strength per arc, by (from, to) name.
    #[serde(with = "pair_map")]
    pub strengths: BTreeMap<(String, String), f64>,
    #[serde(with = "pair_map")]
    pub arc_types: BTreeMap<(String, String), ArcType>,
    #[serde(with = "pair_map")]
    pub annotations: BTreeMap<(String, String), ArcCategory>,
}

impl BayesianNetworkModel {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dag.index_of(name)
    }

    /// Attaches arc metadata, keeping only entries for arcs in the DAG.
    pub fn with_arc_metadata(
        mut self,
        strengths: impl Fn(&str, &str) -> f64,
        arc_types: &BTreeMap<(String, String), ArcType>,
    ) -> Self {
        for (a, b) in self.dag.arc_names() {
            let s = strengths(&a, &b);
            let ty = arc_types.get(&(a.clone(), b.clone())).copied().unwrap_or(ArcType::Retained);
            self.strengths.insert((a.clone(), b.clone()), s);
            self.arc_types.insert((a, b), ty);
        }
        self
    }

    /// Installs arc annotations; every annotated arc must exist.
    pub fn set_annotations(&mut self, ann: BTreeMap<(String, String), ArcCategory>) -> Result<()> {
        for (a, b) in ann.keys() {
            let ok = matches!((self.index_of(a), self.index_of(b)), (Some(i), Some(j)) if self.dag.has_arc(i, j));
            if !ok {
                return Err(Error::Schema(format!("annotated arc {a} -> {b} is not in the network")));
            }
        }
        self.annotations = ann;
        Ok(())
    }
}

/// Fits CPTs by smoothed maximum likelihood:
/// `(count + alpha) / (row_total + alpha · cardinality)`.
pub fn fit_parameters(dag: &Dag, data: &DiscreteDataset, alpha: f64) -> Result<BayesianNetworkModel> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be non-negative, got {alpha}")));
    }
    if !dag.is_acyclic() {
        return Err(Error::Domain("cannot fit parameters on a cyclic graph".into()));
    }
    let cols = column_map(dag, data)?;
    let mut cpts = Vec::with_capacity(dag.n_nodes());
    for j in 0..dag.n_nodes() {
        let parents = dag.parents(j);
        let parent_cards: Vec<usize> = parents.iter().map(|&p| data.cardinality(cols[p])).collect();
        let r = data.cardinality(cols[j]);
        let q: usize = parent_cards.iter().product();
        let mut counts = vec![0.0; q * r];
        for row in 0..data.n_rows() {
            let cfg = parents
                .iter()
                .zip(&parent_cards)
                .fold(0, |acc, (&p, &k)| acc * k + data.get(row, cols[p]));
            counts[cfg * r + data.get(row, cols[j])] += 1.0;
        }
        let mut table = Vec::with_capacity(q * r);
        for chunk in counts.chunks(r) {
            let total: f64 = chunk.iter().sum();
            let denom = total + alpha * r as f64;
            if denom > 0.0 {
                table.extend(chunk.iter().map(|&c| (c + alpha) / denom));
            } else {
                // unseen parent configuration under pure MLE
                table.extend(std::iter::repeat_n(1.0 / r as f64, r));
            }
        }
        cpts.push(Cpt {
            node: j,
            parents,
            parent_cards,
            cardinality: r,
            table,
        });
    }
    Ok(BayesianNetworkModel {
        dag: dag.clone(),
        variables: cols.iter().map(|&c| data.variables()[c].clone()).collect(),
        cpts,
        strengths: BTreeMap::new(),
        arc_types: BTreeMap::new(),
        annotations: BTreeMap::new(),
    })
}

/// Serializes maps keyed by `(from, to)` as lists of `[from, to, value]`.
mod pair_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, V: Serialize>(
        map: &BTreeMap<(String, String), V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(&String, &String, &V)> = map.iter().map(|((a, b), v)| (a, b, v)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(
        d: D,
    ) -> Result<BTreeMap<(String, String), V>, D::Error> {
        let v: Vec<(String, String, V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b, v)| ((a, b), v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cards: &[usize], cols: Vec<Vec<usize>>) -> DiscreteDataset {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Variable::categorical(format!("v{i}"), c))
            .collect();
        DiscreteDataset::from_columns(vars, cols).unwrap()
    }

    #[test]
    fn empirical_frequency() {
        let data = ds(&[2], vec![vec![1, 1, 1, 0]]);
        let m = fit_parameters(&Dag::new(["v0"]), &data, 0.0).unwrap();
        assert_eq!(m.cpts[0].prob(1, &[]), 0.75);
    }

    #[test]
    fn unseen_configuration_is_uniform() {
        // parent v0 never takes class 3
        let data = ds(&[4, 4], vec![vec![0, 1, 2, 0], vec![1, 1, 2, 3]]);
        let mut dag = Dag::new(["v0", "v1"]);
        dag.add_arc(0, 1).unwrap();
        let m = fit_parameters(&dag, &data, 1.0).unwrap();
        assert_eq!(m.cpts[1].row(3), &[0.25, 0.25, 0.25, 0.25]);
        for cpt in &m.cpts {
            for r in 0..cpt.n_rows() {
                assert!((cpt.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(m.cpts[1].table.len(), 16);
    }

    #[test]
    fn annotations_must_reference_arcs() {
        let data = ds(&[2, 2], vec![vec![0, 1], vec![1, 0]]);
        let mut dag = Dag::new(["v0", "v1"]);
        dag.add_arc(0, 1).unwrap();
        let mut m = fit_parameters(&dag, &data, 1.0).unwrap();
        let mut ann = BTreeMap::new();
        ann.insert(("v1".to_string(), "v0".to_string()), ArcCategory::Causal);
        assert!(m.set_annotations(ann).is_err());
        let mut ann = BTreeMap::new();
        ann.insert(("v0".to_string(), "v1".to_string()), ArcCategory::Correlated);
        m.set_annotations(ann).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<BayesianNetworkModel>(&json).unwrap(), m);
    }
}
