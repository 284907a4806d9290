use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bayesnet::BayesianNetworkModel;
use crate::error::{Error, Result};

pub const FPG_VARIABLE: &str = "fpg";
pub const HPP2_VARIABLE: &str = "hpp2";

/// Observed class per variable name.
pub type Evidence = BTreeMap<String, usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerPosterior {
    pub fpg_posterior: Vec<f64>,
    pub hpp2_posterior: Vec<f64>,
    /// Posterior-weighted class representatives, mg/dL.
    pub fpg_hat: f64,
    pub hpp2_hat: f64,
}

/// Potential over a set of discrete variables; the first variable is the
/// most significant digit of the table index.
#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.vars.len()];
        for k in (0..self.vars.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.cards[k + 1];
        }
        s
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let map = |f: &Factor| -> Vec<usize> {
            let st = f.strides();
            vars.iter()
                .map(|v| f.vars.iter().position(|u| u == v).map_or(0, |k| st[k]))
                .collect()
        };
        let (sa, sb) = (map(self), map(other));
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // odometer increment, last variable fastest
            for k in (0..vars.len()).rev() {
                digits[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if digits[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                digits[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let Some(k) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = self.strides();
        let (outer, c, inner) = (self.values.len() / (st[k] * self.cards[k]), self.cards[k], st[k]);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..c {
                for i in 0..inner {
                    values[o * inner + i] += self.values[(o * c + j) * inner + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        Factor { vars, cards, values }
    }

    fn restrict(&self, var: usize, class: usize) -> Factor {
        let Some(k) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = self.strides();
        let (outer, c, inner) = (self.values.len() / (st[k] * self.cards[k]), self.cards[k], st[k]);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * c + class) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(k);
        cards.remove(k);
        Factor { vars, cards, values }
    }
}

fn resolve_evidence(model: &BayesianNetworkModel, evidence: &Evidence) -> Result<Vec<(usize, usize)>> {
    evidence
        .iter()
        .map(|(name, &class)| {
            let v = model
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("evidence variable {name} is not in the network")))?;
            let card = model.cpts[v].cardinality;
            if class >= card {
                return Err(Error::Domain(format!(
                    "evidence class {class} for {name} is out of range (cardinality {card})"
                )));
            }
            Ok((v, class))
        })
        .collect()
}

/// Exact posterior over `query` given `evidence`, by variable elimination
/// restricted to the ancestral set of the query and evidence nodes.
pub fn posterior(model: &BayesianNetworkModel, query: &str, evidence: &Evidence) -> Result<Vec<f64>> {
    let q = model
        .index_of(query)
        .ok_or_else(|| Error::Schema(format!("query variable {query} is not in the network")))?;
    let ev = resolve_evidence(model, evidence)?;
    if let Some(&(_, class)) = ev.iter().find(|(v, _)| *v == q) {
        let mut p = vec![0.0; model.cpts[q].cardinality];
        p[class] = 1.0;
        return Ok(p);
    }

    let mut seeds: Vec<usize> = ev.iter().map(|&(v, _)| v).collect();
    seeds.push(q);
    let relevant = model.dag.ancestral_set(&seeds);

    let mut factors: Vec<Factor> = model
        .cpts
        .iter()
        .filter(|c| relevant[c.node])
        .map(|c| {
            let mut vars = c.parents.clone();
            vars.push(c.node);
            let mut cards = c.parent_cards.clone();
            cards.push(c.cardinality);
            let mut f = Factor {
                vars,
                cards,
                values: c.table.clone(),
            };
            for &(v, class) in &ev {
                f = f.restrict(v, class);
            }
            f
        })
        .collect();

    let mut hidden: Vec<usize> = (0..model.dag.n_nodes())
        .filter(|&v| relevant[v] && v != q && !ev.iter().any(|&(e, _)| e == v))
        .collect();
    while !hidden.is_empty() {
        // greedy min-weight elimination order
        let (pos, _) = hidden
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                let mut scope: BTreeMap<usize, usize> = BTreeMap::new();
                for f in factors.iter().filter(|f| f.vars.contains(&v)) {
                    for (&u, &c) in f.vars.iter().zip(&f.cards) {
                        scope.insert(u, c);
                    }
                }
                (pos, scope.values().product::<usize>())
            })
            .min_by_key(|&(pos, w)| (w, pos))
            .expect("non-empty");
        let v = hidden.remove(pos);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if let Some(prod) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(prod.sum_out(v));
        }
    }

    let joint = factors
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .expect("query factor present");
    debug_assert_eq!(joint.vars, vec![q]);
    let total: f64 = joint.values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Inference("evidence has zero probability under the model".into()));
    }
    Ok(joint.values.iter().map(|p| p / total).collect())
}

/// Posteriors and point values of the two glucose markers.
pub fn infer_markers(model: &BayesianNetworkModel, evidence: &Evidence) -> Result<MarkerPosterior> {
    for marker in [FPG_VARIABLE, HPP2_VARIABLE] {
        if evidence.contains_key(marker) {
            return Err(Error::Domain(format!("evidence must not include the marker {marker}")));
        }
    }
    let point = |name: &str, post: &[f64]| -> f64 {
        let var = &model.variables[model.index_of(name).expect("marker resolved")];
        post.iter().enumerate().map(|(c, p)| p * var.decode(c)).sum()
    };
    let fpg = posterior(model, FPG_VARIABLE, evidence)?;
    let hpp2 = posterior(model, HPP2_VARIABLE, evidence)?;
    Ok(MarkerPosterior {
        fpg_hat: point(FPG_VARIABLE, &fpg),
        hpp2_hat: point(HPP2_VARIABLE, &hpp2),
        fpg_posterior: fpg,
        hpp2_posterior: hpp2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{fit_parameters, Cpt, Dag};
    use crate::preprocess::{DiscreteDataset, Variable};

    fn chain_model(det: bool) -> BayesianNetworkModel {
        let vars = vec![Variable::categorical("a", 3), Variable::categorical("fpg", 3), Variable::categorical("hpp2", 2)];
        let data = DiscreteDataset::from_columns(vars, vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 1]]).unwrap();
        let mut dag = Dag::new(["a", "fpg", "hpp2"]);
        dag.add_arc(0, 1).unwrap();
        dag.add_arc(1, 2).unwrap();
        let mut m = fit_parameters(&dag, &data, if det { 0.0 } else { 1.0 }).unwrap();
        if det {
            m.cpts[1] = Cpt {
                table: vec![1., 0., 0., 0., 1., 0., 0., 0., 1.],
                ..m.cpts[1].clone()
            };
        }
        m
    }

    #[test]
    fn deterministic_chain_gives_point_mass() {
        let m = chain_model(true);
        let ev: Evidence = [("a".to_string(), 2)].into_iter().collect();
        let r = infer_markers(&m, &ev).unwrap();
        assert_eq!(r.fpg_posterior, vec![0.0, 0.0, 1.0]);
        assert_eq!(r.fpg_hat, 2.0);
    }

    #[test]
    fn parents_observed_gives_cpt_row() {
        let m = chain_model(false);
        let ev: Evidence = [("a".to_string(), 1)].into_iter().collect();
        let p = posterior(&m, "fpg", &ev).unwrap();
        let row = m.cpts[1].row(1);
        for (x, y) in p.iter().zip(row) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn evidence_errors() {
        let m = chain_model(true);
        let bad: Evidence = [("a".to_string(), 3)].into_iter().collect();
        assert!(matches!(infer_markers(&m, &bad), Err(Error::Domain(_))));
        let marker: Evidence = [("fpg".to_string(), 0)].into_iter().collect();
        assert!(matches!(infer_markers(&m, &marker), Err(Error::Domain(_))));
        // hpp2 evidence class 0 is impossible when fpg is 2 with pure MLE
        let impossible: Evidence = [("a".to_string(), 2), ("hpp2".to_string(), 0)].into_iter().collect();
        assert!(matches!(posterior(&m, "fpg", &impossible), Err(Error::Inference(_))));
    }
}
