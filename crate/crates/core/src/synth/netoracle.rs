use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::bayesnet::{BayesianNetworkModel, Cpt, Dag, Evidence, ScoreCache, FPG_VARIABLE, HPP2_VARIABLE};
use crate::error::{Error, Result};
use crate::preprocess::{DiscreteDataset, Variable};

/// Largest graph the enumeration oracle accepts (29 281 DAGs).
pub const MAX_ENUMERATION_NODES: usize = 5;

/// Every DAG over `nodes`: each unordered pair is absent or oriented
/// either way, and cyclic combinations are dropped.
pub fn enumerate_dags<S: AsRef<str>>(nodes: &[S]) -> Result<Vec<Dag>> {
    let n = nodes.len();
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::Capacity(format!(
            "DAG enumeration supports at most {MAX_ENUMERATION_NODES} nodes, got {n}"
        )));
    }
    let names: Vec<&str> = nodes.iter().map(AsRef::as_ref).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    'outer: for code in 0..total {
        let mut dag = Dag::new(names.iter().copied());
        let mut c = code;
        for &(i, j) in &pairs {
            let digit = c % 3;
            c /= 3;
            let arc = match digit {
                1 => Some((i, j)),
                2 => Some((j, i)),
                _ => None,
            };
            if let Some((a, b)) = arc {
                if dag.add_arc(a, b).is_err() {
                    continue 'outer;
                }
            }
        }
        out.push(dag);
    }
    Ok(out)
}

/// Exhaustive BIC maximizer over all DAGs on the dataset's variables.
///
/// Scores within 1e-9 of each other are ties, resolved towards the
/// lexicographically smallest sorted arc-name list.
pub fn dag_enumeration_oracle(data: &DiscreteDataset, max_nodes: usize) -> Result<Dag> {
    if max_nodes > MAX_ENUMERATION_NODES {
        return Err(Error::Capacity(format!(
            "max_nodes may not exceed {MAX_ENUMERATION_NODES}, got {max_nodes}"
        )));
    }
    if data.n_vars() > max_nodes {
        return Err(Error::Capacity(format!(
            "{} variables exceed the enumeration limit of {max_nodes}",
            data.n_vars()
        )));
    }
    if data.n_rows() == 0 {
        return Err(Error::Domain("BIC needs at least one row".into()));
    }
    let mut cache = ScoreCache::new(data);
    let mut best: Option<(f64, Vec<(String, String)>, Dag)> = None;
    for dag in enumerate_dags(&data.variable_names())? {
        let score = cache.dag(&dag);
        let mut arcs = dag.arc_names();
        arcs.sort();
        let better = match &best {
            None => true,
            Some((s, a, _)) => score > s + 1e-9 || ((score - s).abs() <= 1e-9 && arcs < *a),
        };
        if better {
            best = Some((score, arcs, dag));
        }
    }
    Ok(best.expect("at least the empty DAG").2)
}

/// BIC from raw joint-configuration counts, independent of the scoring
/// module: `Σ N_ijk ln(N_ijk / N_ij) − ½ ln n Σ (r_i − 1) q_i`.
pub fn brute_force_bic(dag: &Dag, data: &DiscreteDataset) -> Result<f64> {
    let cols: Vec<usize> = dag
        .nodes()
        .iter()
        .map(|n| data.index_of(n).ok_or_else(|| Error::Schema(format!("node {n} absent from data"))))
        .collect::<Result<_>>()?;
    let n = data.n_rows() as f64;
    if data.n_rows() == 0 {
        return Err(Error::Domain("BIC needs at least one row".into()));
    }
    let mut total = 0.0;
    for (j, &col) in cols.iter().enumerate() {
        let parents: Vec<usize> = dag.parents(j).iter().map(|&p| cols[p]).collect();
        let mut joint: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
        let mut marg: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for row in 0..data.n_rows() {
            let cfg: Vec<usize> = parents.iter().map(|&p| data.get(row, p)).collect();
            *joint.entry((cfg.clone(), data.get(row, col))).or_default() += 1.0;
            *marg.entry(cfg).or_default() += 1.0;
        }
        for ((cfg, _), c) in &joint {
            total += c * (c / marg[cfg]).ln();
        }
        let q: f64 = parents.iter().map(|&p| data.cardinality(p) as f64).product();
        total -= 0.5 * n.ln() * (data.cardinality(col) as f64 - 1.0) * q;
    }
    Ok(total)
}

/// Posterior of `query` by summing the full joint over every configuration.
pub fn brute_force_posterior(model: &BayesianNetworkModel, query: &str, evidence: &Evidence) -> Result<Vec<f64>> {
    let q = model
        .index_of(query)
        .ok_or_else(|| Error::Schema(format!("query variable {query} is not in the network")))?;
    let mut fixed = vec![None; model.cpts.len()];
    for (name, &class) in evidence {
        let v = model
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("evidence variable {name} is not in the network")))?;
        if class >= model.cpts[v].cardinality {
            return Err(Error::Domain(format!("evidence class {class} for {name} is out of range")));
        }
        fixed[v] = Some(class);
    }
    let cards: Vec<usize> = model.cpts.iter().map(|c| c.cardinality).collect();
    let configs: usize = cards.iter().product();
    if configs > 1 << 22 {
        return Err(Error::Capacity(format!("{configs} joint configurations are too many to enumerate")));
    }
    let mut out = vec![0.0; cards[q]];
    let mut assign = vec![0usize; cards.len()];
    for code in 0..configs {
        let mut c = code;
        for (a, &k) in assign.iter_mut().zip(&cards) {
            *a = c % k;
            c /= k;
        }
        if fixed.iter().zip(&assign).any(|(f, &a)| f.is_some_and(|f| f != a)) {
            continue;
        }
        let p: f64 = model
            .cpts
            .iter()
            .map(|cpt| {
                let pc: Vec<usize> = cpt.parents.iter().map(|&p| assign[p]).collect();
                cpt.prob(assign[cpt.node], &pc)
            })
            .product();
        out[assign[q]] += p;
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Inference("evidence has zero probability under the model".into()));
    }
    Ok(out.iter().map(|p| p / total).collect())
}

/// Random discrete network over `n_nodes ≥ 2` variables named `v0, v1, ...`
/// except that two of them are the glucose markers. Cardinalities lie in
/// `2..=max_card`, every node has at most `max_parents` parents, and CPT
/// rows are normalized uniform draws bounded away from zero.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    n_nodes: usize,
    max_card: usize,
    max_parents: usize,
) -> Result<BayesianNetworkModel> {
    if n_nodes < 2 || max_card < 2 {
        return Err(Error::Domain("need at least two nodes of cardinality at least 2".into()));
    }
    let mut names: Vec<String> = (0..n_nodes).map(|i| format!("v{i}")).collect();
    let a = rng.random_range(0..n_nodes);
    let mut b = rng.random_range(0..n_nodes - 1);
    if b >= a {
        b += 1;
    }
    names[a] = FPG_VARIABLE.into();
    names[b] = HPP2_VARIABLE.into();
    // arcs only go forward in a random order, so the graph is acyclic
    let mut order: Vec<usize> = (0..n_nodes).collect();
    for i in (1..n_nodes).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut dag = Dag::new(names.clone());
    for pos in 1..n_nodes {
        let child = order[pos];
        let mut chosen = BTreeSet::new();
        for &cand in &order[..pos] {
            if chosen.len() < max_parents && rng.random_bool(0.5) {
                chosen.insert(cand);
            }
        }
        for p in chosen {
            dag.add_arc(p, child)?;
        }
    }
    let cards: Vec<usize> = (0..n_nodes).map(|_| rng.random_range(2..=max_card)).collect();
    let cpts = (0..n_nodes)
        .map(|j| {
            let parents = dag.parents(j);
            let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            let rows: usize = parent_cards.iter().product();
            let mut table = Vec::with_capacity(rows * cards[j]);
            for _ in 0..rows {
                let raw: Vec<f64> = (0..cards[j]).map(|_| 0.05 + rng.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                table.extend(raw.iter().map(|r| r / s));
            }
            Cpt {
                node: j,
                parents,
                parent_cards,
                cardinality: cards[j],
                table,
            }
        })
        .collect();
    Ok(BayesianNetworkModel {
        variables: names.iter().zip(&cards).map(|(n, &c)| Variable::categorical(n.clone(), c)).collect(),
        dag,
        cpts,
        strengths: BTreeMap::new(),
        arc_types: BTreeMap::new(),
        annotations: BTreeMap::new(),
    })
}

/// Forward-samples `n` rows from a network, columns in node order.
pub fn sample_network<R: Rng + ?Sized>(model: &BayesianNetworkModel, n: usize, rng: &mut R) -> Result<DiscreteDataset> {
    let order = model
        .dag
        .topological_order()
        .ok_or_else(|| Error::Domain("network graph is cyclic".into()))?;
    let mut columns = vec![Vec::with_capacity(n); model.cpts.len()];
    let mut assign = vec![0usize; model.cpts.len()];
    for _ in 0..n {
        for &j in &order {
            let cpt = &model.cpts[j];
            let pc: Vec<usize> = cpt.parents.iter().map(|&p| assign[p]).collect();
            let row = cpt.row(cpt.row_index(&pc));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            assign[j] = row.len() - 1;
            for (k, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    assign[j] = k;
                    break;
                }
            }
        }
        for (col, &a) in columns.iter_mut().zip(&assign) {
            col.push(a);
        }
    }
    DiscreteDataset::from_columns(model.variables.clone(), columns)
}
