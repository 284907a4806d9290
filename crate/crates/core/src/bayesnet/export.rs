use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bayesnet::{BayesianNetworkModel, Dag};
use crate::error::{Error, Result};

/// Provenance of an arc in an exported network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcType {
    /// Passed the bootstrap threshold.
    Retained,
    /// Present in both merged networks.
    Consensus,
    /// Present in only one merged network.
    Unique,
    /// Sub-threshold arc added to connect an isolated component.
    Possible,
}

/// Literature category for an arc, supplied as an input annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcCategory {
    Causal,
    Correlated,
    Independent,
}

impl std::str::FromStr for ArcCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "causal" => Ok(ArcCategory::Causal),
            "correlated" => Ok(ArcCategory::Correlated),
            "independent" => Ok(ArcCategory::Independent),
            other => Err(Error::Schema(format!("unknown arc category {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub from: String,
    pub to: String,
    pub strength: f64,
    #[serde(rename = "type")]
    pub arc_type: ArcType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<ArcCategory>,
}

/// Exported network: `{nodes, arcs: [{from, to, strength, type}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkJson {
    pub nodes: Vec<String>,
    pub arcs: Vec<ArcRecord>,
}

impl NetworkJson {
    pub fn from_model(model: &BayesianNetworkModel) -> Self {
        let arcs = model
            .dag
            .arc_names()
            .into_iter()
            .map(|key| ArcRecord {
                strength: model.strengths.get(&key).copied().unwrap_or(f64::NAN),
                arc_type: model.arc_types.get(&key).copied().unwrap_or(ArcType::Retained),
                category: model.annotations.get(&key).copied(),
                from: key.0,
                to: key.1,
            })
            .collect();
        NetworkJson {
            nodes: model.dag.nodes().to_vec(),
            arcs,
        }
    }

    /// Rebuilds the DAG, validating acyclicity.
    pub fn dag(&self) -> Result<Dag> {
        let mut dag = Dag::new(self.nodes.iter().cloned());
        for a in &self.arcs {
            dag.add_arc_by_name(&a.from, &a.to)?;
        }
        Ok(dag)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// One node's CPT in export form; `rows` follow the parent mixed-radix order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptRecord {
    pub node: String,
    pub parents: Vec<String>,
    pub cardinality: usize,
    pub rows: Vec<Vec<f64>>,
}

impl CptRecord {
    pub fn from_model(model: &BayesianNetworkModel) -> Vec<CptRecord> {
        let names = model.dag.nodes();
        model
            .cpts
            .iter()
            .map(|c| CptRecord {
                node: names[c.node].clone(),
                parents: c.parents.iter().map(|&p| names[p].clone()).collect(),
                cardinality: c.cardinality,
                rows: (0..c.n_rows()).map(|r| c.row(r).to_vec()).collect(),
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct AnnotationRow {
    from: String,
    to: String,
    category: String,
}

/// Parses a `from,to,category` annotation CSV, checking every arc exists in `dag`.
pub fn parse_annotations<R: Read>(input: R, dag: &Dag) -> Result<BTreeMap<(String, String), ArcCategory>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = BTreeMap::new();
    for (i, row) in reader.deserialize::<AnnotationRow>().enumerate() {
        let row = row?;
        let cat: ArcCategory = row.category.parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: "category".into(),
            message: format!("unknown arc category {}", row.category),
        })?;
        let exists = matches!(
            (dag.index_of(&row.from), dag.index_of(&row.to)),
            (Some(a), Some(b)) if dag.has_arc(a, b)
        );
        if !exists {
            return Err(Error::Schema(format!("annotated arc {} -> {} is not in the network", row.from, row.to)));
        }
        if out.insert((row.from.clone(), row.to.clone()), cat).is_some() {
            return Err(Error::Schema(format!("duplicate annotation for {} -> {}", row.from, row.to)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotations_parse_and_validate() {
        let mut dag = Dag::new(["cr", "egfr", "age"]);
        dag.add_arc(0, 1).unwrap();
        dag.add_arc(2, 1).unwrap();
        let ann = parse_annotations("from,to,category\ncr,egfr,causal\nage,egfr,Correlated\n".as_bytes(), &dag).unwrap();
        assert_eq!(ann[&("cr".into(), "egfr".into())], ArcCategory::Causal);
        assert_eq!(ann[&("age".into(), "egfr".into())], ArcCategory::Correlated);
        assert!(parse_annotations("from,to,category\negfr,cr,causal\n".as_bytes(), &dag).is_err());
        assert!(parse_annotations("from,to,category\ncr,egfr,maybe\n".as_bytes(), &dag).is_err());
    }

    #[test]
    fn network_json_shape() {
        let n = NetworkJson {
            nodes: vec!["a".into(), "b".into()],
            arcs: vec![ArcRecord {
                from: "a".into(),
                to: "b".into(),
                strength: 0.9,
                arc_type: ArcType::Retained,
                category: None,
            }],
        };
        let v: serde_json::Value = serde_json::to_value(&n).unwrap();
        assert_eq!(v["arcs"][0]["type"], "retained");
        assert_eq!(v["arcs"][0]["strength"], 0.9);
        assert_eq!(n.dag().unwrap().n_arcs(), 1);
    }
}
