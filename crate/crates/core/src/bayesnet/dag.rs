use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed acyclic graph over named nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    nodes: Vec<String>,
    /// `adj[from * n + to]`
    adj: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    nodes: Vec<String>,
    arcs: Vec<(String, String)>,
}

impl From<Dag> for DagRepr {
    fn from(d: Dag) -> Self {
        DagRepr {
            arcs: d.arc_names(),
            nodes: d.nodes,
        }
    }
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;
    fn try_from(r: DagRepr) -> Result<Self> {
        let mut d = Dag::new(r.nodes);
        for (a, b) in &r.arcs {
            d.add_arc_by_name(a, b)?;
        }
        Ok(d)
    }
}

impl Dag {
    pub fn new<S: Into<String>>(nodes: impl IntoIterator<Item = S>) -> Self {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let n = nodes.len();
        Dag {
            nodes,
            adj: vec![false; n * n],
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    #[inline]
    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.adj[from * self.nodes.len() + to]
    }

    /// Adds `from → to`, rejecting self-arcs, duplicates, and cycles.
    pub fn add_arc(&mut self, from: usize, to: usize) -> Result<()> {
        let n = self.nodes.len();
        if from >= n || to >= n {
            return Err(Error::Schema(format!("arc ({from}, {to}) outside {n} nodes")));
        }
        if from == to {
            return Err(Error::Domain(format!("self-arc on {}", self.nodes[from])));
        }
        if self.has_arc(from, to) {
            return Err(Error::Domain(format!(
                "duplicate arc {} -> {}",
                self.nodes[from], self.nodes[to]
            )));
        }
        if self.has_path(to, from) {
            return Err(Error::Domain(format!(
                "arc {} -> {} would create a cycle",
                self.nodes[from], self.nodes[to]
            )));
        }
        self.adj[from * n + to] = true;
        Ok(())
    }

    pub fn add_arc_by_name(&mut self, from: &str, to: &str) -> Result<()> {
        let f = self
            .index_of(from)
            .ok_or_else(|| Error::Schema(format!("unknown node {from}")))?;
        let t = self
            .index_of(to)
            .ok_or_else(|| Error::Schema(format!("unknown node {to}")))?;
        self.add_arc(f, t)
    }

    pub fn remove_arc(&mut self, from: usize, to: usize) {
        let n = self.nodes.len();
        self.adj[from * n + to] = false;
    }

    /// Unchecked insertion used by search moves that already verified
    /// acyclicity.
    pub(crate) fn set_arc(&mut self, from: usize, to: usize) {
        let n = self.nodes.len();
        self.adj[from * n + to] = true;
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&p| self.has_arc(p, node)).collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.has_arc(node, c)).collect()
    }

    /// Arcs in row-major `(from, to)` order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let n = self.nodes.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.has_arc(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn arc_names(&self) -> Vec<(String, String)> {
        self.arcs()
            .into_iter()
            .map(|(i, j)| (self.nodes[i].clone(), self.nodes[j].clone()))
            .collect()
    }

    pub fn n_arcs(&self) -> usize {
        self.adj.iter().filter(|&&a| a).count()
    }

    /// Unordered node pairs joined by an arc, by name, each pair sorted.
    pub fn skeleton(&self) -> BTreeSet<(String, String)> {
        self.arc_names()
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect()
    }

    /// Whether a directed path `from ⇝ to` exists (a node reaches itself).
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend((0..n).filter(|&c| self.has_arc(v, c) && !seen[c]));
        }
        false
    }

    /// Kahn topological order, or `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|j| self.parents(j).len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Ancestors of the given nodes, including the nodes themselves.
    pub fn ancestral_set(&self, seeds: &[usize]) -> Vec<bool> {
        let n = self.nodes.len();
        let mut keep = vec![false; n];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut keep[v], true) {
                continue;
            }
            stack.extend(self.parents(v));
        }
        keep
    }

    /// Weakly connected component label for every node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                if label[v] != usize::MAX {
                    continue;
                }
                label[v] = next;
                for u in 0..n {
                    if (self.has_arc(v, u) || self.has_arc(u, v)) && label[u] == usize::MAX {
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_self_and_duplicates() {
        let mut d = Dag::new(["a", "b", "c"]);
        d.add_arc(0, 1).unwrap();
        d.add_arc(1, 2).unwrap();
        assert!(d.add_arc(2, 0).is_err());
        assert!(d.add_arc(1, 1).is_err());
        assert!(d.add_arc(0, 1).is_err());
        assert_eq!(d.topological_order().unwrap(), vec![0, 1, 2]);
        assert!(d.has_path(0, 2));
        assert!(!d.has_path(2, 0));
    }

    #[test]
    fn serde_round_trip() {
        let mut d = Dag::new(["a", "b", "c"]);
        d.add_arc_by_name("c", "a").unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"nodes":["a","b","c"],"arcs":[["c","a"]]}"#);
        assert_eq!(serde_json::from_str::<Dag>(&json).unwrap(), d);
        assert!(serde_json::from_str::<Dag>(r#"{"nodes":["a","b"],"arcs":[["a","b"],["b","a"]]}"#).is_err());
    }

    #[test]
    fn components_and_ancestors() {
        let mut d = Dag::new(["a", "b", "c", "d"]);
        d.add_arc(0, 1).unwrap();
        d.add_arc(2, 1).unwrap();
        let c = d.components();
        assert_eq!(c[0], c[1]);
        assert_eq!(c[1], c[2]);
        assert_ne!(c[3], c[0]);
        assert_eq!(d.ancestral_set(&[1]), vec![true, true, true, false]);
    }
}
