//! Labeled control-flow graphs and the datasets built from them.
//!
//! A [`LabeledCfg`] is a directed graph whose nodes are atomic program
//! statements. Node ids are dense `0..N`; every node carries one canonical
//! statement label. Edges are unlabeled and encode possible transfer of
//! control. Instances are validated on construction and immutable afterwards.

mod dataset;
mod vocab;

pub use dataset::{read_pair_dataset, write_pair_dataset, GraphPairRecord, Provenance};
pub use vocab::{build_vocabulary, one_hot, LabelVocabulary};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The on-disk shape of a graph, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub labels: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}

/// A single invariant violation found by [`validate_cfg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoNodes,
    EmptyLabel { node: usize },
    DanglingEdge { src: usize, dst: usize },
    DuplicateEdge { src: usize, dst: usize },
    SelfLoop { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoNodes => write!(f, "graph has no nodes"),
            Violation::EmptyLabel { node } => write!(f, "empty label on node {node}"),
            Violation::DanglingEdge { src, dst } => write!(f, "dangling edge ({src},{dst})"),
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate edge ({src},{dst})"),
            Violation::SelfLoop { node } => write!(f, "self-loop on node {node}"),
        }
    }
}

/// Returns every invariant violation in the given graph data. An empty list
/// means the data forms a valid [`LabeledCfg`].
pub fn validate_cfg(labels: &[String], edges: &[[usize; 2]]) -> Vec<Violation> {
    let mut out = Vec::new();
    if labels.is_empty() {
        out.push(Violation::NoNodes);
    }
    for (node, label) in labels.iter().enumerate() {
        if label.trim().is_empty() {
            out.push(Violation::EmptyLabel { node });
        }
    }
    let mut seen = HashSet::new();
    for &[src, dst] in edges {
        if src >= labels.len() || dst >= labels.len() {
            out.push(Violation::DanglingEdge { src, dst });
        } else if src == dst {
            out.push(Violation::SelfLoop { node: src });
        }
        if !seen.insert((src, dst)) {
            out.push(Violation::DuplicateEdge { src, dst });
        }
    }
    out
}

/// A validated, immutable labeled control-flow graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCfg {
    name: Option<String>,
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

// Hashes a cheap subset of the fields; equality still compares everything.
impl std::hash::Hash for LabeledCfg {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
        self.labels.len().hash(state);
        self.edges.len().hash(state);
    }
}

impl LabeledCfg {
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let raw: Vec<[usize; 2]> = edges.iter().map(|&(s, d)| [s, d]).collect();
        let violations = validate_cfg(&labels, &raw);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidGraph(msg.join("; ")));
        }
        let n = labels.len();
        let mut successors = vec![Vec::new(); n];
        let mut predecessors = vec![Vec::new(); n];
        for &(s, d) in &edges {
            successors[s].push(d);
            predecessors[d].push(s);
        }
        Ok(LabeledCfg {
            name: None,
            labels,
            edges,
            successors,
            predecessors,
        })
    }

    /// Convenience constructor for tests and small literals.
    pub fn from_strs(labels: &[&str], edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            labels.iter().map(|s| s.to_string()).collect(),
            edges.to_vec(),
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.successors[node]
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.predecessors[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.successors[node].len()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.predecessors[node].len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.successors[src].contains(&dst)
    }

    /// Predecessors and successors of `node`, each listed once.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.predecessors[node].clone();
        for &s in &self.successors[node] {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        if perm.len() != n {
            return Err(Error::Invalid(format!(
                "permutation of length {} for graph with {n} nodes",
                perm.len()
            )));
        }
        let mut labels = vec![String::new(); n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n {
                return Err(Error::Invalid(format!(
                    "permutation target {new} out of range"
                )));
            }
            labels[new] = self.labels[old].clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|&(s, d)| (perm[s], perm[d]))
            .collect();
        let mut g = Self::new(labels, edges)?;
        g.name = self.name.clone();
        Ok(g)
    }

    pub fn to_raw(&self) -> RawCfg {
        RawCfg {
            name: self.name.clone(),
            labels: self.labels.clone(),
            edges: self.edges.iter().map(|&(s, d)| [s, d]).collect(),
        }
    }

    /// Structural equality ignoring the optional name.
    pub fn same_structure(&self, other: &LabeledCfg) -> bool {
        self.labels == other.labels && self.edges == other.edges
    }
}

impl TryFrom<RawCfg> for LabeledCfg {
    type Error = Error;

    fn try_from(raw: RawCfg) -> Result<Self> {
        let edges = raw.edges.iter().map(|&[s, d]| (s, d)).collect();
        let mut g = LabeledCfg::new(raw.labels, edges)?;
        g.name = raw.name;
        Ok(g)
    }
}

impl Serialize for LabeledCfg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledCfg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCfg::deserialize(d)?;
        LabeledCfg::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// Reads a single graph stored as a JSON object in the record graph format.
pub fn read_graph(path: &std::path::Path) -> Result<LabeledCfg> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_graph(g: &LabeledCfg, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string_pretty(g).expect("graph serialization cannot fail");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
