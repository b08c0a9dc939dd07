//! Weighted directed graphs and their structural analysis.
//!
//! Orientation: an edge `(src, dst, w)` means `src` influences `dst`, and the
//! adjacency entry `a[dst][src] = w`. Row `i` of the adjacency matrix therefore
//! collects the in-edges of node `i`.

mod centrality;
mod generate;
mod scc;
mod support;

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use generate::{random_strongly_connected, scale_to_radius};
pub use centrality::{pagerank, weighted_in_degree, weighted_out_degree, PAGERANK_ALPHA};
pub use scc::{condensation_edges, strongly_connected_components};
pub(crate) use support::component_radius;
pub use support::{zero_support_set, SupportSet};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
    labels: Vec<String>,
    /// `in_adj[i]` holds `(j, a_ij)` for every edge `j -> i`.
    in_adj: Vec<Vec<(NodeId, f64)>>,
    out_adj: Vec<Vec<(NodeId, f64)>>,
}

impl WeightedDigraph {
    /// Builds a graph with labels `"0"`, `"1"`, ... .
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>) -> Result<Self> {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(labels, edges)
    }

    pub fn with_labels(
        labels: Vec<String>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        let mut in_adj = vec![Vec::new(); n];
        let mut out_adj = vec![Vec::new(); n];
        for (src, dst, weight) in edges {
            if src >= n || dst >= n {
                return Err(Error::invalid(format!("edge ({src},{dst}) out of range for n={n}")));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::invalid(format!("edge ({src},{dst}) has non-positive weight {weight}")));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::invalid(format!("duplicate edge ({src},{dst})")));
            }
            list.push(Edge { src, dst, weight });
            in_adj[dst].push((src, weight));
            out_adj[src].push((dst, weight));
        }
        Ok(Self { n, edges: list, labels, in_adj, out_adj })
    }

    /// Graph whose adjacency matrix is `m` (entry `m[(i, j)] > 0` is an edge `j -> i`).
    pub fn from_adjacency(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("adjacency matrix must be square"));
        }
        let n = m.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = m[(i, j)];
                if w < 0.0 {
                    return Err(Error::invalid("adjacency matrix must be nonnegative"));
                }
                if w > 0.0 {
                    edges.push((j, i, w));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: NodeId) -> &str {
        &self.labels[i]
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn in_neighbors(&self, i: NodeId) -> &[(NodeId, f64)] {
        &self.in_adj[i]
    }

    pub fn out_neighbors(&self, i: NodeId) -> &[(NodeId, f64)] {
        &self.out_adj[i]
    }

    /// Dense adjacency `A_G` with `a_ij = W(j -> i)`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.dst, e.src)] = e.weight;
        }
        a
    }

    /// `y = A_G x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.in_adj[i].iter().map(|&(j, w)| w * x[j]).sum();
        }
    }

    /// `y = A_G^T x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.out_adj[j].iter().map(|&(i, w)| w * x[i]).sum();
        }
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n > 0 && strongly_connected_components(self).len() == 1
    }

    /// Subgraph induced by `nodes` (kept in the given order), plus the
    /// original ids of the new nodes.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> (WeightedDigraph, Vec<NodeId>) {
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let labels = nodes.iter().map(|&v| self.labels[v].clone()).collect();
        let edges = self.edges.iter().filter_map(|e| {
            Some((*index.get(&e.src)?, *index.get(&e.dst)?, e.weight))
        });
        let sub = WeightedDigraph::with_labels(labels, edges).expect("subgraph of a valid graph is valid");
        (sub, nodes.to_vec())
    }
}

/// Parses `src,dst,weight` lines. Blank lines and lines starting with `#`
/// are skipped. Node ids follow sorted label order.
pub fn load_edge_list(text: &str) -> Result<WeightedDigraph> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse { line: lineno, msg: format!("expected `src,dst,weight`, got {} fields", fields.len()) });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse { line: lineno, msg: "empty node label".into() });
        }
        let weight: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("invalid weight `{}`", fields[2]) })?;
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Parse { line: lineno, msg: format!("non-positive weight {weight}") });
        }
        raw.push((lineno, fields[0].to_string(), fields[1].to_string(), weight));
    }

    let labels: Vec<String> = raw
        .iter()
        .flat_map(|(_, s, d, _)| [s.clone(), d.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let id: HashMap<&str, NodeId> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (lineno, s, d, w) in &raw {
        let (src, dst) = (id[s.as_str()], id[d.as_str()]);
        if !seen.insert((src, dst)) {
            return Err(Error::Parse { line: *lineno, msg: format!("duplicate edge {s} -> {d}") });
        }
        edges.push((src, dst, *w));
    }
    WeightedDigraph::with_labels(labels, edges)
}
