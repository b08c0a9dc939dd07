use nalgebra::DMatrix;

use super::{condensation_edges, strongly_connected_components, NodeId, WeightedDigraph};
use crate::error::{Error, Result};
use crate::spectral::{dominant_pair, PowerOptions};

/// Partition of the nodes by the sign pattern of the dominant eigenvector
/// of `A_G`: `zero_nodes` is `Z_G`, the nodes with zero eigenvector centrality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    pub zero_nodes: Vec<NodeId>,
    pub positive_nodes: Vec<NodeId>,
}

impl SupportSet {
    /// Support of a numeric vector after sup-norm normalisation.
    pub fn from_vector(v: &[f64], threshold: f64) -> Self {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (zero_nodes, positive_nodes) =
            (0..v.len()).partition(|&i| scale == 0.0 || v[i].abs() / scale < threshold);
        Self { zero_nodes, positive_nodes }
    }

    pub fn is_zero(&self, i: NodeId) -> bool {
        self.zero_nodes.binary_search(&i).is_ok()
    }

    pub fn is_trivial(&self) -> bool {
        self.zero_nodes.is_empty()
    }
}

/// Spectral radius of the diagonal block of `A_G` on `nodes` (one SCC).
pub(crate) fn component_radius(g: &WeightedDigraph, nodes: &[NodeId]) -> Result<f64> {
    if let [v] = nodes {
        return Ok(g.in_neighbors(*v).iter().find(|&&(j, _)| j == *v).map_or(0.0, |&(_, w)| w));
    }
    let block = DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| {
        let (i, j) = (nodes[r], nodes[c]);
        g.in_neighbors(i).iter().find(|&&(k, _)| k == j).map_or(0.0, |&(_, w)| w)
    });
    Ok(dominant_pair(&block, &PowerOptions::for_size(nodes.len()))?.lambda1)
}

/// Structural computation of `Z_G`.
///
/// Every SCC gets its internal spectral radius; the classes attaining
/// `rho(A_G)` are basic. Walking the condensation from sources to sinks,
/// `depth(c)` counts the largest number of basic classes on any path ending
/// in `c`. The dominant eigenvector (the limit of power iteration from a
/// positive start) is supported exactly on the classes of maximal depth. When
/// no two basic classes are chained this is the set of nodes reachable from
/// a basic class.
pub fn zero_support_set(g: &WeightedDigraph) -> Result<SupportSet> {
    if g.edge_count() == 0 {
        return Err(Error::invalid("dominant eigenvector support is undefined for an edgeless graph"));
    }
    let comps = strongly_connected_components(g);
    let radii = comps
        .iter()
        .map(|c| component_radius(g, c))
        .collect::<Result<Vec<_>>>()?;
    let rho = radii.iter().cloned().fold(0.0, f64::max);
    let basic: Vec<bool> = radii.iter().map(|&r| r >= rho * (1.0 - 1e-9)).collect();

    let mut preds = vec![Vec::new(); comps.len()];
    for (from, to) in condensation_edges(g, &comps) {
        preds[to].push(from);
    }
    // Tarjan order lists sinks first; predecessors therefore have larger indices.
    let mut depth = vec![0usize; comps.len()];
    for c in (0..comps.len()).rev() {
        let upstream = preds[c].iter().map(|&p| depth[p]).max().unwrap_or(0);
        depth[c] = upstream + usize::from(basic[c]);
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0);

    let mut zero_nodes = Vec::new();
    let mut positive_nodes = Vec::new();
    for (c, nodes) in comps.iter().enumerate() {
        if depth[c] == max_depth {
            positive_nodes.extend_from_slice(nodes);
        } else {
            zero_nodes.extend_from_slice(nodes);
        }
    }
    zero_nodes.sort_unstable();
    positive_nodes.sort_unstable();
    Ok(SupportSet { zero_nodes, positive_nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strongly_connected_has_full_support() {
        let g = WeightedDigraph::new(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.0), (1, 0, 3.0)]).unwrap();
        assert!(zero_support_set(&g).unwrap().is_trivial());
    }

    #[test]
    fn feeder_node_has_zero_centrality() {
        // 2-cycle {0,1}, edge 2 -> 0: v0 = v1 + v2, v1 = v0, v2 = 0
        let g = WeightedDigraph::new(3, [(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap();
        let s = zero_support_set(&g).unwrap();
        assert_eq!(s.zero_nodes, vec![2]);
        assert_eq!(s.positive_nodes, vec![0, 1]);
    }

    #[test]
    fn downstream_node_is_positive() {
        let g = WeightedDigraph::new(3, [(0, 1, 1.0), (1, 0, 1.0), (0, 2, 1.0)]).unwrap();
        assert!(zero_support_set(&g).unwrap().is_trivial());
    }

    #[test]
    fn chained_basic_classes_keep_only_the_last() {
        // two self-loops of weight 1, 0 -> 1: eigenvector of [[1,0],[1,1]] is (0,1)
        let g = WeightedDigraph::new(2, [(0, 0, 1.0), (1, 1, 1.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(zero_support_set(&g).unwrap().zero_nodes, vec![0]);
    }

    #[test]
    fn edgeless_graph_is_rejected() {
        let g = WeightedDigraph::new(3, []).unwrap();
        assert!(zero_support_set(&g).is_err());
    }

    #[test]
    fn vector_support_thresholds_relative_to_sup_norm() {
        let s = SupportSet::from_vector(&[2.0, 1e-11, 0.5, 0.0], 1e-10);
        assert_eq!(s.zero_nodes, vec![1, 3]);
        assert!(s.is_zero(3) && !s.is_zero(0));
    }
}
