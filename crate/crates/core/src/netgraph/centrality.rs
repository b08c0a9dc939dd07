use super::WeightedDigraph;
use crate::error::{Error, Result};

pub const PAGERANK_ALPHA: f64 = 0.85;

/// `deg_in(v_i) = sum_j a_ij`, the row sums of `A_G`.
pub fn weighted_in_degree(g: &WeightedDigraph) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.in_neighbors(i).iter().map(|&(_, w)| w).sum()).collect()
}

/// `deg_out(v_j) = sum_i a_ij`, the column sums of `A_G`.
pub fn weighted_out_degree(g: &WeightedDigraph) -> Vec<f64> {
    (0..g.node_count()).map(|j| g.out_neighbors(j).iter().map(|&(_, w)| w).sum()).collect()
}

/// PageRank `r = (I - alpha A diag(1/deg_out))^{-1} 1`, normalised to sum 1.
///
/// Columns of dangling nodes (zero out-degree) are replaced by the uniform
/// distribution before iterating.
pub fn pagerank(g: &WeightedDigraph, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("damping factor {alpha} outside (0,1)")));
    }
    let n = g.node_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    let out_deg = weighted_out_degree(g);
    let max_iter = 10_000;
    let mut r = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&j| out_deg[j] == 0.0).map(|j| r[j]).sum::<f64>() / n as f64;
        for (i, ni) in next.iter_mut().enumerate() {
            let inflow: f64 = g.in_neighbors(i).iter().map(|&(j, w)| w / out_deg[j] * r[j]).sum();
            *ni = 1.0 + alpha * (inflow + dangling);
        }
        let diff = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = next.iter().cloned().fold(0.0, f64::max);
        std::mem::swap(&mut r, &mut next);
        if diff <= 1e-15 * scale {
            let total: f64 = r.iter().sum();
            return Ok(r.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::NoConvergence(format!("pagerank after {max_iter} iterations")))
}
