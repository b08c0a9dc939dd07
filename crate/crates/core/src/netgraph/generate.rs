//! Seeded random digraphs for experiments and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NodeId, WeightedDigraph};
use crate::error::{Error, Result};
use crate::spectral::spectral_radius;

/// Strongly connected digraph on `n` nodes with exactly `edges` edges (no
/// self-loops): a random Hamiltonian cycle plus uniformly chosen extra edges.
/// Weights are drawn from `[0.5, 1.5)`.
pub fn random_strongly_connected(n: usize, edges: usize, seed: u64) -> Result<WeightedDigraph> {
    if n < 2 || edges < n || edges > n * (n - 1) {
        return Err(Error::invalid(format!("cannot build a strongly connected graph with n={n}, |E|={edges}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut chosen = vec![false; n * n];
    let mut list = Vec::with_capacity(edges);
    for k in 0..n {
        let (s, d) = (order[k], order[(k + 1) % n]);
        chosen[s * n + d] = true;
        list.push((s, d));
    }
    let mut rest: Vec<(NodeId, NodeId)> =
        (0..n).flat_map(|s| (0..n).map(move |d| (s, d))).filter(|&(s, d)| s != d && !chosen[s * n + d]).collect();
    rest.shuffle(&mut rng);
    list.extend(rest.into_iter().take(edges - n));
    list.sort_unstable();
    let labels = (0..n).map(|i| format!("n{i:02}")).collect();
    WeightedDigraph::with_labels(labels, list.into_iter().map(|(s, d)| (s, d, rng.random_range(0.5..1.5))))
}

/// Copy of `g` with weights scaled so that the spectral radius is `rho`.
pub fn scale_to_radius(g: &WeightedDigraph, rho: f64) -> Result<WeightedDigraph> {
    let current = spectral_radius(g)?;
    if !(current > 0.0 && rho > 0.0) {
        return Err(Error::invalid("scaling needs a positive spectral radius"));
    }
    let f = rho / current;
    WeightedDigraph::with_labels(g.labels().to_vec(), g.edges().iter().map(|e| (e.src, e.dst, e.weight * f)))
}
