//! Independent oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spreadguard::allocate::{CostModel, NodeBounds};
use spreadguard::netgraph::WeightedDigraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest real eigenvalue from the dense Schur form, polished by Newton's
/// method on `det(lambda I - M)` using `p'/p = tr((lambda I - M)^-1)`.
pub fn dominant_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let eig = m.complex_eigenvalues();
    let mut lam = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let scale = m.amax().max(1.0);
    for _ in 0..20 {
        let shifted = DMatrix::identity(n, n) * lam - m;
        let Some(inv) = shifted.try_inverse() else { break };
        let tr = inv.trace();
        if !tr.is_finite() || tr == 0.0 {
            break;
        }
        let step = 1.0 / tr;
        // Newton only polishes; a large move means a clustered root
        if step.abs() > 1e-6 * scale {
            break;
        }
        lam -= step;
        if step.abs() < 1e-16 * scale {
            break;
        }
    }
    lam
}

/// Dominant real eigenvalue of a matrix with nonnegative off-diagonal
/// entries (the spectral radius when it is nonnegative). The characteristic
/// polynomial factors over the diagonal blocks of mutually reachable indices
/// (Warshall closure); each block root is simple, so the dense estimate stays
/// accurate where a defective full matrix would not.
pub fn charpoly_radius(m: &DMatrix<f64>) -> f64 {
    block_roots(m).into_iter().map(|(_, r)| r).fold(f64::NEG_INFINITY, f64::max)
}

/// Classes of mutually reachable indices with the dominant root of each block.
pub fn block_roots(m: &DMatrix<f64>) -> Vec<(Vec<usize>, f64)> {
    let n = m.nrows();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || m[(i, j)] != 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    reach[i][j] |= reach[k][j];
                }
            }
        }
    }
    let mut done = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if done[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        class.iter().for_each(|&j| done[j] = true);
        let block = DMatrix::from_fn(class.len(), class.len(), |a, b| m[(class[a], class[b])]);
        let root = dominant_real_eigenvalue(&block);
        out.push((class, root));
    }
    out
}

/// The class whose block carries the dominant root.
pub fn dominant_class(m: &DMatrix<f64>) -> Vec<usize> {
    block_roots(m).into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty").0
}

pub fn null_vector(m: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
    let n = m.nrows();
    let a = m - DMatrix::identity(n, n) * lambda;
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let k = (0..n).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j])).unwrap();
    let v: Vec<f64> = vt.row(k).iter().copied().collect();
    let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    v.iter().map(|x| x / big).collect()
}

pub fn zero_pattern(v: &[f64], threshold: f64) -> Vec<bool> {
    v.iter().map(|x| x.abs() < threshold).collect()
}

/// `diag(beta) A - diag(delta)` as a dense matrix.
pub fn epidemic_matrix(g: &WeightedDigraph, beta: &[f64], delta: &[f64]) -> DMatrix<f64> {
    let mut m = g.adjacency();
    for i in 0..g.node_count() {
        for j in 0..g.node_count() {
            m[(i, j)] *= beta[i];
        }
        m[(i, i)] -= delta[i];
    }
    m
}

pub fn dense_effective_eigenvalue(g: &WeightedDigraph, beta: &[f64], delta: &[f64]) -> f64 {
    charpoly_radius(&epidemic_matrix(g, beta, delta))
}

/// Random strongly connected graph: a random cycle through all nodes plus
/// extra edges with probability `p`.
pub fn random_strongly_connected(r: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedDigraph {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let mut edges = Vec::new();
    let mut seen = vec![false; n * n];
    for k in 0..n {
        let (s, d) = (perm[k], perm[(k + 1) % n]);
        seen[s * n + d] = true;
        edges.push((s, d, r.random_range(0.5..1.5)));
    }
    for s in 0..n {
        for d in 0..n {
            if s != d && !seen[s * n + d] && r.random_bool(p) {
                edges.push((s, d, r.random_range(0.5..1.5)));
            }
        }
    }
    WeightedDigraph::new(n, edges).unwrap()
}

pub fn random_digraph(r: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedDigraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if r.random_bool(p) {
                edges.push((s, d, r.random_range(0.1..2.0)));
            }
        }
    }
    WeightedDigraph::new(n, edges).unwrap()
}

/// Nonnegative matrix with entries in `[0, 1)` kept with probability `density`.
pub fn random_nonnegative(r: &mut ChaCha8Rng, n: usize, density: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| if r.random_bool(density) { r.random::<f64>() } else { 0.0 })
}

/// Block lower-triangular matrix with 2 to 4 dense irreducible diagonal
/// blocks and random couplings from earlier to later blocks, in a random
/// node order.
pub fn random_reducible(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let nb = r.random_range(2..=4.min(n));
    let mut cuts: Vec<usize> = (1..n).collect();
    for i in (1..cuts.len()).rev() {
        cuts.swap(i, r.random_range(0..=i));
    }
    let mut cuts: Vec<usize> = cuts[..nb - 1].to_vec();
    cuts.sort_unstable();
    let mut block = vec![0; n];
    for (i, b) in block.iter_mut().enumerate() {
        *b = cuts.iter().filter(|&&c| c <= i).count();
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if block[i] == block[j] {
                m[(i, j)] = r.random_range(0.05..1.0);
            } else if block[i] > block[j] && r.random_bool(0.3) {
                // influence flows from the earlier block into the later one
                m[(i, j)] = r.random_range(0.05..1.0);
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])])
}

/// Random box bounds with `beta_hi / beta_lo` in `[2, 4]`.
pub fn random_bounds(r: &mut ChaCha8Rng, n: usize) -> Vec<NodeBounds> {
    (0..n)
        .map(|_| {
            let bl = r.random_range(0.05..0.1);
            let dl = r.random_range(0.05..0.15);
            NodeBounds::new(bl, bl * r.random_range(2.0..4.0), dl, r.random_range(0.5..0.9)).unwrap()
        })
        .collect()
}

pub fn levels(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Exhaustive search over allocations whose rates sit on a `k`-level grid
/// per box, by branch and bound. Pruning only uses monotonicity of
/// `lambda_1` (decreasing in every delta, increasing in every beta) and
/// nonnegativity of costs, so the optimum returned is the exact grid optimum.
pub struct Grid<'a> {
    g: &'a WeightedDigraph,
    adj: DMatrix<f64>,
    beta: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    vax: Vec<Vec<f64>>,
    antidote: Vec<Vec<f64>>,
    /// Candidate `(beta level, delta level, cost)` per node sorted by cost.
    sorted: Vec<Vec<(usize, usize, f64)>>,
}

impl<'a> Grid<'a> {
    pub fn new(g: &'a WeightedDigraph, bounds: &[NodeBounds], costs: &CostModel, k: usize) -> Self {
        let beta: Vec<Vec<f64>> = bounds.iter().map(|b| levels(b.beta_lo, b.beta_hi, k)).collect();
        let delta: Vec<Vec<f64>> = bounds.iter().map(|b| levels(b.delta_lo, b.delta_hi, k)).collect();
        let vax: Vec<Vec<f64>> = (0..bounds.len()).map(|i| beta[i].iter().map(|&x| costs.node(i).vax_cost(x)).collect()).collect();
        let antidote: Vec<Vec<f64>> =
            (0..bounds.len()).map(|i| delta[i].iter().map(|&x| costs.node(i).antidote_cost(x)).collect()).collect();
        let sorted = (0..bounds.len())
            .map(|i| {
                let mut v: Vec<(usize, usize, f64)> =
                    (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| (a, b, vax[i][a] + antidote[i][b])).collect();
                v.sort_by(|x, y| x.2.total_cmp(&y.2));
                v
            })
            .collect();
        Self { g, adj: g.adjacency(), beta, delta, vax, antidote, sorted }
    }

    fn k(&self) -> usize {
        self.beta[0].len()
    }

    pub fn lambda(&self, lv: &[(usize, usize)]) -> f64 {
        let b: Vec<f64> = lv.iter().enumerate().map(|(i, &(a, _))| self.beta[i][a]).collect();
        let d: Vec<f64> = lv.iter().enumerate().map(|(i, &(_, c))| self.delta[i][c]).collect();
        dense_effective_eigenvalue(self.g, &b, &d)
    }

    /// `lambda_1 < s`, decided without an eigensolver: for the Metzler matrix
    /// `M = BA - D`, `sI - M` is a nonsingular M-matrix exactly when every
    /// pivot of unpivoted Gaussian elimination is positive.
    pub fn below(&self, lv: &[(usize, usize)], s: f64) -> bool {
        let n = lv.len();
        let mut a = [[0.0f64; 8]; 8];
        assert!(n <= 8);
        for i in 0..n {
            let (bl, dl) = lv[i];
            for j in 0..n {
                a[i][j] = -self.beta[i][bl] * self.adj[(i, j)];
            }
            a[i][i] += s + self.delta[i][dl];
        }
        for k in 0..n {
            if !(a[k][k] > 0.0) {
                return false;
            }
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k + 1..n {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
        true
    }

    fn cost(&self, i: usize, (a, b): (usize, usize)) -> f64 {
        self.vax[i][a] + self.antidote[i][b]
    }

    /// Grid levels of a continuous allocation rounded towards more protection
    /// (beta down, delta up), which keeps a rate target satisfied.
    pub fn round_protective(&self, beta: &[f64], delta: &[f64]) -> Vec<(usize, usize)> {
        (0..beta.len())
            .map(|i| {
                let a = self.beta[i].iter().rposition(|&x| x <= beta[i] * (1.0 + 1e-12)).unwrap_or(0);
                let b = self.delta[i].iter().position(|&x| x >= delta[i] * (1.0 - 1e-12)).unwrap_or(self.k() - 1);
                (a, b)
            })
            .collect()
    }

    /// Grid levels rounded towards less spending (beta up, delta down).
    pub fn round_cheap(&self, beta: &[f64], delta: &[f64]) -> Vec<(usize, usize)> {
        (0..beta.len())
            .map(|i| {
                let a = self.beta[i].iter().position(|&x| x >= beta[i] * (1.0 - 1e-12)).unwrap_or(self.k() - 1);
                let b = self.delta[i].iter().rposition(|&x| x <= delta[i] * (1.0 + 1e-12)).unwrap_or(0);
                (a, b)
            })
            .collect()
    }

    /// `lambda_1 <= -eps` up to rounding at the boundary.
    pub fn feasible(&self, lv: &[(usize, usize)], eps: f64) -> bool {
        self.below(lv, -eps + 1e-12)
    }

    pub fn total_cost(&self, lv: &[(usize, usize)]) -> f64 {
        lv.iter().enumerate().map(|(i, &l)| self.cost(i, l)).sum()
    }

    /// Cheapest grid allocation with `lambda_1 <= -eps`, or `upper` if none
    /// is cheaper than `upper`.
    pub fn rate_min(&self, eps: f64, upper: f64) -> f64 {
        let n = self.beta.len();
        let k = self.k();
        let strongest = (0, k - 1);
        let mut lv = vec![strongest; n];
        let mut best = upper;
        self.rate_rec(0, 0.0, eps, &mut lv, &mut best);
        best
    }

    fn rate_rec(&self, i: usize, spent: f64, eps: f64, lv: &mut Vec<(usize, usize)>, best: &mut f64) {
        let n = lv.len();
        let k = self.k();
        if i + 1 == n {
            // for each beta level the cheapest feasible delta is found by bisection
            for a in 0..k {
                if spent + self.vax[i][a] + self.antidote[i][0] >= *best {
                    continue;
                }
                lv[i] = (a, k - 1);
                if !self.feasible(lv, eps) {
                    continue;
                }
                let (mut lo, mut hi) = (0usize, k - 1);
                lv[i] = (a, 0);
                if self.feasible(lv, eps) {
                    hi = 0;
                } else {
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        lv[i] = (a, mid);
                        if self.feasible(lv, eps) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                }
                let c = spent + self.cost(i, (a, hi));
                if c < *best {
                    *best = c;
                }
            }
            lv[i] = (0, k - 1);
            return;
        }
        for &(a, b, c) in &self.sorted[i] {
            if spent + c >= *best {
                break;
            }
            lv[i] = (a, b);
            if !self.feasible(lv, eps) {
                continue;
            }
            self.rate_rec(i + 1, spent + c, eps, lv, best);
        }
        lv[i] = (0, k - 1);
    }

    /// Smallest `lambda_1` over grid allocations costing at most `budget`, or
    /// `upper` if none beats it.
    pub fn budget_min_lambda(&self, budget: f64, upper: f64) -> f64 {
        let n = self.beta.len();
        let floor: Vec<f64> = self.sorted.iter().map(|v| v[0].2).collect();
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + floor[i];
        }
        let mut lv = vec![(0, self.k() - 1); n];
        let mut best = upper;
        self.budget_rec(0, 0.0, budget * (1.0 + 1e-12), &suffix, &mut lv, &mut best);
        best
    }

    /// Most protective levels node `i` could afford alone with `room` to spend,
    /// separately per rate; an optimistic completion.
    fn affordable(&self, i: usize, room: f64) -> (usize, usize) {
        let k = self.k();
        let min_vax = self.vax[i][k - 1];
        let min_anti = self.antidote[i][0];
        let a = (0..k).find(|&a| self.vax[i][a] + min_anti <= room).unwrap_or(k - 1);
        let b = (0..k).rev().find(|&b| min_vax + self.antidote[i][b] <= room).unwrap_or(0);
        (a, b)
    }

    fn budget_rec(&self, i: usize, spent: f64, budget: f64, suffix: &[f64], lv: &mut Vec<(usize, usize)>, best: &mut f64) {
        let n = lv.len();
        let k = self.k();
        if i + 1 == n {
            // the best delta for a given beta level is the largest affordable one
            for a in 0..k {
                let room = budget - spent - self.vax[i][a];
                let Some(b) = (0..k).rev().find(|&b| self.antidote[i][b] <= room) else { continue };
                lv[i] = (a, b);
                if self.below(lv, *best) {
                    *best = best.min(self.lambda(lv));
                }
            }
            lv[i] = (0, k - 1);
            return;
        }
        for &(a, b, c) in &self.sorted[i] {
            if spent + c + suffix[i + 1] > budget {
                break;
            }
            lv[i] = (a, b);
            for j in i + 1..n {
                let room = budget - spent - c - (suffix[i + 1] - (suffix[j] - suffix[j + 1]));
                lv[j] = self.affordable(j, room);
            }
            if !self.below(lv, *best) {
                continue;
            }
            self.budget_rec(i + 1, spent + c, budget, suffix, lv, best);
        }
        lv[i] = (0, k - 1);
    }
}
