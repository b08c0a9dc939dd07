//! Dominant eigenpairs of nonnegative matrices and the effective epidemic
//! eigenvalue `lambda_1(diag(beta) A_G - diag(delta))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netgraph::{strongly_connected_components, NodeId, WeightedDigraph};

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    /// Stopping threshold on `||M v - lambda v||_inf / ||v||_inf`.
    pub tol: f64,
    pub max_iter: usize,
}

impl PowerOptions {
    pub fn for_size(n: usize) -> Self {
        Self { tol: 1e-10, max_iter: 100 * n + 1000 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct DominantPair {
    pub lambda1: f64,
    /// Nonnegative right eigenvector with sup-norm 1.
    pub right_vec: Vec<f64>,
    /// Left eigenvector scaled so that `left . right = 1`.
    pub left_vec: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

fn check_nonnegative_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::invalid("matrix must be square and non-empty"));
    }
    if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("matrix must be finite and entrywise nonnegative"));
    }
    Ok(())
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Power iteration on `M + I` for the Perron root of a nonnegative `M`.
///
/// The unit shift makes every cycle length coprime, so the iteration
/// converges on periodic (e.g. cyclic) irreducible matrices too. When the
/// residual stagnates the iterate is replaced by its componentwise Aitken
/// extrapolation, provided that lowers the residual.
pub fn dominant_pair(m: &DMatrix<f64>, opts: &PowerOptions) -> Result<DominantPair> {
    check_nonnegative_square(m)?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let pattern = WeightedDigraph::from_adjacency(m)?;
    let comps = strongly_connected_components(&pattern);
    let (lambda1, right_vec, iterations, residual) =
        if comps.len() == 1 { shifted_power(m, opts)? } else { block_pair(m, &comps, opts)? };
    Ok(DominantPair { lambda1, right_vec, left_vec: None, iterations, residual })
}

fn principal(m: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| m[(nodes[r], nodes[c])])
}

/// Reducible case. Power iteration converges arbitrarily slowly when the
/// dominant root is defective, so each irreducible diagonal block is
/// iterated separately and the eigenvector is assembled from the blocks. It is
/// the direction power iteration tends to from a positive start: supported on
/// the classes preceded by the most blocks attaining the radius, with each
/// such basic class carrying its Perron vector and every other supported class
/// solving `(lambda I - M_cc) v_c = sum_d M_cd v_d`.
fn block_pair(m: &DMatrix<f64>, comps: &[Vec<usize>], opts: &PowerOptions) -> Result<(f64, Vec<f64>, usize, f64)> {
    let n = m.nrows();
    let mut iterations = 0;
    let mut radii = Vec::with_capacity(comps.len());
    let mut perron = Vec::with_capacity(comps.len());
    for c in comps {
        if let [i] = c[..] {
            radii.push(m[(i, i)]);
            perron.push(vec![1.0]);
        } else {
            let (r, v, it, _) = shifted_power(&principal(m, c), opts)?;
            iterations += it;
            radii.push(r);
            perron.push(v);
        }
    }
    let lambda = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let basic_tol = 1e-12 * lambda.max(1.0);
    let mut comp_of = vec![0; n];
    for (k, c) in comps.iter().enumerate() {
        for &i in c {
            comp_of[i] = k;
        }
    }

    // components are listed downstream first, so walk them in reverse
    let mut depth = vec![0usize; comps.len()];
    for k in (0..comps.len()).rev() {
        let upstream = comps[k]
            .iter()
            .flat_map(|&i| (0..n).filter(move |&j| m[(i, j)] > 0.0).map(|j| comp_of[j]))
            .filter(|&d| d != k)
            .map(|d| depth[d])
            .max()
            .unwrap_or(0);
        depth[k] = upstream + usize::from(radii[k] >= lambda - basic_tol);
    }
    let deepest = depth.iter().copied().max().unwrap_or(0);

    let mut v = DVector::zeros(n);
    for k in (0..comps.len()).rev() {
        if depth[k] != deepest {
            continue;
        }
        let c = &comps[k];
        let inflow = DVector::from_iterator(c.len(), c.iter().map(|&i| (0..n).map(|j| m[(i, j)] * v[j]).sum::<f64>()));
        let x = if radii[k] >= lambda - basic_tol {
            DVector::from_column_slice(&perron[k])
        } else {
            let block = DMatrix::identity(c.len(), c.len()) * lambda - principal(m, c);
            block.lu().solve(&inflow).ok_or_else(|| Error::NoConvergence("singular diagonal block".into()))?
        };
        for (&i, &xi) in c.iter().zip(x.iter()) {
            v[i] = xi.max(0.0);
        }
    }
    let v = &v / sup_norm(&v);
    let residual = sup_norm(&(m * &v - &v * lambda));
    if !(residual <= opts.tol) {
        let best = DominantPair {
            lambda1: lambda,
            right_vec: v.iter().copied().collect(),
            left_vec: None,
            iterations,
            residual,
        };
        return Err(Error::Convergence { iterations, residual, best: Box::new(best) });
    }
    Ok((lambda, v.iter().copied().collect(), iterations, residual))
}

/// [`dominant_pair`] plus the left Perron vector, normalised so `w . v = 1`.
pub fn dominant_pair_with_left(m: &DMatrix<f64>, opts: &PowerOptions) -> Result<DominantPair> {
    let mut pair = dominant_pair(m, opts)?;
    let left_pair = dominant_pair(&m.transpose(), opts)?;
    let (mut left, iters) = (left_pair.right_vec, left_pair.iterations);
    let dot: f64 = left.iter().zip(&pair.right_vec).map(|(a, b)| a * b).sum();
    if !(dot > 0.0) {
        return Err(Error::invalid("left and right Perron vectors are orthogonal (reducible matrix)"));
    }
    left.iter_mut().for_each(|x| *x /= dot);
    pair.left_vec = Some(left);
    pair.iterations += iters;
    Ok(pair)
}

fn residual_of(s: &DMatrix<f64>, v: &DVector<f64>) -> (f64, f64, DVector<f64>) {
    let w = s * v;
    let lambda = w.dot(v) / v.dot(v);
    let r = sup_norm(&(&w - v * lambda)) / sup_norm(v);
    (lambda, r, w)
}

fn shifted_power(m: &DMatrix<f64>, opts: &PowerOptions) -> Result<(f64, Vec<f64>, usize, f64)> {
    const WINDOW: usize = 50;
    let n = m.nrows();
    let s = m + DMatrix::identity(n, n);
    let mut v = DVector::from_element(n, 1.0);
    let mut history: Vec<DVector<f64>> = Vec::with_capacity(3);
    let mut window_start = f64::INFINITY;
    let mut best = (f64::INFINITY, 0.0, v.clone());

    for iter in 0..opts.max_iter {
        let (lambda_s, residual, w) = residual_of(&s, &v);
        if residual < best.0 {
            best = (residual, lambda_s, v.clone());
        }
        if residual <= opts.tol {
            return Ok((lambda_s - 1.0, v.iter().map(|x| x.max(0.0)).collect(), iter + 1, residual));
        }
        let scale = sup_norm(&w);
        if scale == 0.0 {
            // M + I is never singular on the positive cone; guard anyway
            return Err(Error::invalid("power iterate vanished"));
        }
        let next = w / scale;

        history.push(v);
        if history.len() > 3 {
            history.remove(0);
        }
        v = next;

        if iter % WINDOW == WINDOW - 1 {
            if residual > 0.9 * window_start && history.len() == 3 {
                if let Some(x) = aitken(&history[1], &history[2], &v) {
                    let (_, rx, _) = residual_of(&s, &x);
                    let (_, rv, _) = residual_of(&s, &v);
                    if rx < rv {
                        v = x;
                        history.clear();
                    }
                }
            }
            window_start = residual;
        }
    }

    let (residual, lambda_s, v) = best;
    if let Some((lambda, x, it, r)) = inverse_refine(&s, lambda_s, residual, &v, opts) {
        return Ok((lambda - 1.0, x, opts.max_iter + it, r));
    }
    let best = DominantPair {
        lambda1: lambda_s - 1.0,
        right_vec: v.iter().map(|x| x.max(0.0)).collect(),
        left_vec: None,
        iterations: opts.max_iter,
        residual,
    };
    Err(Error::Convergence { iterations: opts.max_iter, residual, best: Box::new(best) })
}

/// Slow power iterations (a complex or nearly equal second eigenvalue)
/// are finished by inverse iteration shifted just above the estimate.
fn inverse_refine(
    s: &DMatrix<f64>,
    lambda: f64,
    residual: f64,
    v: &DVector<f64>,
    opts: &PowerOptions,
) -> Option<(f64, Vec<f64>, usize, f64)> {
    const STEPS: usize = 30;
    let n = s.nrows();
    let sigma = lambda + 10.0 * residual + 1e-9 * lambda.abs().max(1.0);
    let lu = (DMatrix::identity(n, n) * sigma - s).lu();
    let mut v = v.clone();
    for it in 0..STEPS {
        let y = lu.solve(&v)?;
        let scale = sup_norm(&y);
        if !(scale > 0.0) || !scale.is_finite() {
            return None;
        }
        v = y.map(f64::abs) / scale;
        let (l, r, _) = residual_of(s, &v);
        if r <= opts.tol {
            return Some((l, v.iter().cloned().collect(), it + 1, r));
        }
    }
    None
}

fn aitken(x0: &DVector<f64>, x1: &DVector<f64>, x2: &DVector<f64>) -> Option<DVector<f64>> {
    let mut out = x2.clone();
    for i in 0..x2.len() {
        let denom = x2[i] - 2.0 * x1[i] + x0[i];
        if denom.abs() > 1e-300 {
            let d = x2[i] - x1[i];
            out[i] = (x2[i] - d * d / denom).max(0.0);
        }
    }
    let scale = sup_norm(&out);
    (scale > 0.0 && out.iter().all(|x| x.is_finite())).then(|| out / scale)
}

fn check_rates(g: &WeightedDigraph, beta: &[f64], delta: &[f64]) -> Result<()> {
    let n = g.node_count();
    if beta.len() != n || delta.len() != n {
        return Err(Error::invalid(format!("rate vectors must have length {n}")));
    }
    if beta.iter().chain(delta).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("infection and recovery rates must be positive"));
    }
    Ok(())
}

/// `diag(beta) A_G + (max(delta) + 1) I - diag(delta)` restricted to `nodes`,
/// together with the shift `max(delta) + 1` (taken over all nodes).
pub fn shifted_epidemic_block(
    g: &WeightedDigraph,
    beta: &[f64],
    delta: &[f64],
    nodes: &[NodeId],
) -> (DMatrix<f64>, f64) {
    let shift = delta.iter().cloned().fold(0.0, f64::max) + 1.0;
    let mut pos = vec![usize::MAX; g.node_count()];
    for (k, &v) in nodes.iter().enumerate() {
        pos[v] = k;
    }
    let mut m = DMatrix::zeros(nodes.len(), nodes.len());
    for (r, &i) in nodes.iter().enumerate() {
        for &(j, w) in g.in_neighbors(i) {
            if pos[j] != usize::MAX {
                m[(r, pos[j])] += beta[i] * w;
            }
        }
        m[(r, r)] += shift - delta[i];
    }
    (m, shift)
}

/// Full-graph shifted epidemic matrix; see [`shifted_epidemic_block`].
pub fn shifted_epidemic_matrix(g: &WeightedDigraph, beta: &[f64], delta: &[f64]) -> (DMatrix<f64>, f64) {
    let all: Vec<NodeId> = (0..g.node_count()).collect();
    shifted_epidemic_block(g, beta, delta, &all)
}

/// `lambda_1(diag(beta) A_G - diag(delta))`.
///
/// For a strongly connected graph this is the Perron root of the shifted
/// nonnegative matrix minus the shift. Otherwise the matrix is block
/// triangular in the SCC order and the result is the maximum over the
/// diagonal blocks, each of which is irreducible.
pub fn effective_eigenvalue(g: &WeightedDigraph, beta: &[f64], delta: &[f64]) -> Result<f64> {
    check_rates(g, beta, delta)?;
    let opts = PowerOptions::for_size(g.node_count());
    let comps = strongly_connected_components(g);
    if comps.len() == 1 {
        let (m, shift) = shifted_epidemic_matrix(g, beta, delta);
        return Ok(dominant_pair(&m, &opts)?.lambda1 - shift);
    }
    let mut best = f64::NEG_INFINITY;
    for c in &comps {
        best = best.max(block_effective_eigenvalue(g, beta, delta, c, &opts)?);
    }
    Ok(best)
}

/// Effective eigenvalue of the diagonal block of one SCC.
pub fn block_effective_eigenvalue(
    g: &WeightedDigraph,
    beta: &[f64],
    delta: &[f64],
    nodes: &[NodeId],
    opts: &PowerOptions,
) -> Result<f64> {
    if let [i] = *nodes {
        let self_loop = g.in_neighbors(i).iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, w)| w);
        return Ok(beta[i] * self_loop - delta[i]);
    }
    let (m, shift) = shifted_epidemic_block(g, beta, delta, nodes);
    Ok(dominant_pair(&m, opts)?.lambda1 - shift)
}

/// Spectral radius of `A_G`, computed per strongly connected component.
pub fn spectral_radius(g: &WeightedDigraph) -> Result<f64> {
    let mut rho = 0.0f64;
    for c in strongly_connected_components(g) {
        rho = rho.max(crate::netgraph::component_radius(g, &c)?);
    }
    Ok(rho)
}

/// First-order change `w^T dM v` of the Perron root of an irreducible `M`
/// under the increment `dM`, with `w^T v = 1`.
pub fn sensitivity(m: &DMatrix<f64>, dm: &DMatrix<f64>) -> Result<f64> {
    check_nonnegative_square(m)?;
    if dm.shape() != m.shape() {
        return Err(Error::invalid("increment must have the same shape as the matrix"));
    }
    if !WeightedDigraph::from_adjacency(m)?.is_strongly_connected() {
        return Err(Error::invalid("sensitivity requires an irreducible matrix"));
    }
    let opts = PowerOptions::for_size(m.nrows()).with_tol(1e-13);
    let pair = dominant_pair_with_left(m, &opts)?;
    let v = DVector::from_column_slice(&pair.right_vec);
    let w = DVector::from_column_slice(pair.left_vec.as_deref().expect("left vector requested"));
    Ok(w.dot(&(dm * v)))
}
