//! Least-squares posynomial fitting in log-log coordinates.
//!
//! A K-term posynomial is `log f(x) = lse_k(b_k + a_k . log x)`. Starting
//! points come from max-affine fits (alternating term assignment and
//! per-term affine regression); the best few are then refined by
//! Levenberg-Marquardt on the log residuals.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Monomial, Posynomial};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PosynomialFit {
    pub posynomial: Posynomial,
    /// `max_j |q(x_j)/f_j - 1|` over the samples.
    pub max_rel_error: f64,
}

const RANDOM_STARTS: usize = 12;
const REFINED_STARTS: usize = 4;

pub fn fit_posynomial(samples: &[(Vec<f64>, f64)], n_terms: usize) -> Result<PosynomialFit> {
    if n_terms == 0 {
        return Err(Error::invalid("n_terms must be at least 1"));
    }
    let dim = samples.first().map_or(0, |s| s.0.len());
    if dim == 0 {
        return Err(Error::invalid("fit needs samples with at least one coordinate"));
    }
    if samples.len() < n_terms * (dim + 1) {
        return Err(Error::invalid(format!(
            "{} samples cannot determine {} terms in {} variables",
            samples.len(),
            n_terms,
            dim
        )));
    }
    let mut u = DMatrix::zeros(samples.len(), dim);
    let mut y = DVector::zeros(samples.len());
    for (j, (x, f)) in samples.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::invalid("samples have inconsistent dimension"));
        }
        if !(f.is_finite() && *f > 0.0) || x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("sample coordinates and values must be positive"));
        }
        for (l, v) in x.iter().enumerate() {
            u[(j, l)] = v.ln();
        }
        y[j] = f.ln();
    }
    if samples.iter().all(|s| s.0 == samples[0].0) {
        return Err(Error::invalid("degenerate samples: all x identical"));
    }

    let data = Data { u, y, k: n_terms };
    let mut starts: Vec<Params> = Vec::new();
    for c in 0..dim {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.u[(a, c)].total_cmp(&data.u[(b, c)]));
        let mut assign = vec![0; data.len()];
        for (rank, &j) in order.iter().enumerate() {
            assign[j] = rank * n_terms / data.len();
        }
        starts.push(data.max_affine(assign));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..RANDOM_STARTS {
        let mut assign: Vec<usize> = (0..data.len()).map(|j| j % n_terms).collect();
        assign.shuffle(&mut rng);
        starts.push(data.max_affine(assign));
    }
    starts.sort_by(|a, b| data.sse(a).total_cmp(&data.sse(b)));
    starts.truncate(REFINED_STARTS);

    let best = starts
        .into_iter()
        .map(|p| data.levenberg_marquardt(p))
        .min_by(|a, b| data.sse(a).total_cmp(&data.sse(b)))
        .expect("at least one start");

    let mut terms = Vec::with_capacity(n_terms);
    for k in 0..n_terms {
        let coeff = best[(k, 0)].exp();
        terms.push(Monomial::new(coeff, (0..dim).map(|l| (l, best[(k, l + 1)])))?);
    }
    let max_rel_error = (0..data.len())
        .map(|j| (data.model(&best, j).0 - data.y[j]).exp_m1().abs())
        .fold(0.0, f64::max);
    Ok(PosynomialFit { posynomial: Posynomial::new(terms)?, max_rel_error })
}

/// Row k holds `[b_k, a_k1, .., a_kd]`.
type Params = DMatrix<f64>;

struct Data {
    u: DMatrix<f64>,
    y: DVector<f64>,
    k: usize,
}

impl Data {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.u.ncols()
    }

    fn affine(&self, p: &Params, k: usize, j: usize) -> f64 {
        p[(k, 0)] + (0..self.dim()).map(|l| p[(k, l + 1)] * self.u[(j, l)]).sum::<f64>()
    }

    /// Log-model value and softmax weights at sample j.
    fn model(&self, p: &Params, j: usize) -> (f64, Vec<f64>) {
        let z: Vec<f64> = (0..self.k).map(|k| self.affine(p, k, j)).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        (m + s.ln(), e.into_iter().map(|v| v / s).collect())
    }

    fn sse(&self, p: &Params) -> f64 {
        (0..self.len()).map(|j| (self.model(p, j).0 - self.y[j]).powi(2)).sum()
    }

    /// Ridge-stabilised affine regression of `y` on the given samples.
    fn regress(&self, rows: &[usize]) -> Option<DVector<f64>> {
        let d = self.dim() + 1;
        let mut ata = DMatrix::zeros(d, d);
        let mut aty = DVector::zeros(d);
        for &j in rows {
            let mut a = DVector::zeros(d);
            a[0] = 1.0;
            for l in 0..self.dim() {
                a[l + 1] = self.u[(j, l)];
            }
            ata += &a * a.transpose();
            aty += &a * self.y[j];
        }
        for i in 0..d {
            ata[(i, i)] += 1e-10;
        }
        ata.cholesky().map(|c| c.solve(&aty))
    }

    fn max_affine(&self, mut assign: Vec<usize>) -> Params {
        let mut p = Params::zeros(self.k, self.dim() + 1);
        let mean = self.y.mean();
        for k in 0..self.k {
            p[(k, 0)] = mean;
        }
        for _ in 0..100 {
            for k in 0..self.k {
                let rows: Vec<usize> = (0..self.len()).filter(|&j| assign[j] == k).collect();
                if rows.is_empty() {
                    continue;
                }
                if let Some(theta) = self.regress(&rows) {
                    p.row_mut(k).copy_from(&theta.transpose());
                }
            }
            let next: Vec<usize> = (0..self.len())
                .map(|j| {
                    (0..self.k)
                        .max_by(|&a, &b| self.affine(&p, a, j).total_cmp(&self.affine(&p, b, j)))
                        .expect("k >= 1")
                })
                .collect();
            if next == assign {
                break;
            }
            assign = next;
        }
        p
    }

    fn levenberg_marquardt(&self, mut p: Params) -> Params {
        let d = self.dim() + 1;
        let np = self.k * d;
        let mut cost = self.sse(&p);
        let mut mu = 1e-3;
        let mut stalls = 0;
        for _ in 0..5000 {
            if cost < 1e-28 {
                break;
            }
            let mut jtj = DMatrix::zeros(np, np);
            let mut jtr = DVector::zeros(np);
            for j in 0..self.len() {
                let (val, w) = self.model(&p, j);
                let r = val - self.y[j];
                let mut row = DVector::zeros(np);
                for k in 0..self.k {
                    row[k * d] = w[k];
                    for l in 0..self.dim() {
                        row[k * d + l + 1] = w[k] * self.u[(j, l)];
                    }
                }
                jtj += &row * row.transpose();
                jtr += &row * r;
            }
            let mut improved = false;
            while mu < 1e12 {
                let mut a = jtj.clone();
                for i in 0..np {
                    a[(i, i)] += mu * (jtj[(i, i)] + 1e-12);
                }
                let Some(step) = a.lu().solve(&(-&jtr)) else {
                    mu *= 4.0;
                    continue;
                };
                let mut trial = p.clone();
                for k in 0..self.k {
                    for c in 0..d {
                        trial[(k, c)] += step[k * d + c];
                    }
                }
                let c = self.sse(&trial);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost;
                    p = trial;
                    cost = c;
                    mu = (mu / 3.0).max(1e-15);
                    stalls = if rel < 1e-12 { stalls + 1 } else { 0 };
                    improved = stalls < 20;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        p
    }
}
