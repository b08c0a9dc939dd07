use nalgebra::{DMatrix, DVector};

use super::{GpProblem, Posynomial, VarId};
use crate::error::Result;

/// `F(y) = log sum_k exp(a_k . y + b_k)`, the image of a posynomial under
/// `y = log x`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    /// `(b_k, a_k)` with `a_k` sparse.
    terms: Vec<(f64, Vec<(VarId, f64)>)>,
    /// Variables touched by any term, sorted.
    support: Vec<VarId>,
}

/// Value, gradient and softmax weights of a [`LogSumExp`] at one point.
#[derive(Debug, Clone)]
pub struct LseEval {
    pub value: f64,
    /// Gradient on [`LogSumExp::support`] (same order).
    pub grad: Vec<f64>,
    weights: Vec<f64>,
}

impl LogSumExp {
    pub fn from_posynomial(p: &Posynomial) -> Self {
        let terms: Vec<(f64, Vec<(VarId, f64)>)> =
            p.terms().iter().map(|t| (t.coeff().ln(), t.exponents().to_vec())).collect();
        Self::from_terms(terms)
    }

    pub(crate) fn from_terms(terms: Vec<(f64, Vec<(VarId, f64)>)>) -> Self {
        let mut support: Vec<VarId> = terms.iter().flat_map(|(_, a)| a.iter().map(|&(v, _)| v)).collect();
        support.sort_unstable();
        support.dedup();
        Self { terms, support }
    }

    pub fn support(&self) -> &[VarId] {
        &self.support
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_affine(&self) -> bool {
        self.terms.len() == 1
    }

    /// Adds `coeff` times the variable `v` to the exponent of every term
    /// (used to build the phase-I program `F(y) - s`).
    pub(crate) fn with_shift_var(&self, v: VarId, coeff: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(b, a)| {
                let mut a = a.clone();
                a.push((v, coeff));
                (*b, a)
            })
            .collect();
        Self::from_terms(terms)
    }

    fn exponents(&self, y: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|(b, a)| b + a.iter().map(|&(v, e)| e * y[v]).sum::<f64>()).collect()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let z = self.exponents(y);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        zmax + z.iter().map(|&zk| (zk - zmax).exp()).sum::<f64>().ln()
    }

    pub fn evaluate(&self, y: &[f64]) -> LseEval {
        let z = self.exponents(y);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = z.iter().map(|&zk| (zk - zmax).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let mut grad = vec![0.0; self.support.len()];
        for ((_, a), &p) in self.terms.iter().zip(&w) {
            for &(v, e) in a {
                let k = self.support.binary_search(&v).expect("support covers all terms");
                grad[k] += p * e;
            }
        }
        LseEval { value: zmax + total.ln(), grad, weights: w }
    }

    /// Dense gradient of length `dim`.
    pub fn gradient(&self, y: &[f64], dim: usize) -> Vec<f64> {
        let ev = self.evaluate(y);
        let mut g = vec![0.0; dim];
        for (&v, &gv) in self.support.iter().zip(&ev.grad) {
            g[v] = gv;
        }
        g
    }

    /// `hess += scale * (sum_k p_k a_k a_k^T - g g^T)`.
    pub fn add_hessian(&self, ev: &LseEval, scale: f64, hess: &mut DMatrix<f64>) {
        if self.is_affine() {
            return;
        }
        for ((_, a), &p) in self.terms.iter().zip(&ev.weights) {
            let c = scale * p;
            for &(u, eu) in a {
                for &(v, ev_) in a {
                    hess[(u, v)] += c * eu * ev_;
                }
            }
        }
        for (i, &u) in self.support.iter().enumerate() {
            for (j, &v) in self.support.iter().enumerate() {
                hess[(u, v)] -= scale * ev.grad[i] * ev.grad[j];
            }
        }
    }

    /// `hess += scale * g g^T`.
    pub fn add_grad_outer(&self, ev: &LseEval, scale: f64, hess: &mut DMatrix<f64>) {
        for (i, &u) in self.support.iter().enumerate() {
            for (j, &v) in self.support.iter().enumerate() {
                hess[(u, v)] += scale * ev.grad[i] * ev.grad[j];
            }
        }
    }

    pub fn hessian(&self, y: &[f64], dim: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(dim, dim);
        self.add_hessian(&self.evaluate(y), 1.0, &mut h);
        h
    }
}

/// The convex program obtained from a GP:
/// minimise `F_0(y)` s.t. `F_i(y) <= 0` and `E y = g`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub dim: usize,
    pub objective: LogSumExp,
    pub inequalities: Vec<LogSumExp>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

/// Logarithmic change of variables `y = log x`. Box bounds are compiled into
/// monomial constraints first (see [`GpProblem::compiled_constraints`]).
pub fn log_transform(problem: &GpProblem) -> Result<ConvexProgram> {
    problem.validate()?;
    let dim = problem.num_variables();
    let (ineq, eq) = problem.compiled_constraints();
    let objective = LogSumExp::from_posynomial(problem.objective().expect("validated"));
    let inequalities = ineq.iter().map(LogSumExp::from_posynomial).collect();
    let mut eq_matrix = DMatrix::zeros(eq.len(), dim);
    let mut eq_rhs = DVector::zeros(eq.len());
    for (r, h) in eq.iter().enumerate() {
        for &(v, e) in h.exponents() {
            eq_matrix[(r, v)] = e;
        }
        eq_rhs[r] = -h.coeff().ln();
    }
    Ok(ConvexProgram { dim, objective, inequalities, eq_matrix, eq_rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Monomial;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn monomial_becomes_affine() {
        let m = Monomial::new(2.5, [(0, 3.0)]).unwrap();
        let f = LogSumExp::from_posynomial(&m.into());
        assert!(f.is_affine());
        let y = [0.7];
        assert!((f.value(&y) - (3.0 * 0.7 + 2.5f64.ln())).abs() < 1e-15);
        assert_eq!(f.hessian(&y, 1)[(0, 0)], 0.0);
    }

    #[test]
    fn symmetric_posynomial_at_origin() {
        let q = Posynomial::new(vec![Monomial::var(0), Monomial::new(1.0, [(0, -1.0)]).unwrap()]).unwrap();
        let f = LogSumExp::from_posynomial(&q);
        assert!((f.value(&[0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!(f.gradient(&[0.0], 1)[0].abs() < 1e-15);
    }

    fn random_posynomial(rng: &mut ChaCha8Rng, dim: usize, terms: usize) -> Posynomial {
        let t = (0..terms)
            .map(|_| {
                Monomial::new(rng.random_range(0.1..5.0), (0..dim).map(|v| (v, rng.random_range(-2.0..2.0))))
                    .unwrap()
            })
            .collect();
        Posynomial::new(t).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let dim = 4;
            let f = LogSumExp::from_posynomial(&random_posynomial(&mut rng, dim, 5));
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = f.gradient(&y, dim);
            let h = 1e-6;
            for v in 0..dim {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[v] += h;
                ym[v] -= h;
                let fd = (f.value(&yp) - f.value(&ym)) / (2.0 * h);
                assert!((fd - g[v]).abs() <= 1e-6 * g[v].abs().max(1.0), "{fd} vs {}", g[v]);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 3;
        let f = LogSumExp::from_posynomial(&random_posynomial(&mut rng, dim, 4));
        let y = [0.2, -0.4, 0.1];
        let hess = f.hessian(&y, dim);
        let h = 1e-6;
        for v in 0..dim {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[v] += h;
            ym[v] -= h;
            let gp = f.gradient(&yp, dim);
            let gm = f.gradient(&ym, dim);
            for u in 0..dim {
                let fd = (gp[u] - gm[u]) / (2.0 * h);
                assert!((fd - hess[(u, v)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn transform_encodes_equalities_and_boxes() {
        let mut p = GpProblem::new();
        let x = p.add_bounded_variable("x", 0.5, 2.0).unwrap();
        let y = p.add_variable("y");
        p.minimize(Monomial::var(x).into());
        p.add_eq(Monomial::new(4.0, [(y, 2.0)]).unwrap());
        let cp = log_transform(&p).unwrap();
        assert_eq!(cp.inequalities.len(), 2);
        assert_eq!(cp.eq_matrix[(0, y)], 2.0);
        assert!((cp.eq_rhs[0] + 4f64.ln()).abs() < 1e-15);
    }
}
