//! Geometric programming: monomials, posynomials, standard-form problems,
//! the logarithmic change of variables and an interior-point solver.
//!
//! A GP minimises a posynomial subject to `q_i(x) <= 1` (posynomials) and
//! `h_i(x) = 1` (monomials) over `x > 0`. With `y = log x` every posynomial
//! becomes a log-sum-exp of affine functions, which is convex.

mod fit;
mod solver;
mod transform;

use std::fmt;
use std::ops::{Add, Div, Mul};

use crate::error::{Error, Result};

pub use fit::{fit_posynomial, PosynomialFit};
pub use solver::{solve, solve_with, SolverOptions};
pub use transform::{log_transform, ConvexProgram, LogSumExp};

pub type VarId = usize;

/// `coeff * prod_v x_v^{e_v}`; exponents are kept sorted by variable with
/// zero exponents dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    coeff: f64,
    exponents: Vec<(VarId, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: impl IntoIterator<Item = (VarId, f64)>) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::invalid(format!("monomial coefficient {coeff} must be positive")));
        }
        let mut exps: Vec<(VarId, f64)> = exponents.into_iter().collect();
        if exps.iter().any(|(_, e)| !e.is_finite()) {
            return Err(Error::invalid("monomial exponents must be finite"));
        }
        exps.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(exps.len());
        for (v, e) in exps {
            match merged.last_mut() {
                Some((lv, le)) if *lv == v => *le += e,
                _ => merged.push((v, e)),
            }
        }
        merged.retain(|&(_, e)| e != 0.0);
        Ok(Self { coeff, exponents: merged })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(c, [])
    }

    /// The monomial `x_v`.
    pub fn var(v: VarId) -> Self {
        Self { coeff: 1.0, exponents: vec![(v, 1.0)] }
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponents(&self) -> &[(VarId, f64)] {
        &self.exponents
    }

    pub fn exponent(&self, v: VarId) -> f64 {
        self.exponents.iter().find(|&&(u, _)| u == v).map_or(0.0, |&(_, e)| e)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.coeff * c, self.exponents.iter().copied())
    }

    pub fn powf(&self, p: f64) -> Result<Self> {
        Self::new(self.coeff.powf(p), self.exponents.iter().map(|&(v, e)| (v, e * p)))
    }

    pub fn recip(&self) -> Self {
        Self { coeff: 1.0 / self.coeff, exponents: self.exponents.iter().map(|&(v, e)| (v, -e)).collect() }
    }

    pub(crate) fn max_var(&self) -> Option<VarId> {
        self.exponents.last().map(|&(v, _)| v)
    }

    /// Log of the value: `log c + sum_v e_v log x_v`.
    pub fn log_eval(&self, x: &[f64]) -> f64 {
        self.coeff.ln() + self.exponents.iter().map(|&(v, e)| e * x[v].ln()).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_positive(x)?;
        Ok(self.coeff * self.exponents.iter().map(|&(v, e)| x[v].powf(e)).product::<f64>())
    }
}

impl Mul for &Monomial {
    type Output = Monomial;
    fn mul(self, rhs: &Monomial) -> Monomial {
        Monomial::new(self.coeff * rhs.coeff, self.exponents.iter().chain(&rhs.exponents).copied())
            .expect("product of valid monomials is valid")
    }
}

impl Mul for Monomial {
    type Output = Monomial;
    fn mul(self, rhs: Monomial) -> Monomial {
        &self * &rhs
    }
}

impl Div for &Monomial {
    type Output = Monomial;
    fn div(self, rhs: &Monomial) -> Monomial {
        self * &rhs.recip()
    }
}

impl Div for Monomial {
    type Output = Monomial;
    fn div(self, rhs: Monomial) -> Monomial {
        &self / &rhs
    }
}

fn check_positive(x: &[f64]) -> Result<()> {
    if x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("GP variables must be positive"));
    }
    Ok(())
}

/// A nonempty sum of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("posynomial needs at least one term"));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_positive(x)?;
        Ok(self.terms.iter().map(|t| t.eval(x).expect("checked")).sum())
    }

    /// Multiplies every term by a monomial (e.g. division by `lambda * u_i`).
    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Self { terms: self.terms.iter().map(|t| t * m).collect() }
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Ok(Self { terms: self.terms.iter().map(|t| t.scale(c)).collect::<Result<_>>()? })
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub(crate) fn max_var(&self) -> Option<VarId> {
        self.terms.iter().filter_map(Monomial::max_var).max()
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }
}

impl Add for Posynomial {
    type Output = Posynomial;
    fn add(mut self, rhs: Posynomial) -> Posynomial {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Add<Monomial> for Posynomial {
    type Output = Posynomial;
    fn add(mut self, rhs: Monomial) -> Posynomial {
        self.terms.push(rhs);
        self
    }
}

impl fmt::Display for Posynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coeff)?;
            for &(v, e) in &t.exponents {
                write!(f, "*x{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

/// Standard-form GP. Inequalities mean `q(x) <= 1`, equalities `h(x) = 1`.
/// The objective is a posynomial plus a constant that does not take part in
/// the solve and is added back when reporting.
#[derive(Debug, Clone)]
pub struct GpProblem {
    variables: Vec<Variable>,
    objective: Option<Posynomial>,
    objective_offset: f64,
    inequalities: Vec<Posynomial>,
    equalities: Vec<Monomial>,
}

impl Default for GpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl GpProblem {
    pub fn new() -> Self {
        Self { variables: Vec::new(), objective: None, objective_offset: 0.0, inequalities: Vec::new(), equalities: Vec::new() }
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(Variable { name: name.into(), lo: None, hi: None });
        self.variables.len() - 1
    }

    /// Adds a variable with box bounds `0 < lo <= x <= hi`.
    pub fn add_bounded_variable(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> Result<VarId> {
        let v = self.add_variable(name);
        self.set_bounds(v, Some(lo), Some(hi))?;
        Ok(v)
    }

    pub fn set_bounds(&mut self, v: VarId, lo: Option<f64>, hi: Option<f64>) -> Result<()> {
        for b in lo.iter().chain(hi.iter()) {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("bound {b} on {} must be positive", self.variables[v].name)));
            }
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(Error::invalid(format!("empty box [{l}, {h}] on {}", self.variables[v].name)));
            }
        }
        self.variables[v].lo = lo;
        self.variables[v].hi = hi;
        Ok(())
    }

    pub fn minimize(&mut self, objective: Posynomial) {
        self.objective = Some(objective);
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn add_le(&mut self, q: Posynomial) {
        self.inequalities.push(q);
    }

    pub fn add_eq(&mut self, h: Monomial) {
        self.equalities.push(h);
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn objective(&self) -> Option<&Posynomial> {
        self.objective.as_ref()
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn inequalities(&self) -> &[Posynomial] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Monomial] {
        &self.equalities
    }

    /// Inequalities and equalities with box bounds compiled into monomial
    /// constraints (`x/hi <= 1`, `lo/x <= 1`, or `x/lo = 1` for a degenerate box).
    pub fn compiled_constraints(&self) -> (Vec<Posynomial>, Vec<Monomial>) {
        let mut ineq = self.inequalities.clone();
        let mut eq = self.equalities.clone();
        for (v, var) in self.variables.iter().enumerate() {
            match (var.lo, var.hi) {
                (Some(l), Some(h)) if (h - l).abs() <= 1e-14 * h => {
                    eq.push(Monomial::new(1.0 / l, [(v, 1.0)]).expect("positive bound"));
                }
                (lo, hi) => {
                    if let Some(h) = hi {
                        ineq.push(Monomial::new(1.0 / h, [(v, 1.0)]).expect("positive bound").into());
                    }
                    if let Some(l) = lo {
                        ineq.push(Monomial::new(l, [(v, -1.0)]).expect("positive bound").into());
                    }
                }
            }
        }
        (ineq, eq)
    }

    /// Checks well-formedness: an objective exists, variable ids are in
    /// range and every variable appears somewhere.
    pub fn validate(&self) -> Result<()> {
        let objective = self.objective.as_ref().ok_or_else(|| Error::invalid("GP has no objective"))?;
        let n = self.variables.len();
        if n == 0 {
            return Err(Error::invalid("GP has no variables"));
        }
        let mut used = vec![false; n];
        let mut mark = |m: &Monomial| -> Result<()> {
            for &(v, _) in m.exponents() {
                if v >= n {
                    return Err(Error::invalid(format!("variable id {v} out of range")));
                }
                used[v] = true;
            }
            Ok(())
        };
        for t in objective.terms().iter().chain(self.inequalities.iter().flat_map(|q| q.terms())) {
            mark(t)?;
        }
        for h in &self.equalities {
            mark(h)?;
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!("variable {} is not referenced", self.variables[v].name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl fmt::Display for GpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GpStatus::Optimal => "optimal",
            GpStatus::Infeasible => "infeasible",
            GpStatus::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone)]
pub struct GpSolution {
    pub x_star: Vec<f64>,
    /// Value of the objective posynomial at `x_star` (offset excluded).
    pub objective_value: f64,
    pub objective_offset: f64,
    pub status: GpStatus,
    /// Infinity norm of the Lagrangian gradient in log space.
    pub kkt_residual: f64,
    /// Surrogate duality gap `-sum_i z_i Q_i(y)`.
    pub duality_gap: f64,
    /// Multipliers of the compiled inequalities (user inequalities first,
    /// then box bounds in variable order).
    pub ineq_duals: Vec<f64>,
    /// Log-space values `Q_i(y*)` of the compiled inequalities.
    pub ineq_values: Vec<f64>,
    pub iterations: usize,
}

impl GpSolution {
    /// Objective with the constant offset added back.
    pub fn reported_objective(&self) -> f64 {
        self.objective_value + self.objective_offset
    }

    pub fn is_optimal(&self) -> bool {
        self.status == GpStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_eval() {
        let h = Monomial::new(3.0, [(0, 1.0)]).unwrap();
        assert_eq!(h.eval(&[2.0]).unwrap(), 6.0);
    }

    #[test]
    fn posynomial_eval() {
        let q = Posynomial::new(vec![Monomial::new(1.0, [(0, -1.0)]).unwrap(), Monomial::var(0)]).unwrap();
        assert_eq!(q.eval(&[1.0]).unwrap(), 2.0);
        let r = Posynomial::from(Monomial::new(2.0, [(0, 0.5), (1, -1.3)]).unwrap());
        let expected = 2.0 * 2.0 * 2f64.powf(-1.3);
        assert!((r.eval(&[4.0, 2.0]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 1.6245).abs() < 1e-4);
    }

    #[test]
    fn eval_rejects_nonpositive_input() {
        let q = Posynomial::from(Monomial::var(0));
        assert!(q.eval(&[0.0]).is_err());
        assert!(q.eval(&[-1.0]).is_err());
    }

    #[test]
    fn monomial_algebra_merges_exponents() {
        let a = Monomial::new(2.0, [(1, 1.0), (0, 2.0)]).unwrap();
        let b = Monomial::new(0.5, [(0, -2.0), (2, 1.0)]).unwrap();
        let p = &a * &b;
        assert_eq!(p.coeff(), 1.0);
        assert_eq!(p.exponents(), &[(1, 1.0), (2, 1.0)]);
        let q = &a / &a;
        assert!(q.exponents().is_empty());
        assert!(Monomial::new(0.0, []).is_err());
        assert!(Monomial::new(1.0, [(0, f64::NAN)]).is_err());
    }

    #[test]
    fn validation_catches_unused_variables_and_bad_boxes() {
        let mut p = GpProblem::new();
        let x = p.add_variable("x");
        let _y = p.add_variable("y");
        p.minimize(Monomial::var(x).into());
        assert!(p.validate().is_err());
        assert!(p.set_bounds(x, Some(2.0), Some(1.0)).is_err());
        assert!(p.set_bounds(x, Some(0.0), None).is_err());
    }

    #[test]
    fn degenerate_box_becomes_equality() {
        let mut p = GpProblem::new();
        let x = p.add_bounded_variable("x", 0.3, 0.3).unwrap();
        let y = p.add_bounded_variable("y", 0.1, 0.4).unwrap();
        p.minimize((Monomial::var(x) * Monomial::var(y)).into());
        let (ineq, eq) = p.compiled_constraints();
        assert_eq!(eq.len(), 1);
        assert_eq!(ineq.len(), 2);
    }
}
