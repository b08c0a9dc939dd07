//! Spreading dynamics: the mean-field ODE, its linearisation, exact Markov
//! marginals on small graphs and an event-driven stochastic simulator.
//!
//! Node `i` is infected at rate `beta_i sum_j a_ij X_j` and recovers at rate
//! `delta_i`. The mean-field model is
//! `p_i' = (1 - p_i) beta_i sum_j a_ij p_j - delta_i p_i`.

mod markov;
pub mod ode;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netgraph::WeightedDigraph;
use ode::{integrate, Tolerance};

pub use markov::{exact_marginals, exact_marginals_on, simulate_stochastic, simulate_stochastic_on, MAX_EXACT_NODES};

pub const DEFAULT_SAVE_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicParams {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl EpidemicParams {
    pub fn new(beta: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if beta.len() != delta.len() {
            return Err(Error::invalid("beta and delta must have equal length"));
        }
        if beta.iter().chain(&delta).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("infection and recovery rates must be positive"));
        }
        Ok(Self { beta, delta })
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    fn check(&self, g: &WeightedDigraph) -> Result<()> {
        if self.len() != g.node_count() {
            return Err(Error::invalid(format!("{} rates for {} nodes", self.len(), g.node_count())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }
}

/// `n` equally spaced times from 0 to `t_end`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

fn check_probabilities(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::invalid(format!("state has length {}, expected {n}", p.len())));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    Ok(())
}

fn check_horizon(t_end: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("time horizon must be positive"));
    }
    Ok(())
}

fn rhs_into(g: &WeightedDigraph, params: &EpidemicParams, p: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let pressure: f64 = g.in_neighbors(i).iter().map(|&(j, a)| a * p[j]).sum();
        *o = (1.0 - p[i]) * params.beta[i] * pressure - params.delta[i] * p[i];
    }
}

fn linear_rhs_into(g: &WeightedDigraph, params: &EpidemicParams, p: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let pressure: f64 = g.in_neighbors(i).iter().map(|&(j, a)| a * p[j]).sum();
        *o = params.beta[i] * pressure - params.delta[i] * p[i];
    }
}

/// Mean-field right-hand side, node by node.
pub fn meanfield_rhs(g: &WeightedDigraph, params: &EpidemicParams, p: &[f64]) -> Result<Vec<f64>> {
    params.check(g)?;
    check_probabilities(p, g.node_count())?;
    let mut out = vec![0.0; p.len()];
    rhs_into(g, params, p, &mut out);
    Ok(out)
}

/// Mean-field right-hand side in matrix form `(BA - D) p - P B A p`.
pub fn meanfield_rhs_matrix(g: &WeightedDigraph, params: &EpidemicParams, p: &[f64]) -> Result<Vec<f64>> {
    params.check(g)?;
    check_probabilities(p, g.node_count())?;
    let ba = DMatrix::from_diagonal(&DVector::from_column_slice(&params.beta)) * g.adjacency();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&params.delta));
    let pv = DVector::from_column_slice(p);
    let pm = DMatrix::from_diagonal(&pv);
    let r = (&ba - d) * &pv - pm * (&ba * &pv);
    Ok(r.iter().copied().collect())
}

/// Nonlinear mean-field trajectory on [`DEFAULT_SAVE_POINTS`] uniform times.
pub fn integrate_meanfield(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    p0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_horizon(t_end)?;
    integrate_meanfield_on(g, params, p0, &uniform_grid(t_end, DEFAULT_SAVE_POINTS), tol)
}

pub fn integrate_meanfield_on(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    p0: &[f64],
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    params.check(g)?;
    check_probabilities(p0, g.node_count())?;
    let mut states = integrate(|_, p, dp| rhs_into(g, params, p, dp), p0, times, Tolerance::from_tol(tol))?;
    for s in &mut states {
        s.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    }
    Ok(Trajectory { times: times.to_vec(), states })
}

/// Linear system `p' = (BA - D) p`, an upper bound of the mean-field model.
pub fn integrate_linearized(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    p0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_horizon(t_end)?;
    integrate_linearized_on(g, params, p0, &uniform_grid(t_end, DEFAULT_SAVE_POINTS), tol)
}

pub fn integrate_linearized_on(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    p0: &[f64],
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    params.check(g)?;
    check_probabilities(p0, g.node_count())?;
    let states = integrate(|_, p, dp| linear_rhs_into(g, params, p, dp), p0, times, Tolerance::from_tol(tol))?;
    Ok(Trajectory { times: times.to_vec(), states })
}

/// Negated least-squares slope of `log ||p(t)||_2` over `t0 <= t <= t1`.
pub fn decay_rate_estimate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(traj.norms())
        .filter(|&(&t, nrm)| t >= window.0 && t <= window.1 && nrm > 0.0)
        .map(|(&t, nrm)| (t, nrm.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("decay window needs at least two nonzero samples"));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::invalid(format!("trajectory does not decay over the window (slope {slope})")));
    }
    Ok(-slope)
}
