//! Browser bindings for the allocation demo. Every export takes plain
//! numbers and returns a JSON string, or throws the error message.

use serde_json::{json, Value};
use spreadguard::allocate::{
    default_costs, solve_budget, solve_rate, Allocation, CostModel, NodeBounds,
};
use spreadguard::dynamics::{integrate_meanfield, EpidemicParams};
use spreadguard::gp::SolverOptions;
use spreadguard::netgraph::{
    pagerank, random_strongly_connected, scale_to_radius, weighted_in_degree, WeightedDigraph,
    PAGERANK_ALPHA,
};
use spreadguard::spectral::effective_eigenvalue;
use spreadguard::Error;
use wasm_bindgen::prelude::*;

const BOUNDS: (f64, f64, f64, f64) = (4.2e-3, 2.1e-2, 0.1, 0.5);

struct Demo {
    g: WeightedDigraph,
    bounds: Vec<NodeBounds>,
    costs: CostModel,
}

impl Demo {
    fn new(nodes: usize, edges: usize, seed: u64, rho: f64) -> Result<Self, Error> {
        let g = scale_to_radius(&random_strongly_connected(nodes, edges, seed)?, rho)?;
        let (bl, bh, dl, dh) = BOUNDS;
        let bounds = vec![NodeBounds::new(bl, bh, dl, dh)?; nodes];
        let costs = default_costs(&bounds)?;
        Ok(Self { g, bounds, costs })
    }

    fn rate(&self, eps_bar: f64) -> Result<Allocation, Error> {
        solve_rate(
            &self.g,
            &self.bounds,
            &self.costs,
            eps_bar,
            &SolverOptions::default(),
        )
    }

    fn cheapest(&self) -> EpidemicParams {
        let (beta, delta) = self.bounds.iter().map(NodeBounds::cheapest).unzip();
        EpidemicParams::new(beta, delta).expect("bounds are valid rates")
    }
}

fn respond(r: Result<Value, Error>) -> Result<String, JsValue> {
    r.map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Best decay rate for budgets `factor * C`, where C is the cheapest
/// cost of reaching `eps_bar`.
#[wasm_bindgen]
pub fn tradeoff(
    nodes: usize,
    edges: usize,
    seed: u64,
    rho: f64,
    eps_bar: f64,
    factors: Vec<f64>,
) -> Result<String, JsValue> {
    respond((|| {
        let d = Demo::new(nodes, edges, seed, rho)?;
        let base = d.rate(eps_bar)?;
        let mut eps = Vec::with_capacity(factors.len());
        for &f in &factors {
            let a = solve_budget(
                &d.g,
                &d.bounds,
                &d.costs,
                f * base.total_cost,
                &SolverOptions::default(),
            )?;
            eps.push(a.epsilon_achieved);
        }
        let cheap = d.cheapest();
        let lambda0 = effective_eigenvalue(&d.g, &cheap.beta, &cheap.delta)?;
        Ok(
            json!({ "rate_cost": base.total_cost, "lambda_unprotected": lambda0, "factors": factors, "epsilon": eps }),
        )
    })())
}

/// Per-node spends of the cheapest allocation reaching `eps_bar`, with
/// the node centralities for scatter plots.
#[wasm_bindgen]
pub fn allocation(
    nodes: usize,
    edges: usize,
    seed: u64,
    rho: f64,
    eps_bar: f64,
) -> Result<String, JsValue> {
    respond((|| {
        let d = Demo::new(nodes, edges, seed, rho)?;
        let a = d.rate(eps_bar)?;
        Ok(json!({
            "total_cost": a.total_cost,
            "lambda1": a.lambda1_check,
            "vax": a.vax_spend,
            "antidote": a.antidote_spend,
            "beta": a.beta,
            "delta": a.delta,
            "in_degree": weighted_in_degree(&d.g),
            "pagerank": pagerank(&d.g, PAGERANK_ALPHA)?,
        }))
    })())
}

/// Mean-field infection norm from every node infected with probability
/// `p0`, before and after the rate allocation.
#[wasm_bindgen]
pub fn trajectories(
    nodes: usize,
    edges: usize,
    seed: u64,
    rho: f64,
    eps_bar: f64,
    p0: f64,
    t_end: f64,
) -> Result<String, JsValue> {
    respond((|| {
        let d = Demo::new(nodes, edges, seed, rho)?;
        let a = d.rate(eps_bar)?;
        let start = vec![p0; nodes];
        let before = integrate_meanfield(&d.g, &d.cheapest(), &start, t_end, 1e-8)?;
        let after = integrate_meanfield(
            &d.g,
            &EpidemicParams::new(a.beta, a.delta)?,
            &start,
            t_end,
            1e-8,
        )?;
        Ok(json!({ "t": before.times, "before": before.norms(), "after": after.norms() }))
    })())
}
