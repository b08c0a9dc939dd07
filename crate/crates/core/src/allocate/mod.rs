//! Rate- and budget-constrained allocation of vaccines and antidotes.
//!
//! Vaccines lower `beta_i` within `[beta_lo, beta_hi]`, antidotes raise
//! `delta_i` within `[delta_lo, delta_hi]`. Two programs are offered:
//! - rate-constrained: reach `lambda_1(BA - D) <= -eps_bar` at minimum cost;
//! - budget-constrained: minimise `lambda_1(BA - D)` for a given spend.
//!
//! Both are built as geometric programs over the recovery-rate substitutions
//! `hat(delta)_i = Delta + 1 - delta_i`, with the antidote cost expressed in
//! `w_i = c_i - delta_i` (`c_i` is the cost's anchor) and linked by the
//! posynomial constraint `(w_i + Delta + 1 - c_i) / hat(delta)_i <= 1`.

mod cost;
mod program;
mod split;

pub use cost::{default_costs, fit_antidote_cost, fit_vax_cost, CostModel, NodeCost};
pub use program::{
    build_budget_gp, build_budget_gp_shifted, build_rate_gp, recover_rates, ProgramKind, SubstitutionRecord,
};
pub use split::{min_spend, solve_budget, solve_rate, split_by_support, Split};

use crate::error::{Error, Result};
use crate::gp::GpStatus;
use crate::netgraph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeBounds {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
}

impl NodeBounds {
    pub fn new(beta_lo: f64, beta_hi: f64, delta_lo: f64, delta_hi: f64) -> Result<Self> {
        let b = Self { beta_lo, beta_hi, delta_lo, delta_hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo > 0.0 && lo <= hi && hi.is_finite();
        if !ok(self.beta_lo, self.beta_hi) || !ok(self.delta_lo, self.delta_hi) {
            return Err(Error::invalid(format!("bounds need 0 < lo <= hi, got {self:?}")));
        }
        Ok(())
    }

    /// Cheapest setting: no vaccine, no antidote.
    pub fn cheapest(&self) -> (f64, f64) {
        (self.beta_hi, self.delta_lo)
    }

    /// Best achievable rates.
    pub fn strongest(&self) -> (f64, f64) {
        (self.beta_lo, self.delta_hi)
    }
}

pub(crate) fn check_bounds(n: usize, bounds: &[NodeBounds], costs: &CostModel) -> Result<()> {
    if bounds.len() != n || costs.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} node bounds and costs, got {} and {}",
            bounds.len(),
            costs.len()
        )));
    }
    bounds.iter().try_for_each(NodeBounds::validate)
}

/// Result of an allocation run, indexed by node id.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    /// Offset-adjusted spends `f_i(beta_i)` and `g_i(delta_i)`.
    pub vax_spend: Vec<f64>,
    pub antidote_spend: Vec<f64>,
    /// Spends before subtracting the cost offsets (raw posynomial values).
    pub vax_spend_raw: Vec<f64>,
    pub antidote_spend_raw: Vec<f64>,
    pub epsilon_achieved: f64,
    pub total_cost: f64,
    /// Effective eigenvalue recomputed from the recovered rates.
    pub lambda1_check: f64,
    pub status: GpStatus,
    /// Nodes assigned the cheapest setting outside the GP.
    pub fixed_nodes: Vec<NodeId>,
    pub iterations: usize,
}

impl Allocation {
    pub(crate) fn from_rates(beta: Vec<f64>, delta: Vec<f64>, costs: &CostModel, lambda1: f64) -> Self {
        let n = beta.len();
        let mut a = Allocation {
            vax_spend: vec![0.0; n],
            antidote_spend: vec![0.0; n],
            vax_spend_raw: vec![0.0; n],
            antidote_spend_raw: vec![0.0; n],
            beta,
            delta,
            epsilon_achieved: -lambda1,
            total_cost: 0.0,
            lambda1_check: lambda1,
            status: GpStatus::Optimal,
            fixed_nodes: Vec::new(),
            iterations: 0,
        };
        for i in 0..n {
            let c = costs.node(i);
            a.vax_spend_raw[i] = c.vax_raw(a.beta[i]);
            a.antidote_spend_raw[i] = c.antidote_raw(a.delta[i]);
            a.vax_spend[i] = a.vax_spend_raw[i] - c.vax_offset();
            a.antidote_spend[i] = a.antidote_spend_raw[i] - c.antidote_offset();
        }
        a.total_cost = a.vax_spend.iter().chain(&a.antidote_spend).sum();
        a
    }

    pub fn node_count(&self) -> usize {
        self.beta.len()
    }

    pub fn spend(&self, i: NodeId) -> f64 {
        self.vax_spend[i] + self.antidote_spend[i]
    }
}
