use std::collections::BTreeSet;

use super::program::{build_budget_gp, build_rate_gp, recover_rates};
use super::{check_bounds, Allocation, CostModel, NodeBounds};
use crate::error::{Error, Result};
use crate::gp::{solve_with, SolverOptions};
use crate::netgraph::{strongly_connected_components, zero_support_set, NodeId, WeightedDigraph};
use crate::spectral::{block_effective_eigenvalue, effective_eigenvalue, PowerOptions};

/// Nodes with zero eigenvector centrality receive the cheapest setting; the
/// remaining nodes form the reduced program.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub fixed: Vec<NodeId>,
    pub free: Vec<NodeId>,
    /// Spend of the fixed nodes at their cheapest setting.
    pub fixed_spend: f64,
    /// Budget left for the free nodes, when a budget is given.
    pub remaining_budget: Option<f64>,
}

pub fn min_spend(bounds: &[NodeBounds], costs: &CostModel, nodes: &[NodeId]) -> f64 {
    nodes.iter().map(|&i| costs.node(i).cheapest_spend(&bounds[i])).sum()
}

fn budget_slack(budget: f64) -> f64 {
    1e-9 * budget.abs().max(1.0)
}

pub fn split_by_support(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    budget: Option<f64>,
) -> Result<Split> {
    check_bounds(g.node_count(), bounds, costs)?;
    let (fixed, free) = if g.edge_count() == 0 {
        (Vec::new(), (0..g.node_count()).collect())
    } else {
        let s = zero_support_set(g)?;
        (s.zero_nodes, s.positive_nodes)
    };
    make_split(bounds, costs, fixed, free, budget)
}

fn make_split(
    bounds: &[NodeBounds],
    costs: &CostModel,
    fixed: Vec<NodeId>,
    free: Vec<NodeId>,
    budget: Option<f64>,
) -> Result<Split> {
    let fixed_spend = min_spend(bounds, costs, &fixed);
    let remaining_budget = budget.map(|c| c - fixed_spend);
    if let (Some(c), Some(rest)) = (budget, remaining_budget) {
        let floor = min_spend(bounds, costs, &free);
        if rest < floor - budget_slack(c) {
            return Err(Error::Infeasible(format!(
                "budget {c} is below the minimum spend {}",
                floor + fixed_spend
            )));
        }
    }
    Ok(Split { fixed, free, fixed_spend, remaining_budget })
}

fn cheapest_rates(bounds: &[NodeBounds]) -> (Vec<f64>, Vec<f64>) {
    bounds.iter().map(|b| b.cheapest()).unzip()
}

/// SCCs lying entirely inside `fixed`.
fn fixed_classes(g: &WeightedDigraph, fixed: &[NodeId]) -> Vec<Vec<NodeId>> {
    let set: BTreeSet<NodeId> = fixed.iter().copied().collect();
    strongly_connected_components(g).into_iter().filter(|c| c.iter().all(|v| set.contains(v))).collect()
}

/// Moves every fixed class whose block eigenvalue at the cheapest setting
/// exceeds `limit` into the free set. Returns whether anything moved.
fn release_violators(g: &WeightedDigraph, bounds: &[NodeBounds], split: &mut Split, limit: f64) -> Result<bool> {
    let (beta, delta) = cheapest_rates(bounds);
    let opts = PowerOptions::for_size(g.node_count());
    let mut moved = BTreeSet::new();
    for class in fixed_classes(g, &split.fixed) {
        if block_effective_eigenvalue(g, &beta, &delta, &class, &opts)? > limit {
            moved.extend(class);
        }
    }
    if moved.is_empty() {
        return Ok(false);
    }
    split.fixed.retain(|v| !moved.contains(v));
    split.free.extend(moved);
    split.free.sort_unstable();
    Ok(true)
}

/// Allocation on the induced subgraph of `free`, or `None` for the cheapest
/// assignment.
type Partial = Option<Allocation>;

fn assemble(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    split: &Split,
    partial: &Partial,
) -> Result<Allocation> {
    let (mut beta, mut delta) = cheapest_rates(bounds);
    if let Some(sub) = partial {
        for (k, &v) in split.free.iter().enumerate() {
            beta[v] = sub.beta[k];
            delta[v] = sub.delta[k];
        }
    }
    let lambda1 = effective_eigenvalue(g, &beta, &delta)?;
    let mut a = Allocation::from_rates(beta, delta, costs, lambda1);
    if let Some(sub) = partial {
        a.status = sub.status;
        a.iterations = sub.iterations;
    }
    a.fixed_nodes = split.fixed.clone();
    Ok(a)
}

fn subproblem(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    free: &[NodeId],
) -> (WeightedDigraph, Vec<NodeBounds>, CostModel) {
    let (sub, _) = g.induced_subgraph(free);
    let b = free.iter().map(|&v| bounds[v]).collect();
    (sub, b, costs.subset(free))
}

/// Cheapest allocation reaching decay rate `eps_bar` on any digraph.
///
/// Zero-support classes stay at their cheapest setting unless that setting
/// alone violates the target, in which case they join the program.
pub fn solve_rate(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    eps_bar: f64,
    opts: &SolverOptions,
) -> Result<Allocation> {
    let mut split = split_by_support(g, bounds, costs, None)?;
    release_violators(g, bounds, &mut split, -eps_bar)?;
    let (sub, sb, sc) = subproblem(g, bounds, costs, &split.free);
    let (p, record) = build_rate_gp(&sub, &sb, &sc, eps_bar)?;
    let sol = solve_with(&p, opts)?;
    let partial = Some(recover_rates(&sol, &record)?);
    let a = assemble(g, bounds, costs, &split, &partial)?;
    if a.lambda1_check > -eps_bar + 1e-6 {
        return Err(Error::Consistency(format!(
            "recovered allocation has eigenvalue {} above the target {}",
            a.lambda1_check, -eps_bar
        )));
    }
    Ok(a)
}

/// Allocation maximising the decay rate for total spend `budget` on any
/// digraph.
///
/// Zero-support classes start at their cheapest setting; a class whose
/// cheapest eigenvalue exceeds the one achieved on the free part joins the
/// program and the reduced problem is solved again.
pub fn solve_budget(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    budget: f64,
    opts: &SolverOptions,
) -> Result<Allocation> {
    if !budget.is_finite() {
        return Err(Error::invalid("budget must be finite"));
    }
    let mut split = split_by_support(g, bounds, costs, Some(budget))?;
    loop {
        let rest = split.remaining_budget.expect("budget given");
        let floor = min_spend(bounds, costs, &split.free);
        let partial = if rest <= floor + budget_slack(budget) {
            None
        } else {
            let (sub, sb, sc) = subproblem(g, bounds, costs, &split.free);
            let (p, record) = build_budget_gp(&sub, &sb, &sc, rest)?;
            let sol = solve_with(&p, opts)?;
            Some(recover_rates(&sol, &record)?)
        };
        let achieved = match &partial {
            Some(a) => a.lambda1_check,
            None => {
                let (sub, sb, _) = subproblem(g, bounds, costs, &split.free);
                let (b, d) = cheapest_rates(&sb);
                effective_eigenvalue(&sub, &b, &d)?
            }
        };
        if !release_violators(g, bounds, &mut split, achieved + 1e-9)? {
            return assemble(g, bounds, costs, &split, &partial);
        }
        split = make_split(bounds, costs, split.fixed, split.free, Some(budget))?;
    }
}
