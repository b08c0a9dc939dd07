use super::{check_bounds, Allocation, CostModel, NodeBounds};
use crate::error::{Error, Result};
use crate::gp::{GpProblem, GpSolution, GpStatus, Monomial, Posynomial, VarId};
use crate::netgraph::{strongly_connected_components, NodeId, WeightedDigraph};
use crate::spectral::effective_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProgramKind {
    /// Minimise cost subject to decay rate at least `eps_bar`.
    Rate { eps_bar: f64 },
    /// Minimise the eigenvalue subject to total spend at most `budget`.
    Budget { budget: f64 },
}

/// How GP variables map back to physical rates.
#[derive(Debug, Clone)]
pub struct SubstitutionRecord {
    pub kind: ProgramKind,
    pub graph: WeightedDigraph,
    pub bounds: Vec<NodeBounds>,
    pub costs: CostModel,
    /// `Delta + 1`; recovery rates are `delta_i = shift - x[delta_sub[i]]`.
    pub shift: f64,
    pub beta: Vec<VarId>,
    pub delta_sub: Vec<VarId>,
    /// Antidote cost variable `w_i = anchor_i - delta_i`, absent when the
    /// antidote cost is constant.
    pub w: Vec<Option<VarId>>,
    /// Eigenvector variables; only nodes in an SCC of size at least two get one.
    pub u: Vec<Option<VarId>>,
    /// Eigenvalue variable of the budget program.
    pub lambda: Option<VarId>,
    /// Sum of all cost offsets.
    pub offset_total: f64,
    /// SCCs of the graph; each gets its own spectral constraints.
    pub blocks: Vec<Vec<NodeId>>,
}

impl SubstitutionRecord {
    pub fn delta(&self, sol: &GpSolution, i: NodeId) -> f64 {
        self.shift - sol.x_star[self.delta_sub[i]]
    }

    /// `lambda* - (Delta + 1)` of a solved budget program.
    pub fn gp_eigenvalue(&self, sol: &GpSolution) -> Option<f64> {
        self.lambda.map(|l| sol.x_star[l] - self.shift)
    }

    /// Number of constraint rows of each kind:
    /// `(spectral, antidote link, box, equality)`.
    pub fn census(&self, p: &GpProblem) -> (usize, usize, usize, usize) {
        let n = self.beta.len();
        let links = self.w.iter().flatten().count();
        let boxes: usize = p.variables().iter().map(|v| v.lo.is_some() as usize + v.hi.is_some() as usize).sum();
        (n, links, boxes, p.equalities().len())
    }
}

fn lift(p: &Posynomial, target: VarId) -> Posynomial {
    let terms = p
        .terms()
        .iter()
        .map(|m| Monomial::new(m.coeff(), m.exponents().iter().map(|&(_, e)| (target, e))).expect("lifted term stays valid"))
        .collect();
    Posynomial::new(terms).expect("nonempty")
}

fn self_loop(g: &WeightedDigraph, i: NodeId) -> f64 {
    g.in_neighbors(i).iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, w)| w)
}

/// Variables, boxes, antidote links and per-block spectral constraints
/// `(beta_i sum_j a_ij u_j + hat(delta)_i u_i) / (den u_i) <= 1` shared by both
/// programs. Returns the problem with the total cost posynomial (offsets
/// excluded) and the record.
fn build_common(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    kind: ProgramKind,
    shift: f64,
    denominator: impl FnOnce(&mut GpProblem) -> Monomial,
) -> Result<(GpProblem, Posynomial, SubstitutionRecord)> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::invalid("allocation needs at least one node"));
    }
    let mut p = GpProblem::new();
    let mut beta = Vec::with_capacity(n);
    let mut delta_sub = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let b = &bounds[i];
        let label = g.label(i);
        beta.push(p.add_bounded_variable(format!("beta[{label}]"), b.beta_lo, b.beta_hi)?);
        delta_sub.push(p.add_bounded_variable(format!("dsub[{label}]"), shift - b.delta_hi, shift - b.delta_lo)?);
        let constant = costs.node(i).antidote_posynomial().max_var().is_none();
        w.push((!constant).then(|| p.add_variable(format!("w[{label}]"))));
    }
    let den = denominator(&mut p);
    let blocks = strongly_connected_components(g);
    let mut u = vec![None; n];
    for block in &blocks {
        if block.len() >= 2 {
            for &i in block {
                u[i] = Some(p.add_variable(format!("u[{}]", g.label(i))));
            }
            // fixes the scale of the block's eigenvector
            p.add_eq(Monomial::var(u[block[0]].expect("just added")));
        }
    }

    let mut block_of = vec![0; n];
    for (k, block) in blocks.iter().enumerate() {
        for &i in block {
            block_of[i] = k;
        }
    }
    for i in 0..n {
        let mut terms = Vec::new();
        match u[i] {
            Some(ui) => {
                for &(j, a) in g.in_neighbors(i) {
                    if block_of[j] != block_of[i] {
                        continue;
                    }
                    let m = if j == i {
                        Monomial::new(a, [(beta[i], 1.0)])?
                    } else {
                        Monomial::new(a, [(beta[i], 1.0), (u[j].expect("same block"), 1.0), (ui, -1.0)])?
                    };
                    terms.push(&m / &den);
                }
            }
            None => {
                let a = self_loop(g, i);
                if a > 0.0 {
                    terms.push(&Monomial::new(a, [(beta[i], 1.0)])? / &den);
                }
            }
        }
        terms.push(&Monomial::var(delta_sub[i]) / &den);
        p.add_le(Posynomial::new(terms)?);
    }

    for i in 0..n {
        let Some(wi) = w[i] else { continue };
        let k = shift - costs.node(i).anchor();
        if k < -1e-12 * shift {
            return Err(Error::invalid(format!(
                "antidote anchor {} of node {} exceeds Delta + 1 = {shift}",
                costs.node(i).anchor(),
                g.label(i)
            )));
        }
        let mut terms = vec![Monomial::new(1.0, [(wi, 1.0), (delta_sub[i], -1.0)])?];
        if k > 0.0 {
            terms.push(Monomial::new(k, [(delta_sub[i], -1.0)])?);
        }
        p.add_le(Posynomial::new(terms)?);
    }

    let mut cost_terms = Vec::new();
    let mut offset_total = 0.0;
    for i in 0..n {
        let c = costs.node(i);
        cost_terms.extend(lift(c.vax_posynomial(), beta[i]).terms().iter().cloned());
        offset_total += c.vax_offset() + c.antidote_offset();
        match w[i] {
            Some(wi) => cost_terms.extend(lift(c.antidote_posynomial(), wi).terms().iter().cloned()),
            None => cost_terms.extend(c.antidote_posynomial().terms().iter().cloned()),
        }
    }
    let record = SubstitutionRecord {
        kind,
        graph: g.clone(),
        bounds: bounds.to_vec(),
        costs: costs.clone(),
        shift,
        beta,
        delta_sub,
        w,
        u,
        lambda: None,
        offset_total,
        blocks,
    };
    Ok((p, Posynomial::new(cost_terms)?, record))
}

fn max_delta_hi(bounds: &[NodeBounds]) -> f64 {
    bounds.iter().map(|b| b.delta_hi).fold(0.0, f64::max)
}

/// Rate-constrained program: minimise total cost subject to
/// `lambda_1(BA - D) <= -eps_bar`, with `Delta = max(eps_bar, max delta_hi)`.
///
/// Fails with [`Error::Infeasible`] when even the strongest rates miss the
/// target.
pub fn build_rate_gp(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    eps_bar: f64,
) -> Result<(GpProblem, SubstitutionRecord)> {
    check_bounds(g.node_count(), bounds, costs)?;
    if !(eps_bar > 0.0 && eps_bar.is_finite()) {
        return Err(Error::invalid("target decay rate must be positive"));
    }
    let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.iter().map(|b| b.strongest()).unzip();
    let best = effective_eigenvalue(g, &lo, &hi)?;
    if best > -eps_bar {
        return Err(Error::Infeasible(format!(
            "target decay rate {eps_bar} unreachable: the strongest allocation only reaches {}",
            -best
        )));
    }
    let delta = eps_bar.max(max_delta_hi(bounds));
    let shift = delta + 1.0;
    let den = shift - eps_bar;
    let (mut p, cost, record) = build_common(g, bounds, costs, ProgramKind::Rate { eps_bar }, shift, |_| {
        Monomial::constant(den).expect("positive")
    })?;
    p.minimize(cost);
    p.set_objective_offset(-record.offset_total);
    Ok((p, record))
}

/// Budget-constrained program: minimise `lambda` subject to the spectral
/// constraints with `Delta = max delta_hi` and total spend at most `budget`.
pub fn build_budget_gp(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    budget: f64,
) -> Result<(GpProblem, SubstitutionRecord)> {
    build_budget_gp_shifted(g, bounds, costs, budget, 0.0)
}

/// [`build_budget_gp`] with `Delta` enlarged by `extra >= 0`.
pub fn build_budget_gp_shifted(
    g: &WeightedDigraph,
    bounds: &[NodeBounds],
    costs: &CostModel,
    budget: f64,
    extra: f64,
) -> Result<(GpProblem, SubstitutionRecord)> {
    check_bounds(g.node_count(), bounds, costs)?;
    if !(extra >= 0.0 && extra.is_finite() && budget.is_finite()) {
        return Err(Error::invalid("budget and shift must be finite, shift nonnegative"));
    }
    let floor: f64 = (0..g.node_count()).map(|i| costs.node(i).cheapest_spend(&bounds[i])).sum();
    if budget < floor - 1e-9 * floor.abs().max(1.0) {
        return Err(Error::Infeasible(format!("budget {budget} is below the minimum spend {floor}")));
    }
    let shift = max_delta_hi(bounds) + extra + 1.0;
    let mut lambda = None;
    let (mut p, cost, mut record) =
        build_common(g, bounds, costs, ProgramKind::Budget { budget }, shift, |p| {
            let l = p.add_variable("lambda");
            lambda = Some(l);
            Monomial::var(l)
        })?;
    let adjusted = budget + record.offset_total;
    if adjusted <= 0.0 {
        return Err(Error::Infeasible(format!("offset-adjusted budget {adjusted} is not positive")));
    }
    p.add_le(cost.scale(1.0 / adjusted)?);
    let l = lambda.expect("denominator adds lambda");
    p.minimize(Monomial::var(l).into());
    record.lambda = Some(l);
    Ok((p, record))
}

/// Inverts the substitutions of a solved program and recomputes the
/// effective eigenvalue of the recovered rates.
pub fn recover_rates(sol: &GpSolution, record: &SubstitutionRecord) -> Result<Allocation> {
    match sol.status {
        GpStatus::Optimal => {}
        GpStatus::Infeasible => return Err(Error::Infeasible("geometric program has no feasible point".into())),
        GpStatus::MaxIter => {
            return Err(Error::NoConvergence(format!(
                "interior-point method stopped after {} iterations (gap {:e}, residual {:e})",
                sol.iterations, sol.duality_gap, sol.kkt_residual
            )))
        }
    }
    let n = record.graph.node_count();
    let mut beta = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for i in 0..n {
        let b = &record.bounds[i];
        beta.push(within(sol.x_star[record.beta[i]], b.beta_lo, b.beta_hi, "beta", i)?);
        delta.push(within(record.delta(sol, i), b.delta_lo, b.delta_hi, "delta", i)?);
    }
    let lambda1 = effective_eigenvalue(&record.graph, &beta, &delta)?;
    let mut a = Allocation::from_rates(beta, delta, &record.costs, lambda1);
    a.status = sol.status;
    a.iterations = sol.iterations;
    Ok(a)
}

const RECOVERY_TOL: f64 = 1e-7;

fn within(x: f64, lo: f64, hi: f64, what: &str, i: NodeId) -> Result<f64> {
    let slack = RECOVERY_TOL * (1.0 + hi.abs());
    if !(x >= lo - slack && x <= hi + slack) {
        return Err(Error::Consistency(format!("recovered {what}[{i}] = {x} outside [{lo}, {hi}]")));
    }
    Ok(x.clamp(lo, hi))
}
