use super::NodeBounds;
use crate::error::{Error, Result};
use crate::gp::{fit_posynomial, Monomial, Posynomial};

/// Per-node cost curves: `f(beta) = q_f(beta) - offset_f` and
/// `g(delta) = q_g(anchor - delta) - offset_g` with posynomials `q_f`, `q_g`
/// in a single variable (id 0). `q_f` must decrease in `beta` and `q_g` must
/// decrease in `w = anchor - delta` over the node's box.
#[derive(Debug, Clone)]
pub struct NodeCost {
    vax: Posynomial,
    vax_offset: f64,
    antidote: Posynomial,
    antidote_offset: f64,
    anchor: f64,
}

const MONOTONE_SAMPLES: usize = 32;

impl NodeCost {
    pub fn new(
        vax: Posynomial,
        vax_offset: f64,
        antidote: Posynomial,
        antidote_offset: f64,
        anchor: f64,
        bounds: &NodeBounds,
    ) -> Result<Self> {
        if vax.max_var().unwrap_or(0) > 0 || antidote.max_var().unwrap_or(0) > 0 {
            return Err(Error::invalid("cost posynomials must use the single variable 0"));
        }
        if !(anchor > bounds.delta_hi && anchor.is_finite()) {
            return Err(Error::invalid(format!("antidote anchor {anchor} must exceed delta_hi = {}", bounds.delta_hi)));
        }
        let c = Self { vax, vax_offset, antidote, antidote_offset, anchor };
        let grid = |lo: f64, hi: f64| (0..MONOTONE_SAMPLES).map(move |k| lo + (hi - lo) * k as f64 / (MONOTONE_SAMPLES - 1) as f64);
        let tol = |a: f64, b: f64| 1e-12 * (1.0 + a.abs().max(b.abs()));
        let f: Vec<f64> = grid(bounds.beta_lo, bounds.beta_hi).map(|b| c.vax_cost(b)).collect();
        if f.windows(2).any(|w| w[1] > w[0] + tol(w[0], w[1])) {
            return Err(Error::invalid("vaccine cost must be nonincreasing in beta"));
        }
        let g: Vec<f64> = grid(bounds.delta_lo, bounds.delta_hi).map(|d| c.antidote_cost(d)).collect();
        if g.windows(2).any(|w| w[1] < w[0] - tol(w[0], w[1])) {
            return Err(Error::invalid("antidote cost must be nondecreasing in delta"));
        }
        Ok(c)
    }

    /// Normalised reciprocal costs: `f` falls from 1 at `beta_lo` to 0 at
    /// `beta_hi`, `g` rises from 0 at `delta_lo` to 1 at `delta_hi`, with
    /// `f ~ 1/beta` and `g ~ 1/(1 - delta)`. Requires `delta_hi < 1`.
    pub fn reciprocal(bounds: &NodeBounds) -> Result<Self> {
        bounds.validate()?;
        if bounds.delta_hi >= 1.0 {
            return Err(Error::invalid(format!(
                "reciprocal antidote cost has a pole at delta = 1, got delta_hi = {}",
                bounds.delta_hi
            )));
        }
        let (vax, vax_offset) = reciprocal_curve(bounds.beta_lo, bounds.beta_hi)?;
        let (antidote, antidote_offset) = reciprocal_curve(1.0 - bounds.delta_hi, 1.0 - bounds.delta_lo)?;
        Ok(Self { vax, vax_offset, antidote, antidote_offset, anchor: 1.0 })
    }

    pub fn vax_posynomial(&self) -> &Posynomial {
        &self.vax
    }

    pub fn antidote_posynomial(&self) -> &Posynomial {
        &self.antidote
    }

    pub fn vax_offset(&self) -> f64 {
        self.vax_offset
    }

    pub fn antidote_offset(&self) -> f64 {
        self.antidote_offset
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn vax_raw(&self, beta: f64) -> f64 {
        self.vax.eval(&[beta]).unwrap_or(f64::NAN)
    }

    pub fn antidote_raw(&self, delta: f64) -> f64 {
        self.antidote.eval(&[self.anchor - delta]).unwrap_or(f64::NAN)
    }

    pub fn vax_cost(&self, beta: f64) -> f64 {
        self.vax_raw(beta) - self.vax_offset
    }

    pub fn antidote_cost(&self, delta: f64) -> f64 {
        self.antidote_raw(delta) - self.antidote_offset
    }

    pub fn cheapest_spend(&self, b: &NodeBounds) -> f64 {
        self.vax_cost(b.beta_hi) + self.antidote_cost(b.delta_lo)
    }

    pub fn strongest_spend(&self, b: &NodeBounds) -> f64 {
        self.vax_cost(b.beta_lo) + self.antidote_cost(b.delta_hi)
    }
}

/// `(x^-1 - hi^-1) / (lo^-1 - hi^-1)` as monomial minus offset; constant zero
/// when the interval is degenerate.
fn reciprocal_curve(lo: f64, hi: f64) -> Result<(Posynomial, f64)> {
    let span = 1.0 / lo - 1.0 / hi;
    if span <= 0.0 {
        return Ok((Monomial::constant(1.0)?.into(), 1.0));
    }
    let m = Monomial::new(1.0 / span, [(0, -1.0)])?;
    Ok((m.into(), 1.0 / (hi * span)))
}

#[derive(Debug, Clone)]
pub struct CostModel {
    nodes: Vec<NodeCost>,
}

impl CostModel {
    pub fn new(nodes: Vec<NodeCost>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NodeCost {
        &self.nodes[i]
    }

    pub fn set_node(&mut self, i: usize, cost: NodeCost) {
        self.nodes[i] = cost;
    }

    pub fn subset(&self, ids: &[usize]) -> Self {
        Self { nodes: ids.iter().map(|&i| self.nodes[i].clone()).collect() }
    }
}

/// Reciprocal costs for every node; see [`NodeCost::reciprocal`].
pub fn default_costs(bounds: &[NodeBounds]) -> Result<CostModel> {
    Ok(CostModel::new(bounds.iter().map(NodeCost::reciprocal).collect::<Result<_>>()?))
}

const FIT_TERMS: usize = 3;

fn fit_curve(samples: &[(f64, f64)], map: impl Fn(f64) -> f64) -> Result<(Posynomial, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::invalid("cost curve needs at least two samples"));
    }
    let lo = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    // shift so the smallest sample sits at a positive, well-scaled value
    let offset = (hi - lo).max(lo.abs()).max(1e-12) - lo;
    let pts: Vec<(Vec<f64>, f64)> = samples.iter().map(|&(x, v)| (vec![map(x)], v + offset)).collect();
    let terms = FIT_TERMS.min(pts.len() / 2).max(1);
    let fit = fit_posynomial(&pts, terms)?;
    Ok((fit.posynomial, offset, fit.max_rel_error))
}

/// Fits a vaccine cost to `(beta, cost)` samples. Returns the posynomial in
/// `beta`, its offset and the maximum relative fit error.
pub fn fit_vax_cost(samples: &[(f64, f64)]) -> Result<(Posynomial, f64, f64)> {
    fit_curve(samples, |b| b)
}

/// Fits an antidote cost to `(delta, cost)` samples as a posynomial in
/// `anchor - delta`. Returns the posynomial, its offset and the fit error.
pub fn fit_antidote_cost(samples: &[(f64, f64)], anchor: f64) -> Result<(Posynomial, f64, f64)> {
    if samples.iter().any(|&(d, _)| d >= anchor) {
        return Err(Error::invalid("antidote samples must lie below the anchor"));
    }
    fit_curve(samples, |d| anchor - d)
}
