//! Text formats: node parameters, sampled cost curves, allocation tables and
//! trajectories. All reals are written with 12 significant digits.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::allocate::{fit_antidote_cost, fit_vax_cost, Allocation, CostModel, NodeBounds, NodeCost};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::netgraph::{NodeId, WeightedDigraph};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to 12 significant digits, without trailing zeros.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, mantissa.parse::<f64>().unwrap() * 10f64.powi(exp)))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Comma-separated data rows with 1-based line numbers. Blank lines, `#`
/// comments and a leading header equal to `header` are skipped.
fn rows<'a>(text: &'a str, header: &'a [&'a str]) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    let mut first = true;
    text.lines().enumerate().filter_map(move |(idx, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let is_header = first && fields.len() == header.len() && fields.iter().zip(header).all(|(a, b)| a == b);
        first = false;
        (!is_header).then_some((idx + 1, fields))
    })
}

fn parse_real(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, msg: format!("invalid {what} `{field}`") })
}

fn node_of(g: &WeightedDigraph, label: &str, line: usize) -> Result<NodeId> {
    g.node_id(label).ok_or_else(|| Error::Parse { line, msg: format!("unknown node `{label}`") })
}

/// Edge list `src,dst,weight`, one edge per line, readable by `load_edge_list`.
pub fn write_edge_list(g: &WeightedDigraph) -> String {
    let mut s = String::new();
    for e in g.edges() {
        writeln!(s, "{},{},{}", g.label(e.src), g.label(e.dst), format_real(e.weight)).unwrap();
    }
    s
}

pub const PARAMS_HEADER: [&str; 5] = ["label", "beta_lo", "beta_hi", "delta_lo", "delta_hi"];

/// Parses `label,beta_lo,beta_hi,delta_lo,delta_hi` rows; every node of `g`
/// must appear exactly once.
pub fn load_node_params(text: &str, g: &WeightedDigraph) -> Result<Vec<NodeBounds>> {
    let mut out: Vec<Option<NodeBounds>> = vec![None; g.node_count()];
    for (line, f) in rows(text, &PARAMS_HEADER) {
        if f.len() != 5 {
            return Err(Error::Parse { line, msg: format!("expected 5 fields, got {}", f.len()) });
        }
        let i = node_of(g, f[0], line)?;
        let v: Vec<f64> = f[1..].iter().zip(&PARAMS_HEADER[1..]).map(|(x, w)| parse_real(x, line, w)).collect::<Result<_>>()?;
        let b = NodeBounds::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if out[i].replace(b).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate parameters for `{}`", f[0]) });
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| Error::invalid(format!("no parameters for node `{}`", g.label(i)))))
        .collect()
}

pub fn write_node_params(g: &WeightedDigraph, bounds: &[NodeBounds]) -> String {
    let mut s = PARAMS_HEADER.join(",") + "\n";
    for (i, b) in bounds.iter().enumerate() {
        let vals = [b.beta_lo, b.beta_hi, b.delta_lo, b.delta_hi].map(format_real);
        writeln!(s, "{},{}", g.label(i), vals.join(",")).unwrap();
    }
    s
}

pub const COSTS_HEADER: [&str; 4] = ["label", "kind", "x", "cost"];

/// Fit quality of one sampled cost override.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub node: NodeId,
    pub kind: &'static str,
    pub samples: usize,
    pub max_rel_error: f64,
}

/// Cost model from sampled overrides `label,kind,x,cost` with `kind` either
/// `vax` (x = beta) or `antidote` (x = delta). Curves that are not given keep
/// the normalised reciprocal default. Fitted antidote curves are expressed
/// in `delta_hi + 1 - delta`.
pub fn load_cost_curves(text: &str, g: &WeightedDigraph, bounds: &[NodeBounds]) -> Result<(CostModel, Vec<CurveFit>)> {
    let mut samples: HashMap<(NodeId, bool), Vec<(f64, f64)>> = HashMap::new();
    for (line, f) in rows(text, &COSTS_HEADER) {
        if f.len() != 4 {
            return Err(Error::Parse { line, msg: format!("expected 4 fields, got {}", f.len()) });
        }
        let i = node_of(g, f[0], line)?;
        let vax = match f[1] {
            "vax" => true,
            "antidote" => false,
            other => return Err(Error::Parse { line, msg: format!("cost kind must be `vax` or `antidote`, got `{other}`") }),
        };
        let x = parse_real(f[2], line, "rate")?;
        let c = parse_real(f[3], line, "cost")?;
        samples.entry((i, vax)).or_default().push((x, c));
    }

    let mut model = crate::allocate::default_costs(bounds)?;
    let mut fits = Vec::new();
    let mut keys: Vec<_> = samples.keys().map(|k| k.0).collect();
    keys.sort_unstable();
    keys.dedup();
    for i in keys {
        let b = &bounds[i];
        let base = model.node(i).clone();
        let (vax, vax_off) = match samples.get(&(i, true)) {
            Some(s) => {
                let (p, off, err) = fit_vax_cost(s)?;
                fits.push(CurveFit { node: i, kind: "vax", samples: s.len(), max_rel_error: err });
                (p, off)
            }
            None => (base.vax_posynomial().clone(), base.vax_offset()),
        };
        let (antidote, anti_off, anchor) = match samples.get(&(i, false)) {
            Some(s) => {
                let anchor = b.delta_hi + 1.0;
                let (p, off, err) = fit_antidote_cost(s, anchor)?;
                fits.push(CurveFit { node: i, kind: "antidote", samples: s.len(), max_rel_error: err });
                (p, off, anchor)
            }
            None => (base.antidote_posynomial().clone(), base.antidote_offset(), base.anchor()),
        };
        let cost = NodeCost::new(vax, vax_off, antidote, anti_off, anchor, b)
            .map_err(|e| Error::invalid(format!("cost curves of `{}`: {e}", g.label(i))))?;
        model.set_node(i, cost);
    }
    Ok((model, fits))
}

/// Spends net of the cost offsets, then the raw posynomial values.
pub const ALLOCATION_HEADER: [&str; 7] =
    ["label", "beta_star", "delta_star", "vax_spend", "antidote_spend", "vax_spend_raw", "antidote_spend_raw"];

pub fn write_allocation(g: &WeightedDigraph, a: &Allocation) -> String {
    let mut s = ALLOCATION_HEADER.join(",") + "\n";
    for i in 0..a.node_count() {
        let vals = [a.beta[i], a.delta[i], a.vax_spend[i], a.antidote_spend[i], a.vax_spend_raw[i], a.antidote_spend_raw[i]]
            .map(format_real);
        writeln!(s, "{},{}", g.label(i), vals.join(",")).unwrap();
    }
    s
}

/// `(beta, delta)` per node from an allocation table.
pub fn load_allocation(text: &str, g: &WeightedDigraph) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = g.node_count();
    let (mut beta, mut delta) = (vec![f64::NAN; n], vec![f64::NAN; n]);
    for (line, f) in rows(text, &ALLOCATION_HEADER) {
        if f.len() < 3 {
            return Err(Error::Parse { line, msg: "expected at least `label,beta,delta`".into() });
        }
        let i = node_of(g, f[0], line)?;
        if !beta[i].is_nan() {
            return Err(Error::Parse { line, msg: format!("duplicate row for `{}`", f[0]) });
        }
        beta[i] = parse_real(f[1], line, "beta")?;
        delta[i] = parse_real(f[2], line, "delta")?;
    }
    if let Some(i) = (0..n).find(|&i| beta[i].is_nan()) {
        return Err(Error::invalid(format!("no rates for node `{}`", g.label(i))));
    }
    Ok((beta, delta))
}

/// One value per node from `label,value` rows, e.g. initial infection
/// probabilities.
pub fn load_node_values(text: &str, g: &WeightedDigraph, what: &str) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; g.node_count()];
    for (line, f) in rows(text, &["label", what]) {
        if f.len() != 2 {
            return Err(Error::Parse { line, msg: format!("expected `label,{what}`") });
        }
        let i = node_of(g, f[0], line)?;
        if !out[i].is_nan() {
            return Err(Error::Parse { line, msg: format!("duplicate row for `{}`", f[0]) });
        }
        out[i] = parse_real(f[1], line, what)?;
    }
    if let Some(i) = out.iter().position(|x| x.is_nan()) {
        return Err(Error::invalid(format!("no {what} for node `{}`", g.label(i))));
    }
    Ok(out)
}

/// `key,value` summary record of an allocation.
pub fn write_summary(a: &Allocation, extra: &[(&str, String)]) -> String {
    let vax: f64 = a.vax_spend.iter().sum();
    let antidote: f64 = a.antidote_spend.iter().sum();
    let mut s = String::from("key,value\n");
    let mut put = |k: &str, v: String| writeln!(s, "{k},{v}").unwrap();
    put("epsilon_achieved", format_real(a.epsilon_achieved));
    put("total_cost", format_real(a.total_cost));
    put("vax_total", format_real(vax));
    put("antidote_total", format_real(antidote));
    put("total_cost_raw", format_real(a.vax_spend_raw.iter().chain(&a.antidote_spend_raw).sum()));
    put("lambda1_check", format_real(a.lambda1_check));
    put("status", format!("{:?}", a.status).to_lowercase());
    put("iterations", a.iterations.to_string());
    put("fixed_nodes", a.fixed_nodes.len().to_string());
    for (k, v) in extra {
        put(k, v.clone());
    }
    s
}

/// Rows `t,p_1,...,p_n`.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for i in 1..=n {
        write!(s, ",p_{i}").unwrap();
    }
    s.push('\n');
    for (t, p) in traj.times.iter().zip(&traj.states) {
        s.push_str(&format_real(*t));
        for x in p {
            s.push(',');
            s.push_str(&format_real(*x));
        }
        s.push('\n');
    }
    s
}
