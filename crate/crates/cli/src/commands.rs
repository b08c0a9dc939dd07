use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use spreadguard::allocate::{default_costs, solve_budget, solve_rate, Allocation, CostModel, NodeBounds};
use spreadguard::dynamics::{
    decay_rate_estimate, integrate_linearized_on, integrate_meanfield_on, simulate_stochastic_on, uniform_grid,
    EpidemicParams,
};
use spreadguard::gp::SolverOptions;
use spreadguard::io::{self, format_real};
use spreadguard::netgraph::{
    load_edge_list, pagerank, weighted_in_degree, weighted_out_degree, zero_support_set, WeightedDigraph,
    PAGERANK_ALPHA,
};
use spreadguard::spectral::{effective_eigenvalue, spectral_radius};
use spreadguard::Error;

use crate::output::{Failure, Inputs, OutDir, Outcome};
use crate::{ProblemArgs, Setting, SimulateArgs};

fn settings(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn key_values(pairs: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in pairs {
        writeln!(s, "{k},{v}").unwrap();
    }
    s
}

fn load_graph(inputs: &mut Inputs, path: &Path) -> Outcome<WeightedDigraph> {
    Ok(load_edge_list(&inputs.read("graph", path)?)?)
}

pub fn analyze(graph: &Path, out: Option<&Path>, args: &[String]) -> Outcome {
    let mut inputs = Inputs::new();
    let g = load_graph(&mut inputs, graph)?;
    let rho = spectral_radius(&g)?;
    let zero = if g.edge_count() == 0 { None } else { Some(zero_support_set(&g)?) };
    let indeg = weighted_in_degree(&g);
    let outdeg = weighted_out_degree(&g);
    let pr = pagerank(&g, PAGERANK_ALPHA)?;

    let zero_labels = match &zero {
        Some(z) => z.zero_nodes.iter().map(|&i| g.label(i)).collect::<Vec<_>>().join(";"),
        None => "undefined".into(),
    };
    let summary = key_values(&[
        ("nodes", g.node_count().to_string()),
        ("edges", g.edge_count().to_string()),
        ("strongly_connected", g.is_strongly_connected().to_string()),
        ("spectral_radius", format_real(rho)),
        ("zero_support", zero_labels),
    ]);
    print!("{summary}");

    if let Some(dir) = out {
        let mut od = OutDir::create(dir)?;
        let mut nodes = String::from("label,in_degree,out_degree,pagerank,zero_support\n");
        for i in 0..g.node_count() {
            let z = zero.as_ref().is_some_and(|z| z.is_zero(i));
            writeln!(
                nodes,
                "{},{},{},{},{}",
                g.label(i),
                format_real(indeg[i]),
                format_real(outdeg[i]),
                format_real(pr[i]),
                u8::from(z)
            )
            .unwrap();
        }
        od.write("analysis.csv", &summary)?;
        od.write("nodes.csv", &nodes)?;
        od.finish("analyze", args, inputs, settings(&[("pagerank_alpha", json!(PAGERANK_ALPHA))]))?;
    }
    Ok(())
}

#[derive(Clone, Copy)]
pub enum Target {
    Rate(f64),
    Budget(f64),
}

struct Problem {
    g: WeightedDigraph,
    bounds: Vec<NodeBounds>,
    costs: CostModel,
    opts: SolverOptions,
    fit_error: Option<f64>,
}

fn load_problem(inputs: &mut Inputs, p: &ProblemArgs) -> Outcome<Problem> {
    let g = load_graph(inputs, &p.graph)?;
    let bounds = io::load_node_params(&inputs.read("params", &p.params)?, &g)?;
    let (costs, fit_error) = match &p.costs {
        Some(path) => {
            let (c, fits) = io::load_cost_curves(&inputs.read("costs", path)?, &g, &bounds)?;
            (c, fits.iter().map(|f| f.max_rel_error).reduce(f64::max))
        }
        None => (default_costs(&bounds)?, None),
    };
    let opts = SolverOptions { opt_tol: p.tol_opt, feas_tol: p.tol_feas, ..SolverOptions::default() };
    Ok(Problem { g, bounds, costs, opts, fit_error })
}

fn run(p: &Problem, target: Target) -> Result<Allocation, Error> {
    let a = match target {
        Target::Rate(eps) => solve_rate(&p.g, &p.bounds, &p.costs, eps, &p.opts)?,
        Target::Budget(b) => solve_budget(&p.g, &p.bounds, &p.costs, b, &p.opts)?,
    };
    check_allocation(p, &a, target)?;
    Ok(a)
}

/// Re-derives the allocation invariants from the emitted rates.
fn check_allocation(p: &Problem, a: &Allocation, target: Target) -> Result<(), Error> {
    let fail = |msg: String| Err(Error::Consistency(msg));
    for (i, b) in p.bounds.iter().enumerate() {
        let slack = |x: f64| 1e-9 * (1.0 + x.abs());
        if a.beta[i] < b.beta_lo - slack(b.beta_lo) || a.beta[i] > b.beta_hi + slack(b.beta_hi) {
            return fail(format!("beta of `{}` outside its box", p.g.label(i)));
        }
        if a.delta[i] < b.delta_lo - slack(b.delta_lo) || a.delta[i] > b.delta_hi + slack(b.delta_hi) {
            return fail(format!("delta of `{}` outside its box", p.g.label(i)));
        }
    }
    let lambda = effective_eigenvalue(&p.g, &a.beta, &a.delta)?;
    if (lambda - a.lambda1_check).abs() > 1e-9 {
        return fail(format!("reported eigenvalue {} but recomputed {lambda}", a.lambda1_check));
    }
    if lambda > -a.epsilon_achieved + 1e-6 {
        return fail(format!("eigenvalue {lambda} above the achieved rate {}", -a.epsilon_achieved));
    }
    match target {
        Target::Rate(eps) if lambda > -eps + 1e-6 => fail(format!("eigenvalue {lambda} misses the target {}", -eps)),
        Target::Budget(b) if a.total_cost > b + 1e-6 * b.abs().max(1.0) => {
            fail(format!("spend {} exceeds the budget {b}", a.total_cost))
        }
        _ => Ok(()),
    }
}

fn scatter(g: &WeightedDigraph, head: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut s = format!("label,{head}\n");
    for i in 0..g.node_count() {
        writeln!(s, "{},{},{}", g.label(i), format_real(xs[i]), format_real(ys[i])).unwrap();
    }
    s
}

pub fn allocate(p: &ProblemArgs, target: Target, out: &Path, args: &[String]) -> Outcome {
    let mut inputs = Inputs::new();
    let prob = load_problem(&mut inputs, p)?;
    let a = run(&prob, target)?;

    let (command, target_entry) = match target {
        Target::Rate(eps) => ("allocate-rate", ("eps_bar", format_real(eps))),
        Target::Budget(b) => ("allocate-budget", ("budget", format_real(b))),
    };
    let mut extra = vec![target_entry];
    if let Some(e) = prob.fit_error {
        extra.push(("cost_fit_max_rel_error", format_real(e)));
    }
    let summary = io::write_summary(&a, &extra);
    print!("{summary}");

    let g = &prob.g;
    let spend: Vec<f64> = (0..g.node_count()).map(|i| a.spend(i)).collect();
    let mut od = OutDir::create(out)?;
    od.write("allocation.csv", &io::write_allocation(g, &a))?;
    od.write("summary.csv", &summary)?;
    od.write("scatter_antidote_vs_vax.csv", &scatter(g, "vax_spend,antidote_spend", &a.vax_spend, &a.antidote_spend))?;
    od.write("scatter_spend_vs_in_degree.csv", &scatter(g, "in_degree,spend", &weighted_in_degree(g), &spend))?;
    od.write("scatter_spend_vs_pagerank.csv", &scatter(g, "pagerank,spend", &pagerank(g, PAGERANK_ALPHA)?, &spend))?;
    od.finish(
        command,
        args,
        inputs,
        settings(&[
            ("tol_opt", json!(p.tol_opt)),
            ("tol_feas", json!(p.tol_feas)),
            ("max_iter", json!(prob.opts.max_iter)),
            ("pagerank_alpha", json!(PAGERANK_ALPHA)),
        ]),
    )
}

pub fn simulate(s: &SimulateArgs, args: &[String]) -> Outcome {
    let mut inputs = Inputs::new();
    let g = load_graph(&mut inputs, &s.graph)?;
    let n = g.node_count();
    let (beta, delta) = match (&s.allocation, &s.params) {
        (Some(path), _) => io::load_allocation(&inputs.read("allocation", path)?, &g)?,
        (None, Some(path)) => {
            let bounds = io::load_node_params(&inputs.read("params", path)?, &g)?;
            bounds
                .iter()
                .map(|b| match s.setting {
                    Setting::Cheapest => b.cheapest(),
                    Setting::Strongest => b.strongest(),
                })
                .unzip()
        }
        (None, None) => return Err(Failure::Usage("either --allocation or --params is required".into())),
    };
    let p0 = match s.p0.parse::<f64>() {
        Ok(x) => vec![x; n],
        Err(_) => io::load_node_values(&inputs.read("p0", Path::new(&s.p0))?, &g, "p0")?,
    };
    if !(s.t_end > 0.0) || s.points < 2 {
        return Err(Failure::Usage("--t-end must be positive and --points at least 2".into()));
    }

    let params = EpidemicParams::new(beta.clone(), delta.clone())?;
    let times = uniform_grid(s.t_end, s.points);
    let meanfield = integrate_meanfield_on(&g, &params, &p0, &times, s.tol)?;
    let linear = integrate_linearized_on(&g, &params, &p0, &times, s.tol)?;
    let lambda = effective_eigenvalue(&g, &beta, &delta)?;
    let window = (0.5 * s.t_end, s.t_end);
    let rate = |t: &spreadguard::dynamics::Trajectory| {
        decay_rate_estimate(t, window).map_or_else(|_| "undefined".to_string(), format_real)
    };
    let mut summary = vec![
        ("lambda1", format_real(lambda)),
        ("meanfield_decay_rate", rate(&meanfield)),
        ("linearized_decay_rate", rate(&linear)),
        ("trials", s.trials.to_string()),
        ("seed", s.seed.to_string()),
    ];

    let mut od = OutDir::create(&s.out)?;
    od.write("trajectory_meanfield.csv", &io::write_trajectory(&meanfield))?;
    od.write("trajectory_linearized.csv", &io::write_trajectory(&linear))?;
    if s.trials > 0 {
        if p0.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Failure::Usage("the Monte-Carlo overlay needs a deterministic start (p0 entries 0 or 1)".into()));
        }
        let x0: Vec<bool> = p0.iter().map(|&x| x == 1.0).collect();
        let mc = simulate_stochastic_on(&g, &params, &x0, &times, s.trials, s.seed)?;
        summary.push(("montecarlo_decay_rate", rate(&mc)));
        od.write("trajectory_montecarlo.csv", &io::write_trajectory(&mc))?;
    }
    let summary = key_values(&summary);
    print!("{summary}");
    od.write("summary.csv", &summary)?;
    od.finish(
        "simulate",
        args,
        inputs,
        settings(&[
            ("tol", json!(s.tol)),
            ("t_end", json!(s.t_end)),
            ("points", json!(s.points)),
            ("trials", json!(s.trials)),
            ("seed", json!(s.seed)),
        ]),
    )
}

pub enum SweepSpec {
    Budgets(Vec<f64>),
    Factors { eps_bar: f64, factors: Vec<f64> },
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::Infeasible(_) => "infeasible",
        Error::NoConvergence(_) | Error::Convergence { .. } | Error::Solver(_) => "no_convergence",
        Error::Consistency(_) => "inconsistent",
        Error::Parse { .. } | Error::InvalidInput(_) => "invalid",
    }
}

pub fn sweep(p: &ProblemArgs, spec: SweepSpec, out: &Path, args: &[String]) -> Outcome {
    let mut inputs = Inputs::new();
    let prob = load_problem(&mut inputs, p)?;
    let (budgets, reference) = match spec {
        SweepSpec::Budgets(b) => (b, None),
        SweepSpec::Factors { eps_bar, factors } => {
            let base = run(&prob, Target::Rate(eps_bar))?.total_cost;
            (factors.iter().map(|f| f * base).collect(), Some((eps_bar, base)))
        }
    };
    if budgets.is_empty() {
        return Err(Failure::Usage("no budgets given".into()));
    }
    let results: Vec<Result<Allocation, Error>> = budgets.par_iter().map(|&b| run(&prob, Target::Budget(b))).collect();

    let mut table = String::from("budget,epsilon_star,total_cost,lambda1_check,status\n");
    let mut last = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut order: Vec<usize> = (0..budgets.len()).collect();
    order.sort_by(|&i, &j| budgets[i].total_cmp(&budgets[j]));
    for &k in &order {
        if let Ok(a) = &results[k] {
            monotone &= a.epsilon_achieved >= last - 1e-6;
            last = a.epsilon_achieved;
        }
    }
    for (b, r) in budgets.iter().zip(&results) {
        match r {
            Ok(a) => writeln!(
                table,
                "{},{},{},{},optimal",
                format_real(*b),
                format_real(a.epsilon_achieved),
                format_real(a.total_cost),
                format_real(a.lambda1_check)
            ),
            Err(e) => writeln!(table, "{},,,,{}", format_real(*b), status_of(e)),
        }
        .unwrap();
    }
    print!("{table}");
    println!("# epsilon_star nondecreasing in budget: {monotone}");

    let mut od = OutDir::create(out)?;
    od.write("sweep.csv", &table)?;
    let mut extra = vec![
        ("tol_opt", json!(p.tol_opt)),
        ("tol_feas", json!(p.tol_feas)),
        ("monotone", json!(monotone)),
    ];
    if let Some((eps, base)) = reference {
        extra.push(("reference_eps_bar", json!(eps)));
        extra.push(("reference_cost", json!(base)));
    }
    od.finish("sweep", args, inputs, settings(&extra))
}
