//! The exact 2^n-state Markov chain and its event-driven simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ode::{integrate, Tolerance};
use super::{check_horizon, check_probabilities, uniform_grid, EpidemicParams, Trajectory, DEFAULT_SAVE_POINTS};
use crate::error::{Error, Result};
use crate::netgraph::WeightedDigraph;

/// Largest graph accepted by [`exact_marginals`].
pub const MAX_EXACT_NODES: usize = 12;

const EXACT_TOL: f64 = 1e-10;

/// Marginal infection probabilities of the exact chain, starting from
/// independent initial infections with probabilities `p0`.
pub fn exact_marginals(g: &WeightedDigraph, params: &EpidemicParams, p0: &[f64], t_end: f64) -> Result<Trajectory> {
    check_horizon(t_end)?;
    exact_marginals_on(g, params, p0, &uniform_grid(t_end, DEFAULT_SAVE_POINTS), EXACT_TOL)
}

pub fn exact_marginals_on(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    p0: &[f64],
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    params.check(g)?;
    let n = g.node_count();
    if n > MAX_EXACT_NODES {
        return Err(Error::invalid(format!("exact chain limited to {MAX_EXACT_NODES} nodes, got {n}")));
    }
    check_probabilities(p0, n)?;
    let size = 1usize << n;
    let init: Vec<f64> = (0..size)
        .map(|s| (0..n).map(|i| if s >> i & 1 == 1 { p0[i] } else { 1.0 - p0[i] }).product())
        .collect();
    let forward = |_: f64, p: &[f64], dp: &mut [f64]| {
        dp.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..size {
            let mass = p[s];
            if mass == 0.0 {
                continue;
            }
            for i in 0..n {
                let bit = 1 << i;
                let rate = if s & bit != 0 {
                    params.delta[i]
                } else {
                    let pressure: f64 =
                        g.in_neighbors(i).iter().filter(|&&(j, _)| s >> j & 1 == 1).map(|&(_, a)| a).sum();
                    params.beta[i] * pressure
                };
                if rate > 0.0 {
                    dp[s ^ bit] += mass * rate;
                    dp[s] -= mass * rate;
                }
            }
        }
    };
    let dist = integrate(forward, &init, times, Tolerance { rtol: tol, atol: tol * 1e-3 })?;
    let states = dist
        .iter()
        .map(|p| (0..n).map(|i| (0..size).filter(|s| s >> i & 1 == 1).map(|s| p[s]).sum::<f64>().clamp(0.0, 1.0)).collect())
        .collect();
    Ok(Trajectory { times: times.to_vec(), states })
}

/// Empirical infection frequencies over `trials` exact event-driven runs from
/// the initial state `x0`. Trial `k` draws from stream `k` of a generator
/// seeded with `seed`, so results do not depend on thread scheduling.
pub fn simulate_stochastic(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    x0: &[bool],
    t_end: f64,
    trials: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_horizon(t_end)?;
    simulate_stochastic_on(g, params, x0, &uniform_grid(t_end, DEFAULT_SAVE_POINTS), trials, seed)
}

pub fn simulate_stochastic_on(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    x0: &[bool],
    times: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Trajectory> {
    params.check(g)?;
    let n = g.node_count();
    if x0.len() != n {
        return Err(Error::invalid(format!("initial state has length {}, expected {n}", x0.len())));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("save times must be nonnegative and strictly increasing"));
    }
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; times.len() * n],
            |mut acc, k| {
                run_trial(g, params, x0, times, seed, k as u64, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; times.len() * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let states =
        counts.chunks(n.max(1)).take(times.len()).map(|c| c.iter().map(|&v| v as f64 / trials as f64).collect()).collect();
    let states = if n == 0 { vec![Vec::new(); times.len()] } else { states };
    Ok(Trajectory { times: times.to_vec(), states })
}

fn run_trial(
    g: &WeightedDigraph,
    params: &EpidemicParams,
    x0: &[bool],
    times: &[f64],
    seed: u64,
    stream: u64,
    counts: &mut [u64],
) {
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut x = x0.to_vec();
    // infection pressure sum_j a_ij x_j on each node
    let mut pressure: Vec<f64> =
        (0..n).map(|i| g.in_neighbors(i).iter().filter(|&&(j, _)| x[j]).map(|&(_, a)| a).sum()).collect();
    let rate = |i: usize, x: &[bool], pressure: &[f64]| if x[i] { params.delta[i] } else { params.beta[i] * pressure[i] };
    let mut t = 0.0;
    let mut next = 0;
    loop {
        let total: f64 = (0..n).map(|i| rate(i, &x, &pressure)).sum();
        let dt = if total > 0.0 { -(1.0 - rng.random::<f64>()).ln() / total } else { f64::INFINITY };
        while next < times.len() && times[next] < t + dt {
            for i in 0..n {
                counts[next * n + i] += x[i] as u64;
            }
            next += 1;
        }
        if next == times.len() {
            return;
        }
        t += dt;
        let mut r = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for i in 0..n {
            r -= rate(i, &x, &pressure);
            if r < 0.0 {
                chosen = i;
                break;
            }
        }
        // guard against rounding picking a node with zero rate
        if rate(chosen, &x, &pressure) == 0.0 {
            continue;
        }
        x[chosen] = !x[chosen];
        let sign = if x[chosen] { 1.0 } else { -1.0 };
        for &(k, a) in g.out_neighbors(chosen) {
            pressure[k] += sign * a;
        }
        if !x[chosen] {
            // recompute exactly to avoid drift from repeated add/subtract
            for &(k, _) in g.out_neighbors(chosen) {
                pressure[k] = g.in_neighbors(k).iter().filter(|&&(j, _)| x[j]).map(|&(_, a)| a).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_exact_and_simulated() {
        let g = WeightedDigraph::new(1, []).unwrap();
        let p = EpidemicParams::new(vec![0.5], vec![0.1]).unwrap();
        let ex = exact_marginals(&g, &p, &[0.7], 10.0).unwrap();
        for (t, s) in ex.times.iter().zip(&ex.states) {
            assert!((s[0] - 0.7 * (-0.1 * t).exp()).abs() < 1e-9);
        }
        let trials = 100_000;
        let mc = simulate_stochastic_on(&g, &p, &[true], &[0.0, 5.0], trials, 7).unwrap();
        let q = (-0.5f64).exp();
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        assert!((mc.states[1][0] - q).abs() < 3.0 * sigma, "{} vs {q}", mc.states[1][0]);
        assert_eq!(mc.states[0][0], 1.0);
    }

    #[test]
    fn no_spontaneous_infection() {
        let g = WeightedDigraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let p = EpidemicParams::new(vec![1.0; 3], vec![0.1; 3]).unwrap();
        let mc = simulate_stochastic(&g, &p, &[false; 3], 10.0, 50, 1).unwrap();
        assert!(mc.states.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn two_cycle_matches_exact_chain() {
        let g = WeightedDigraph::new(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let p = EpidemicParams::new(vec![0.8, 0.5], vec![0.4, 0.6]).unwrap();
        let times = [0.0, 1.0, 3.0, 6.0];
        let ex = exact_marginals_on(&g, &p, &[1.0, 0.0], &times, 1e-10).unwrap();
        let trials = 100_000;
        let mc = simulate_stochastic_on(&g, &p, &[true, false], &times, trials, 42).unwrap();
        for k in 1..times.len() {
            for i in 0..2 {
                let q = ex.states[k][i];
                let sigma = (q * (1.0 - q) / trials as f64).sqrt().max(1e-12);
                assert!((mc.states[k][i] - q).abs() < 3.0 * sigma, "t={} node {i}: {} vs {q}", times[k], mc.states[k][i]);
            }
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let g = WeightedDigraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let p = EpidemicParams::new(vec![0.6; 3], vec![0.3; 3]).unwrap();
        let a = simulate_stochastic(&g, &p, &[true, false, false], 8.0, 2000, 9).unwrap();
        let b = simulate_stochastic(&g, &p, &[true, false, false], 8.0, 2000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_stochastic(&g, &p, &[true, false, false], 8.0, 2000, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn slow_recovery_keeps_infection_nearly_monotone() {
        let g = WeightedDigraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let p = EpidemicParams::new(vec![0.5; 3], vec![1e-9; 3]).unwrap();
        let ex = exact_marginals(&g, &p, &[0.3, 0.0, 0.0], 20.0).unwrap();
        let total: Vec<f64> = ex.states.iter().map(|s| s.iter().sum()).collect();
        assert!(total.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    }

    #[test]
    fn exact_chain_size_guard() {
        let g = WeightedDigraph::new(13, []).unwrap();
        let p = EpidemicParams::new(vec![0.1; 13], vec![0.1; 13]).unwrap();
        assert!(exact_marginals(&g, &p, &[0.0; 13], 1.0).is_err());
    }
}
