//! Primal-dual interior-point method for the log-transformed GP.
//!
//! Phase I finds a strictly feasible point by minimising `s` subject to
//! `F_i(y) <= s` (with `s >= -1`); phase II runs the primal-dual iteration
//! with an affine-scaling predictor choosing the centering parameter and a
//! backtracking line search on the residual norm.

use nalgebra::{DMatrix, DVector};

use super::transform::{log_transform, ConvexProgram, LogSumExp, LseEval};
use super::{GpProblem, GpSolution, GpStatus, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Target on the stationarity residual and on the objective accuracy
    /// implied by the surrogate duality gap.
    pub opt_tol: f64,
    /// Target on equality residuals (log scale).
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Upper bound on the centering parameter (barrier reduction factor).
    pub max_centering: f64,
    /// Sufficient-decrease fraction of the residual line search.
    pub ls_alpha: f64,
    /// Backtracking factor of the residual line search.
    pub ls_beta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { opt_tol: 1e-8, feas_tol: 1e-8, max_iter: 200, max_centering: 0.2, ls_alpha: 0.01, ls_beta: 0.5 }
    }
}

pub fn solve(problem: &GpProblem, opt_tol: f64, feas_tol: f64) -> Result<GpSolution> {
    solve_with(problem, &SolverOptions { opt_tol, feas_tol, ..SolverOptions::default() })
}

pub fn solve_with(problem: &GpProblem, opts: &SolverOptions) -> Result<GpSolution> {
    if !(opts.opt_tol > 0.0 && opts.feas_tol > 0.0) {
        return Err(Error::invalid("solver tolerances must be positive"));
    }
    let cp = log_transform(problem)?;
    let y0 = project_onto_equalities(&cp, initial_point(problem.variables()));
    let finish = |y: &DVector<f64>, out: Option<&PdOutcome>, status: GpStatus, iterations: usize| {
        let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let objective = problem.objective().expect("validated");
        GpSolution {
            objective_value: objective.eval(&x).unwrap_or(f64::NAN),
            objective_offset: problem.objective_offset(),
            x_star: x,
            status,
            kkt_residual: out.map_or(f64::NAN, |o| o.dual_residual),
            duality_gap: out.map_or(f64::NAN, |o| o.gap),
            ineq_duals: out.map_or_else(Vec::new, |o| o.z.iter().copied().collect()),
            ineq_values: cp.inequalities.iter().map(|f| f.value(y.as_slice())).collect(),
            iterations,
        }
    };

    let eq_res = eq_residual(&cp, &y0).amax();
    if eq_res > opts.feas_tol {
        return Ok(finish(&y0, None, GpStatus::Infeasible, 0));
    }

    let worst = cp.inequalities.iter().map(|f| f.value(y0.as_slice())).fold(f64::NEG_INFINITY, f64::max);
    let (start, phase1_iters) = if worst < -1e-3 {
        (y0, 0)
    } else {
        let p1 = phase_one(&cp, &y0, worst, opts);
        let s = p1.y[cp.dim];
        if !(s < -1e-10) {
            let y = p1.y.rows(0, cp.dim).into_owned();
            return Ok(finish(&y, None, GpStatus::Infeasible, p1.iterations));
        }
        (p1.y.rows(0, cp.dim).into_owned(), p1.iterations)
    };

    let out = primal_dual(&cp, start, opts, None);
    let status = if out.converged { GpStatus::Optimal } else { GpStatus::MaxIter };
    Ok(finish(&out.y.clone(), Some(&out), status, phase1_iters + out.iterations))
}

fn initial_point(vars: &[Variable]) -> DVector<f64> {
    DVector::from_iterator(
        vars.len(),
        vars.iter().map(|v| match (v.lo, v.hi) {
            (Some(l), Some(h)) => 0.5 * (l.ln() + h.ln()),
            (Some(l), None) => l.ln() + 1.0,
            (None, Some(h)) => h.ln() - 1.0,
            (None, None) => 0.0,
        }),
    )
}

fn eq_residual(cp: &ConvexProgram, y: &DVector<f64>) -> DVector<f64> {
    &cp.eq_matrix * y - &cp.eq_rhs
}

/// Minimum-norm correction of `y` onto `E y = g`.
fn project_onto_equalities(cp: &ConvexProgram, y: DVector<f64>) -> DVector<f64> {
    if cp.eq_matrix.nrows() == 0 {
        return y;
    }
    let r = eq_residual(cp, &y);
    let gram = &cp.eq_matrix * cp.eq_matrix.transpose();
    match gram.pseudo_inverse(1e-12) {
        Ok(pinv) => &y - cp.eq_matrix.transpose() * (pinv * r),
        Err(_) => y,
    }
}

fn phase_one(cp: &ConvexProgram, y0: &DVector<f64>, worst: f64, opts: &SolverOptions) -> PdOutcome {
    let s = cp.dim;
    let mut inequalities: Vec<LogSumExp> = cp.inequalities.iter().map(|f| f.with_shift_var(s, -1.0)).collect();
    // s >= -1 and a wide box around the start keep the auxiliary optimum
    // attained even when the original problem has unbounded directions
    inequalities.push(LogSumExp::from_terms(vec![(-1.0, vec![(s, -1.0)])]));
    for j in 0..cp.dim {
        inequalities.push(LogSumExp::from_terms(vec![(-y0[j] - PHASE_ONE_RADIUS, vec![(j, 1.0)])]));
        inequalities.push(LogSumExp::from_terms(vec![(y0[j] - PHASE_ONE_RADIUS, vec![(j, -1.0)])]));
    }
    let mut eq_matrix = DMatrix::zeros(cp.eq_matrix.nrows(), cp.dim + 1);
    eq_matrix.view_mut((0, 0), (cp.eq_matrix.nrows(), cp.dim)).copy_from(&cp.eq_matrix);
    let aux = ConvexProgram {
        dim: cp.dim + 1,
        objective: LogSumExp::from_terms(vec![(0.0, vec![(s, 1.0)])]),
        inequalities,
        eq_matrix,
        eq_rhs: cp.eq_rhs.clone(),
    };
    let mut start = y0.clone().insert_row(cp.dim, 0.0);
    start[s] = worst.max(-0.5) + 1.0;
    let loose = SolverOptions { opt_tol: opts.opt_tol.max(1e-7), ..*opts };
    // any point with this much slack is a good enough start for phase II
    primal_dual(&aux, start, &loose, Some(&|y: &DVector<f64>| y[s] <= PHASE_ONE_SLACK))
}

const PHASE_ONE_RADIUS: f64 = 30.0;
const RECENTER: f64 = 0.9;
const BOUNDARY_FRACTION: f64 = 0.01;
const PHASE_ONE_SLACK: f64 = -1e-2;
const NEIGHBORHOOD: f64 = 1e-3;
const MIN_STEP: f64 = 1e-8;
const EQUILIBRATION_SWEEPS: usize = 4;
/// Backtracking factor while the trial point violates a constraint; the
/// feasible steps form an interval, so a gentle factor keeps long steps.
const FEASIBILITY_BACKTRACK: f64 = 0.8;

/// Smallest complementarity product relative to the average one.
fn centrality(f: impl Iterator<Item = f64>, z: &DVector<f64>) -> f64 {
    let prods: Vec<f64> = f.zip(z.iter()).map(|(fi, zi)| -fi * zi).collect();
    let avg = prods.iter().sum::<f64>() / prods.len() as f64;
    prods.iter().cloned().fold(f64::INFINITY, f64::min) / avg
}

struct PdOutcome {
    y: DVector<f64>,
    z: DVector<f64>,
    iterations: usize,
    converged: bool,
    gap: f64,
    dual_residual: f64,
}

/// Derivative information at one primal point.
struct Point {
    f0: LseEval,
    fi: Vec<LseEval>,
}

impl Point {
    fn at(cp: &ConvexProgram, y: &DVector<f64>) -> Self {
        let ys = y.as_slice();
        Self { f0: cp.objective.evaluate(ys), fi: cp.inequalities.iter().map(|f| f.evaluate(ys)).collect() }
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.fi.iter().map(|e| e.value)
    }
}

fn scatter_add(out: &mut DVector<f64>, f: &LogSumExp, ev: &LseEval, scale: f64) {
    for (&v, &g) in f.support().iter().zip(&ev.grad) {
        out[v] += scale * g;
    }
}

fn dot_support(f: &LogSumExp, ev: &LseEval, d: &DVector<f64>) -> f64 {
    f.support().iter().zip(&ev.grad).map(|(&v, &g)| g * d[v]).sum()
}

fn dual_residual(cp: &ConvexProgram, pt: &Point, z: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
    let mut r = cp.eq_matrix.transpose() * nu;
    scatter_add(&mut r, &cp.objective, &pt.f0, 1.0);
    for (k, (f, ev)) in cp.inequalities.iter().zip(&pt.fi).enumerate() {
        scatter_add(&mut r, f, ev, z[k]);
    }
    r
}

fn residual_norm(cp: &ConvexProgram, pt: &Point, y: &DVector<f64>, z: &DVector<f64>, nu: &DVector<f64>, inv_t: f64) -> f64 {
    let rd = dual_residual(cp, pt, z, nu).norm_squared();
    let rc: f64 = pt.values().zip(z.iter()).map(|(f, zi)| (-zi * f - inv_t).powi(2)).sum();
    let rp = eq_residual(cp, y).norm_squared();
    (rd + rc + rp).sqrt()
}

type StopRule<'a> = Option<&'a dyn Fn(&DVector<f64>) -> bool>;

fn primal_dual(cp: &ConvexProgram, mut y: DVector<f64>, opts: &SolverOptions, stop: StopRule) -> PdOutcome {
    let n = cp.dim;
    let m = cp.inequalities.len();
    let p = cp.eq_matrix.nrows();
    let mut pt = Point::at(cp, &y);
    let mut z = DVector::from_iterator(m, pt.values().map(|f| 1.0 / (-f)));
    let mut nu = DVector::zeros(p);
    let mut gap = f64::INFINITY;
    let mut rd_inf = f64::INFINITY;
    let mut last_step = 1.0f64;

    for iter in 0..opts.max_iter {
        let f: Vec<f64> = pt.values().collect();
        gap = -f.iter().zip(z.iter()).map(|(fi, zi)| fi * zi).sum::<f64>();
        let r_dual = dual_residual(cp, &pt, &z, &nu);
        let r_pri = eq_residual(cp, &y);
        rd_inf = r_dual.amax();
        // a log-gap of g bounds the objective error by roughly g * F0(x)
        let gap_target = opts.opt_tol * (-pt.f0.value).exp().min(1.0);
        let early = iter > 0 && stop.is_some_and(|f| f(&y));
        if early || (rd_inf <= opts.opt_tol && r_pri.amax() <= opts.feas_tol && gap <= gap_target) {
            return PdOutcome { y, z, iterations: iter, converged: true, gap, dual_residual: rd_inf };
        }

        // unreduced Newton system in (dy, dz, dnu):
        //   [ H  J^T  A^T ]   H = grad^2 F0 + sum z_k grad^2 F_k
        //   [ J  F/Z   0  ]   J = rows grad F_k, F/Z = diag(f_k / z_k)
        //   [ A   0    0  ]
        // eliminating dz instead would put z_k / f_k into H, which swamps
        // everything once a slack is near zero
        let size = n + m + p;
        let mut kkt = DMatrix::zeros(size, size);
        {
            let mut h = DMatrix::zeros(n, n);
            cp.objective.add_hessian(&pt.f0, 1.0, &mut h);
            for (k, (fk, ev)) in cp.inequalities.iter().zip(&pt.fi).enumerate() {
                fk.add_hessian(ev, z[k], &mut h);
            }
            let diag_scale = (0..n).map(|i| h[(i, i)].abs()).fold(1.0, f64::max);
            for i in 0..n {
                h[(i, i)] += 1e-13 * diag_scale;
            }
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        }
        for (k, (fk, ev)) in cp.inequalities.iter().zip(&pt.fi).enumerate() {
            for (&v, &g) in fk.support().iter().zip(&ev.grad) {
                kkt[(n + k, v)] = g;
                kkt[(v, n + k)] = g;
            }
            kkt[(n + k, n + k)] = f[k] / z[k];
        }
        kkt.view_mut((n + m, 0), (p, n)).copy_from(&cp.eq_matrix);
        kkt.view_mut((0, n + m), (n, p)).copy_from(&cp.eq_matrix.transpose());
        // symmetric Ruiz equilibration
        let mut scale = DVector::from_element(size, 1.0);
        let mut scaled = kkt.clone();
        for _ in 0..EQUILIBRATION_SWEEPS {
            let r: Vec<f64> = (0..size).map(|i| scaled.row(i).amax()).collect();
            for i in 0..size {
                if r[i] > 0.0 {
                    let d = 1.0 / r[i].sqrt();
                    scale[i] *= d;
                    scaled.row_mut(i).scale_mut(d);
                    scaled.column_mut(i).scale_mut(d);
                }
            }
        }
        let lu = scaled.lu();
        let kkt_solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            let mut x = lu.solve(&rhs.component_mul(&scale))?.component_mul(&scale);
            let r = rhs - &kkt * &x;
            if let Some(dx) = lu.solve(&r.component_mul(&scale)) {
                x += dx.component_mul(&scale);
            }
            x.iter().all(|v| v.is_finite()).then_some(x)
        };

        let direction = |r_cent: &[f64]| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            let mut rhs = DVector::zeros(size);
            rhs.rows_mut(0, n).copy_from(&(-&r_dual));
            for k in 0..m {
                rhs[n + k] = r_cent[k] / z[k];
            }
            rhs.rows_mut(n + m, p).copy_from(&(-&r_pri));
            let sol = kkt_solve(&rhs)?;
            Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned(), sol.rows(n + m, p).into_owned()))
        };

        // a failed line search is retried once with a pure centering step
        let mut accepted = None;
        for pure_centering in [false, true] {
            let inv_t = if m == 0 {
                0.0
            } else {
                // affine-scaling predictor picks the centering parameter
                let r_aff: Vec<f64> = f.iter().zip(z.iter()).map(|(fi, zi)| -zi * fi).collect();
                let sigma = match direction(&r_aff) {
                    Some((dy, dz, _)) => {
                        let lin: Vec<f64> = cp
                            .inequalities
                            .iter()
                            .zip(&pt.fi)
                            .map(|(fk, ev)| dot_support(fk, ev, &dy))
                            .collect();
                        let mut a = 1.0f64;
                        for k in 0..m {
                            if dz[k] < 0.0 {
                                a = a.min(-z[k] / dz[k]);
                            }
                            if lin[k] > 0.0 {
                                a = a.min(-f[k] / lin[k]);
                            }
                        }
                        let gap_aff: f64 = (0..m).map(|k| -(z[k] + a * dz[k]) * (f[k] + a * lin[k])).sum();
                        (gap_aff.max(0.0) / gap).powi(3).clamp(1e-3, opts.max_centering)
                    }
                    None => opts.max_centering,
                };
                // a short previous step means the iterate drifted off the central path
                let sigma = if last_step < 0.1 { sigma.max(RECENTER) } else { sigma };
                let sigma = if pure_centering { 1.0 } else { sigma };
                sigma * gap / m as f64
            };

            let r_cent: Vec<f64> = f.iter().zip(z.iter()).map(|(fi, zi)| -zi * fi - inv_t).collect();
            let Some((dy, dz, dnu)) = direction(&r_cent) else {
                break;
            };

            let mut s = 1.0f64;
            for k in 0..m {
                if dz[k] < 0.0 {
                    s = s.min(-z[k] / dz[k]);
                }
            }
            s *= 0.99;
            if s > 1.0 {
                s = 1.0;
            }
            let r0 = residual_norm(cp, &pt, &y, &z, &nu, inv_t);
            let keep = NEIGHBORHOOD.min(centrality(f.iter().cloned(), &z));
            while s > MIN_STEP {
                let y_new = &y + &dy * s;
                let ys = y_new.as_slice();
                // slacks may shrink by a bounded factor per step, otherwise the
                // reduced system loses all precision near the boundary
                let feasible = cp.inequalities.iter().zip(&f).all(|(fk, &f_old)| {
                    let v = fk.value(ys);
                    v <= BOUNDARY_FRACTION * f_old && v.is_finite()
                });
                if !feasible {
                    s *= FEASIBILITY_BACKTRACK;
                    continue;
                }
                {
                    let pt_new = Point::at(cp, &y_new);
                    let z_new = &z + &dz * s;
                    let nu_new = &nu + &dnu * s;
                    let r1 = residual_norm(cp, &pt_new, &y_new, &z_new, &nu_new, inv_t);
                    // stay in a wide neighbourhood of the central path
                    let centred = centrality(pt_new.values(), &z_new) >= keep;
                    if centred && r1 <= (1.0 - opts.ls_alpha * s) * r0 {
                        accepted = Some((y_new, z_new, nu_new, pt_new, s));
                        break;
                    }
                }
                s *= opts.ls_beta;
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((y_new, z_new, nu_new, pt_new, s)) => {
                last_step = s;
                y = y_new;
                z = z_new;
                nu = nu_new;
                pt = pt_new;
            }
            None => {
                return PdOutcome { y, z, iterations: iter + 1, converged: false, gap, dual_residual: rd_inf };
            }
        }
    }
    PdOutcome { y, z, iterations: opts.max_iter, converged: false, gap, dual_residual: rd_inf }
}
