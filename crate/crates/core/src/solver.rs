//! Nodal residual, damped Newton with cone safeguarding, and continuation
//! in the homotopy parameter `t`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::{Mat, Par};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::node_geometry;
use crate::mesh::{ScalarField, SphereMesh};
use crate::par::{try_map_range, Execution};
use crate::problem::{PreparedProblem, ProblemSpec};
use crate::symmetric::{in_gamma_k, quotient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Max-norm tolerance on the nodal residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub t_step_init: f64,
    pub t_step_min: f64,
    /// Step reduction factor of the backtracking line search.
    pub damping: f64,
    pub max_halvings: usize,
    /// Jacobian column `j` uses the step `fd_step * (1 + |r_j|)`.
    pub fd_step: f64,
    /// Newton solves with at most this many iterations count as easy.
    pub easy_iterations: usize,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 30,
            t_step_init: 0.1,
            t_step_min: 1e-3,
            damping: 0.5,
            max_halvings: 20,
            fd_step: 1e-6,
            easy_iterations: 4,
            exec: Execution::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.into()));
        if !(self.newton_tol > 0.0) {
            return bad("solver.newton_tol must be positive");
        }
        if self.max_newton == 0 {
            return bad("solver.max_newton must be positive");
        }
        if !(self.t_step_min > 0.0) {
            return bad("solver.t_step_min must be positive");
        }
        if !(self.t_step_init >= self.t_step_min && self.t_step_init <= 1.0) {
            return bad("solver.t_step_init must lie in [solver.t_step_min, 1]");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("solver.damping must lie in (0, 1)");
        }
        if !(self.fd_step > 0.0) {
            return bad("solver.fd_step must be positive");
        }
        Ok(())
    }
}

/// Residual at one node: `sigma_k/sigma_l(mu(eta)) - f^t`.
pub fn residual_at(prep: &PreparedProblem<'_>, t: f64, values: &[f64], node: usize) -> Result<f64> {
    let spec = prep.spec();
    let g = node_geometry(prep.mesh(), values, node, &spec.profile)?;
    if !in_gamma_k(&g.mu, spec.q.k) {
        return Err(Error::NotAdmissible { node, mu: g.mu });
    }
    Ok(quotient(&g.mu, spec.q)? - prep.f_t(t, node, g.r, g.nu_r)?)
}

pub fn residual_values(
    prep: &PreparedProblem<'_>,
    t: f64,
    values: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    try_map_range(exec, values.len(), |i| residual_at(prep, t, values, i))
}

pub fn residual(spec: &ProblemSpec, t: f64, r: &ScalarField) -> Result<ScalarField> {
    let prep = spec.prepare(r.mesh())?;
    let values = residual_values(&prep, t, r.values(), Execution::default())?;
    ScalarField::new(Arc::clone(r.mesh()), values)
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finite-difference Jacobian of the residual. Column `j` is only evaluated
/// on the stencil support of node `j`; a perturbation leaving the cone
/// falls back to a one-sided difference.
pub fn jacobian_fd(
    prep: &PreparedProblem<'_>,
    t: f64,
    values: &[f64],
    base: &[f64],
    opts: &SolverOptions,
) -> Result<Mat<f64>> {
    let mesh = prep.mesh();
    let n = values.len();
    let columns = try_map_range(opts.exec, n, |j| -> Result<Vec<(usize, f64)>> {
        let h = opts.fd_step * (1.0 + values[j].abs());
        let mut work = values.to_vec();
        let support = mesh.stencil_support(j);
        let mut eval = |shift: f64| -> Result<Vec<f64>> {
            work[j] = values[j] + shift;
            support
                .iter()
                .map(|&i| residual_at(prep, t, &work, i))
                .collect()
        };
        let plus = eval(h);
        let minus = eval(-h);
        let entries = match (plus, minus) {
            (Ok(p), Ok(m)) => p
                .iter()
                .zip(&m)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
            (Ok(p), Err(_)) => p
                .iter()
                .zip(&support)
                .map(|(a, &i)| (a - base[i]) / h)
                .collect(),
            (Err(_), Ok(m)) => m
                .iter()
                .zip(&support)
                .map(|(b, &i)| (base[i] - b) / h)
                .collect(),
            (Err(e), Err(_)) => return Err(e),
        };
        Ok(support.into_iter().zip(entries).collect())
    })?;
    let mut jac = Mat::<f64>::zeros(n, n);
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

fn faer_par(exec: Execution) -> Par {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return Par::rayon(0);
    }
    let _ = exec;
    Par::Seq
}

/// Solves `a x = b` by LU with partial pivoting; `None` if `a` is singular.
pub fn lu_solve(mut a: Mat<f64>, b: &[f64], exec: Execution) -> Option<Vec<f64>> {
    let n = a.nrows();
    let par = faer_par(exec);
    let mut fwd = vec![0usize; n];
    let mut bwd = vec![0usize; n];
    let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, f64>(
        n,
        n,
        par,
        Default::default(),
    ));
    factor::lu_in_place(
        a.as_mut(),
        &mut fwd,
        &mut bwd,
        par,
        MemStack::new(&mut mem),
        Default::default(),
    );
    let scale = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
    if (0..n).any(|i| !(a[(i, i)].abs() > 1e-14 * scale)) {
        return None;
    }
    let perm = PermRef::new_checked(&fwd, &bwd, n);
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, f64>(n, 1, par));
    solve::solve_in_place(
        a.as_ref(),
        a.as_ref(),
        perm,
        rhs.as_mut(),
        par,
        MemStack::new(&mut mem),
    );
    let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Newton step `-J^-1 R` at `values`.
pub fn newton_step(
    prep: &PreparedProblem<'_>,
    t: f64,
    values: &[f64],
    res: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let jac = jacobian_fd(prep, t, values, res, opts)?;
    let rhs: Vec<f64> = res.iter().map(|x| -x).collect();
    lu_solve(jac, &rhs, opts.exec).ok_or(Error::SingularJacobian)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual max-norm before each iteration and after the last.
    pub history: Vec<f64>,
    pub halvings: usize,
}

/// Radii allowed for Newton iterates: `(r1 - d, r2 + d)`, `d = 0.05 (r2 - r1)`.
pub fn barrier_guard(spec: &ProblemSpec) -> (f64, f64) {
    let d = 0.05 * (spec.r2 - spec.r1);
    (spec.r1 - d, spec.r2 + d)
}

fn check_guard(values: &[f64], guard: (f64, f64)) -> Result<()> {
    match values.iter().position(|&r| !(r > guard.0 && r < guard.1)) {
        Some(node) => Err(Error::BarrierGuard {
            node,
            r: values[node],
            lo: guard.0,
            hi: guard.1,
        }),
        None => Ok(()),
    }
}

/// Damped Newton at fixed `t`. Every accepted iterate is admissible,
/// inside the barrier guard, and strictly reduces the residual max-norm.
pub fn newton_solve_values(
    prep: &PreparedProblem<'_>,
    t: f64,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, NewtonStats)> {
    let guard = barrier_guard(prep.spec());
    check_guard(init, guard)?;
    let mut r = init.to_vec();
    let mut res = residual_values(prep, t, &r, opts.exec)?;
    let mut norm = max_norm(&res);
    let mut stats = NewtonStats {
        iterations: 0,
        residual_norm: norm,
        history: vec![norm],
        halvings: 0,
    };
    while norm > opts.newton_tol {
        if stats.iterations == opts.max_newton {
            return Err(Error::MaxIterations {
                iterations: stats.iterations,
                residual: norm,
            });
        }
        let step = newton_step(prep, t, &r, &res, opts)?;
        let mut alpha = 1.0;
        let mut halvings = 0;
        loop {
            let cand: Vec<f64> = r.iter().zip(&step).map(|(x, d)| x + alpha * d).collect();
            let attempt = check_guard(&cand, guard)
                .and_then(|_| residual_values(prep, t, &cand, opts.exec))
                .and_then(|cres| {
                    let cnorm = max_norm(&cres);
                    if cnorm < norm {
                        Ok((cres, cnorm))
                    } else {
                        Err(Error::LineSearch {
                            halvings,
                            residual: cnorm,
                        })
                    }
                });
            match attempt {
                Ok((cres, cnorm)) => {
                    r = cand;
                    res = cres;
                    norm = cnorm;
                    break;
                }
                Err(e) if halvings == opts.max_halvings => {
                    return Err(match e {
                        Error::LineSearch { .. } => Error::LineSearch {
                            halvings,
                            residual: norm,
                        },
                        e => e,
                    });
                }
                Err(_) => {
                    alpha *= opts.damping;
                    halvings += 1;
                }
            }
        }
        stats.iterations += 1;
        stats.halvings += halvings;
        stats.history.push(norm);
    }
    stats.residual_norm = norm;
    Ok((r, stats))
}

pub fn newton_solve(
    spec: &ProblemSpec,
    t: f64,
    init: &ScalarField,
    opts: &SolverOptions,
) -> Result<(ScalarField, NewtonStats)> {
    opts.validate()?;
    let prep = spec.prepare(init.mesh())?;
    let (values, stats) = newton_solve_values(&prep, t, init.values(), opts)?;
    Ok((ScalarField::new(Arc::clone(init.mesh()), values)?, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationState {
    pub t: f64,
    #[serde(skip)]
    pub r: ScalarField,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ContinuationStatus {
    Converged,
    /// The step size fell below the minimum while trying to advance from
    /// `t_from` to `t_to`.
    Breakdown {
        t_from: f64,
        t_to: f64,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub status: ContinuationStatus,
    /// Accepted states in order of increasing `t`.
    pub history: Vec<ContinuationState>,
}

impl ContinuationResult {
    pub fn converged(&self) -> bool {
        self.status == ContinuationStatus::Converged
    }

    /// Last accepted state.
    pub fn last(&self) -> &ContinuationState {
        self.history.last().expect("history holds the t = 0 state")
    }

    pub fn total_newton_iterations(&self) -> usize {
        self.history.iter().map(|s| s.newton_iters).sum()
    }
}

/// Continuation from the round solution `r = phi_rm` at `t = 0` to `t = 1`.
///
/// `on_accept` sees every accepted state. Failure of the `t = 0` solve is an
/// error; later Newton failures shrink the step, and a step below
/// `t_step_min` ends the run with [`ContinuationStatus::Breakdown`].
pub fn continuation_solve_with(
    spec: &ProblemSpec,
    mesh: &Arc<SphereMesh>,
    opts: &SolverOptions,
    mut on_accept: impl FnMut(&ContinuationState),
) -> Result<ContinuationResult> {
    opts.validate()?;
    let prep = spec.prepare(mesh)?;
    let start = vec![spec.phi_rm; mesh.len()];
    let (r0, stats0) = newton_solve_values(&prep, 0.0, &start, opts)?;
    let mut state = ContinuationState {
        t: 0.0,
        r: ScalarField::new(Arc::clone(mesh), r0)?,
        newton_iters: stats0.iterations,
        residual_norm: stats0.residual_norm,
        admissible: true,
    };
    on_accept(&state);
    let mut history = vec![state.clone()];
    let mut dt = opts.t_step_init;
    let mut easy_streak = 0;
    while state.t < 1.0 {
        let t_next = if state.t + dt >= 1.0 - 1e-12 {
            1.0
        } else {
            state.t + dt
        };
        match newton_solve_values(&prep, t_next, state.r.values(), opts) {
            Ok((values, stats)) => {
                state = ContinuationState {
                    t: t_next,
                    r: ScalarField::new(Arc::clone(mesh), values)?,
                    newton_iters: stats.iterations,
                    residual_norm: stats.residual_norm,
                    admissible: true,
                };
                on_accept(&state);
                history.push(state.clone());
                if stats.iterations <= opts.easy_iterations {
                    easy_streak += 1;
                    if easy_streak >= 2 {
                        dt = (2.0 * dt).min(opts.t_step_init);
                        easy_streak = 0;
                    }
                } else {
                    easy_streak = 0;
                }
            }
            Err(e) => {
                easy_streak = 0;
                dt *= 0.5;
                if dt < opts.t_step_min {
                    return Ok(ContinuationResult {
                        status: ContinuationStatus::Breakdown {
                            t_from: state.t,
                            t_to: t_next,
                            reason: e.to_string(),
                        },
                        history,
                    });
                }
            }
        }
    }
    Ok(ContinuationResult {
        status: ContinuationStatus::Converged,
        history,
    })
}

pub fn continuation_solve(
    spec: &ProblemSpec,
    mesh: &Arc<SphereMesh>,
    opts: &SolverOptions,
) -> Result<ContinuationResult> {
    continuation_solve_with(spec, mesh, opts, |_| {})
}

pub fn residual_norm(
    prep: &PreparedProblem<'_>,
    t: f64,
    values: &[f64],
    exec: Execution,
) -> Result<f64> {
    residual_values(prep, t, values, exec).map(|v| max_norm(&v))
}
