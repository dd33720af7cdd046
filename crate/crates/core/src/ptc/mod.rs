//! Pseudo-transient continuation driver.
//!
//! Each step solves `(M(Δt) + F′(v)) s = −F(v)` with a per-element pseudo
//! time step `Δt_e` and sets `v ← v + s`. Strategies differ in how `Δt` is
//! chosen; the two Newton baselines skip the mass shift and damp the step
//! instead.

mod controllers;
mod report;

use std::sync::Arc;
use std::time::Instant;

pub use controllers::{cfl_err, cfl_iter, local_dt, ErrControllerParams, EPS_U};
pub use report::{IterationRecord, SolveReport};

use crate::error::{Error, Result};
use crate::features;
use crate::fem::Problem;
use crate::linsolve::Factorization;
use crate::nn::Model;

/// How the pseudo time step (or Newton damping) is chosen.
#[derive(Debug, Clone)]
pub enum CflStrategy {
    /// Global CFL from [`cfl_iter`].
    IterSchedule,
    /// Global CFL from the error controller [`cfl_err`].
    ErrController(ErrControllerParams),
    /// Per-element `Δt` predicted by a trained model, clipped to
    /// `[dt_floor, dt_cap]`.
    Learned { model: Arc<Model>, dt_floor: f64, dt_cap: f64 },
    /// Newton with constant damping.
    NewtonConstant { damping: f64 },
    /// Newton with backtracking on the residual norm.
    NewtonAdaptive { lambda_min: f64 },
}

impl CflStrategy {
    pub fn err_default() -> Self {
        CflStrategy::ErrController(ErrControllerParams::default())
    }

    pub fn learned(model: Arc<Model>) -> Self {
        CflStrategy::Learned { model, dt_floor: 1e-12, dt_cap: 1e12 }
    }

    /// Short identifier used in file names and tables.
    pub fn name(&self) -> &'static str {
        match self {
            CflStrategy::IterSchedule => "iter",
            CflStrategy::ErrController(_) => "err",
            CflStrategy::Learned { .. } => "nn",
            CflStrategy::NewtonConstant { .. } => "nc",
            CflStrategy::NewtonAdaptive { .. } => "an",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CflStrategy::IterSchedule => Ok(()),
            CflStrategy::ErrController(p) => p.validate(),
            CflStrategy::Learned { dt_floor, dt_cap, .. } => {
                if *dt_floor > 0.0 && dt_floor <= dt_cap {
                    Ok(())
                } else {
                    Err(Error::Config(format!("need 0 < dt_floor <= dt_cap, got {dt_floor}, {dt_cap}")))
                }
            }
            CflStrategy::NewtonConstant { damping } => {
                if *damping > 0.0 && *damping <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("damping must lie in (0, 1], got {damping}")))
                }
            }
            CflStrategy::NewtonAdaptive { lambda_min } => {
                if *lambda_min > 0.0 && *lambda_min <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("lambda_min must lie in (0, 1], got {lambda_min}")))
                }
            }
        }
    }
}

/// Stopping and iteration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative tolerance on the residual norm, `‖F(v)‖ ≤ tol·‖F(v⁰)‖`.
    pub tol: f64,
    /// Runs are declared diverged once `‖F‖` exceeds this multiple of the
    /// initial residual.
    pub blowup: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, blowup: 1e12 }
    }
}

/// The iterate handed to an observer before each step.
pub struct Snapshot<'a> {
    /// Number of steps taken so far.
    pub iter: usize,
    pub state: &'a [f64],
    pub residual: &'a [f64],
    pub residual_norm: f64,
}

/// Per-element time steps for a global CFL number at state `x`.
pub fn local_dts(problem: &Problem, x: &[f64], cfl: f64) -> Vec<f64> {
    let sizes = problem.mesh().element_sizes();
    problem
        .centroid_speeds(x)
        .iter()
        .zip(sizes)
        .map(|(&s, &h)| local_dt(cfl, h, s))
        .collect()
}

/// One pseudo-transient step from `x` with residual `r`: returns the new
/// state and the step.
pub fn ptc_step(problem: &Problem, x: &[f64], r: &[f64], dt: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = problem.ptc_matrix(x, dt)?;
    let s = solve_step(&a, r)?;
    let next = x.iter().zip(&s).map(|(a, b)| a + b).collect();
    Ok((next, s))
}

/// Newton direction `s = −F′(x)⁻¹ r`.
pub fn newton_direction(problem: &Problem, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    solve_step(&problem.jacobian(x)?, r)
}

fn solve_step(a: &crate::sparse::SparseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    let mut s = Factorization::new(a)?.solve(r)?;
    for v in &mut s {
        *v = -*v;
    }
    Ok(s)
}

/// Outcome of a backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub lambda: f64,
    pub value: f64,
    /// No trial met the sufficient-decrease condition; the best trial was
    /// taken anyway.
    pub forced: bool,
}

/// Armijo backtracking: starting at `λ = 1`, halve while
/// `eval(λ) > (1 − λ/2)·f0`, stopping at `lambda_min`. `eval` returns `None`
/// for failed evaluations, which count as rejections.
pub fn armijo(f0: f64, lambda_min: f64, mut eval: impl FnMut(f64) -> Option<f64>) -> LineSearch {
    let mut lambda = 1.0;
    let mut best: Option<(f64, f64)> = None;
    loop {
        let value = eval(lambda).filter(|v| v.is_finite());
        if let Some(v) = value {
            if v <= (1.0 - 0.5 * lambda) * f0 {
                return LineSearch { lambda, value: v, forced: false };
            }
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((lambda, v));
            }
        }
        let next = 0.5 * lambda;
        if next < lambda_min {
            break;
        }
        lambda = next;
    }
    match best {
        Some((lambda, value)) => LineSearch { lambda, value, forced: true },
        None => LineSearch { lambda: lambda_min, value: f64::INFINITY, forced: true },
    }
}

/// Runs the nonlinear iteration from the problem's initial guess.
pub fn solve_nonlinear(problem: &Problem, strategy: &CflStrategy, opts: &SolveOptions) -> SolveReport {
    solve_from(problem, strategy, opts, problem.initial_guess(), &mut |_| {})
}

/// Runs the nonlinear iteration from `x0`, calling `observer` on every
/// iterate up to the last one that was not rejected as diverged.
pub fn solve_from(
    problem: &Problem,
    strategy: &CflStrategy,
    opts: &SolveOptions,
    x0: Vec<f64>,
    observer: &mut dyn FnMut(&Snapshot),
) -> SolveReport {
    let start = Instant::now();
    let mut report = SolveReport::new(strategy.name(), x0.clone());
    if let Err(e) = strategy.validate() {
        report.failure = Some(e.to_string());
        return report;
    }
    let mut x = x0;
    let mut r = match problem.residual(&x) {
        Ok(r) => r,
        Err(e) => {
            report.failure = Some(e.to_string());
            return report;
        }
    };
    let r0 = problem.residual_norm(&r);
    let mut norm = r0;
    report.push(IterationRecord::initial(r0, start.elapsed()));
    let target = opts.tol * r0;

    // error estimates e_k = ‖F(v^k)‖ / ‖F(v^0)‖
    let mut errors = vec![1.0];
    let mut cfl = match strategy {
        CflStrategy::ErrController(p) => p.cfl0,
        _ => 1.0,
    };

    for n in 1..=opts.max_iter + 1 {
        observer(&Snapshot { iter: n - 1, state: &x, residual: &r, residual_norm: norm });
        if norm <= target {
            report.converged = true;
            break;
        }
        if n > opts.max_iter {
            break;
        }
        let t0 = Instant::now();
        let step = take_step(problem, strategy, &x, &r, norm, n, &errors, &mut cfl);
        let (next, cfl_used, dt_range) = match step {
            Ok(v) => v,
            Err(e) => {
                report.failure = Some(format!("iteration {n}: {e}"));
                break;
            }
        };
        x = next;
        r = match problem.residual(&x) {
            Ok(r) => r,
            Err(e) => {
                report.failure = Some(format!("iteration {n}: diverged ({e})"));
                break;
            }
        };
        norm = problem.residual_norm(&r);
        report.push(IterationRecord {
            iter: n,
            residual: norm,
            global_cfl: cfl_used,
            dt_range,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        if !norm.is_finite() || norm > opts.blowup * r0 {
            report.failure = Some(format!("iteration {n}: diverged (residual {norm:e})"));
            break;
        }
        errors.push(if r0 > 0.0 { norm / r0 } else { 0.0 });
    }
    report.final_state = x;
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

type StepOutcome = (Vec<f64>, Option<f64>, Option<(f64, f64)>);

#[allow(clippy::too_many_arguments)]
fn take_step(
    problem: &Problem,
    strategy: &CflStrategy,
    x: &[f64],
    r: &[f64],
    norm: f64,
    n: usize,
    errors: &[f64],
    cfl: &mut f64,
) -> Result<StepOutcome> {
    let range = |dt: &[f64]| {
        let lo = dt.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = dt.iter().copied().fold(0.0, f64::max);
        Some((lo, hi))
    };
    match strategy {
        CflStrategy::IterSchedule | CflStrategy::ErrController(_) => {
            let c = match strategy {
                CflStrategy::ErrController(p) => {
                    let back = |k: usize| errors.len().checked_sub(k).map(|i| errors[i]);
                    *cfl = cfl_err([back(1), back(2), back(3)], *cfl, p)?;
                    *cfl
                }
                _ => cfl_iter(n)?,
            };
            let dt = local_dts(problem, x, c);
            let (next, _) = ptc_step(problem, x, r, &dt)?;
            Ok((next, Some(c), range(&dt)))
        }
        CflStrategy::Learned { model, dt_floor, dt_cap } => {
            let feats = features::extract_all(problem, x, r)?;
            let mut dt = model.predict_dt_batch(&feats)?;
            for t in &mut dt {
                *t = if t.is_nan() { *dt_floor } else { t.clamp(*dt_floor, *dt_cap) };
            }
            let (next, _) = ptc_step(problem, x, r, &dt)?;
            Ok((next, None, range(&dt)))
        }
        CflStrategy::NewtonConstant { damping } => {
            let s = newton_direction(problem, x, r)?;
            Ok((x.iter().zip(&s).map(|(a, b)| a + damping * b).collect(), None, None))
        }
        CflStrategy::NewtonAdaptive { lambda_min } => {
            let s = newton_direction(problem, x, r)?;
            let trial = |lambda: f64| -> Vec<f64> { x.iter().zip(&s).map(|(a, b)| a + lambda * b).collect() };
            let ls = armijo(norm, *lambda_min, |lambda| {
                problem.residual(&trial(lambda)).ok().map(|rr| problem.residual_norm(&rr))
            });
            Ok((trial(ls.lambda), None, None))
        }
    }
}

#[cfg(test)]
mod tests;
