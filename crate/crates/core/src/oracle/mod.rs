//! Training targets for the learned controller.
//!
//! For a snapshot `vⁿ` of a baseline run and the converged solution `v*`,
//! the optimal local pseudo-time steps minimize the velocity L² distance
//! between one PTC step and `v*`:
//!
//! ```text
//! g(θ) = ‖vⁿ − (M(e^θ) + F′(vⁿ))⁻¹ F(vⁿ) − v*‖,   θ_e = ln Δt_e.
//! ```
//!
//! With `A = M + F′`, `s = −A⁻¹F` and `d = vⁿ + s − v*`, the gradient of
//! `G = ½ dᵀWd` follows from one transposed solve `Aᵀλ = Wd`:
//! `∂G/∂θ_e = Σ_k λ_k m_{e,k} s_k`, where `m_{e,k}` is element `e`'s share
//! of the lumped mass on dof `k`.

mod dataset;
mod lbfgs;

pub use dataset::{balance_groups, generate_dataset, GeneratedData, Manifest, SnapshotRecord, TrainingCase};
pub use lbfgs::{minimize, LbfgsOptions, Minimum};

use crate::error::{Error, Result};
use crate::fem::Problem;
use crate::linsolve::Factorization;
use crate::mesh::Mesh;
use crate::ptc::{cfl_iter, local_dts, solve_from, CflStrategy, SolveOptions};
use crate::sparse::SparseMatrix;

pub const THETA_MIN: f64 = -27.631021115928547; // ln 1e-12
pub const THETA_MAX: f64 = 27.631021115928547; // ln 1e12

/// `W x` for the consistent P1 mass on the velocity components; pressure
/// entries of the result are zero.
pub fn velocity_mass_apply(mesh: &Mesh, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (e, t) in mesh.elements().iter().enumerate() {
        let a12 = mesh.element_area(e) / 12.0;
        for c in 0..2 {
            let sum: f64 = t.iter().map(|&v| x[3 * v + c]).sum();
            for &v in t {
                out[3 * v + c] += a12 * (x[3 * v + c] + sum);
            }
        }
    }
    out
}

/// L² norm of the velocity part of an interleaved state.
pub fn velocity_l2(mesh: &Mesh, x: &[f64]) -> f64 {
    let w = velocity_mass_apply(mesh, x);
    x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// The step-to-solution objective at one snapshot.
pub struct StepObjective<'a> {
    problem: &'a Problem,
    jacobian: SparseMatrix,
    residual: Vec<f64>,
    /// `vⁿ − v*`
    offset: Vec<f64>,
}

/// Value and gradient of `G = ½‖d‖²_W` at one `θ`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// The PTC step `s(θ)`.
    pub step: Vec<f64>,
}

impl<'a> StepObjective<'a> {
    pub fn new(problem: &'a Problem, state: &[f64], reference: &[f64]) -> Result<Self> {
        let n = problem.num_dofs();
        if reference.len() != n {
            return Err(Error::Dimension { expected: n, found: reference.len() });
        }
        let (residual, jacobian) = problem.residual_and_jacobian(state)?;
        let offset = state.iter().zip(reference).map(|(a, b)| a - b).collect();
        Ok(Self { problem, jacobian, residual, offset })
    }

    pub fn num_elements(&self) -> usize {
        self.problem.mesh().num_elements()
    }

    /// `G(θ)` with its adjoint gradient.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let mesh = self.problem.mesh();
        if theta.len() != mesh.num_elements() {
            return Err(Error::Dimension { expected: mesh.num_elements(), found: theta.len() });
        }
        let dt: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let mut a = self.jacobian.clone();
        self.problem.add_pseudo_time_mass(&mut a, &dt)?;
        let lu = Factorization::new(&a)?;
        let mut step = lu.solve(&self.residual)?;
        step.iter_mut().for_each(|v| *v = -*v);
        let d: Vec<f64> = self.offset.iter().zip(&step).map(|(a, b)| a + b).collect();
        let wd = velocity_mass_apply(mesh, &d);
        let value = 0.5 * d.iter().zip(&wd).map(|(a, b)| a * b).sum::<f64>();
        let lambda = lu.solve_transpose(&wd)?;
        let rho = self.problem.props().rho;
        let gradient = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, t)| {
                let m = rho * mesh.element_area(e) / (3.0 * dt[e]);
                let mut g = 0.0;
                for &v in t {
                    for c in 0..2 {
                        let k = 3 * v + c;
                        if !self.problem.is_dirichlet(k) {
                            g += lambda[k] * m * step[k];
                        }
                    }
                }
                g
            })
            .collect();
        if !value.is_finite() {
            return Err(Error::Numeric("non-finite oracle objective".into()));
        }
        Ok(Evaluation { value, gradient, step })
    }
}

/// Optimal steps for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalDt {
    pub dt: Vec<f64>,
    /// `g` (velocity L² distance to `v*`) at the optimum.
    pub distance: f64,
    /// `g` at the initialization, i.e. for the schedule's step.
    pub initial_distance: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub lbfgs: LbfgsOptions,
    /// Weight `γ` of the proximity term `½ w ‖θ − θ⁰‖²`, `w = γ G(θ⁰) / N_e`,
    /// added to the search objective. `G` is nearly flat along many element
    /// directions, so without it the optimizer drifts there freely and the
    /// targets stop being a function of the local flow. Zero disables it.
    pub anchor: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { lbfgs: LbfgsOptions::default(), anchor: 3.0 }
    }
}

/// The `Δt` the iteration-count schedule uses for step `k` (1-based),
/// clamped to the search box.
pub fn baseline_dt(problem: &Problem, state: &[f64], k: usize) -> Result<Vec<f64>> {
    let cfl = cfl_iter(k)?;
    Ok(local_dts(problem, state, cfl)
        .into_iter()
        .map(|t| t.clamp(THETA_MIN.exp(), THETA_MAX.exp()))
        .collect())
}

/// Minimizes the step-to-solution distance over `ln Δt_e` for step `k`
/// (1-based) taken from `state`, starting at the schedule's `CFL_iter(k)`
/// steps.
pub fn optimal_dt(
    problem: &Problem,
    state: &[f64],
    k: usize,
    reference: &[f64],
    opts: &OracleOptions,
) -> Result<OptimalDt> {
    if !(opts.anchor >= 0.0 && opts.anchor.is_finite()) {
        return Err(Error::Config(format!("anchor weight must be finite and >= 0, got {}", opts.anchor)));
    }
    let obj = StepObjective::new(problem, state, reference)?;
    let theta0: Vec<f64> = baseline_dt(problem, state, k)?.iter().map(|t| t.ln()).collect();
    let g0 = obj
        .evaluate(&theta0)
        .map_err(|e| Error::OracleUnavailable(format!("objective cannot be evaluated at the initial steps: {e}")))?
        .value;
    let w = opts.anchor * g0 / theta0.len() as f64;
    let found = minimize(
        |theta| {
            let e = obj.evaluate(theta).ok()?;
            let pen: f64 = theta.iter().zip(&theta0).map(|(a, b)| (a - b).powi(2)).sum();
            let grad = e.gradient.iter().zip(theta).zip(&theta0).map(|((g, a), b)| g + w * (a - b)).collect();
            Some((e.value + 0.5 * w * pen, grad))
        },
        &theta0,
        THETA_MIN,
        THETA_MAX,
        &opts.lbfgs,
    )
    .ok_or_else(|| Error::OracleUnavailable("objective cannot be evaluated at the initial steps".into()))?;
    // the reported distance excludes the proximity term
    let g = if w > 0.0 { obj.evaluate(&found.x)?.value } else { found.value };
    Ok(OptimalDt {
        dt: found.x.iter().map(|t| t.exp()).collect(),
        distance: (2.0 * g).sqrt(),
        initial_distance: (2.0 * g0).sqrt(),
        evaluations: found.evaluations,
    })
}

/// Reference-solve tolerance relative to the residual of the initial guess.
pub const REFERENCE_TOL: f64 = 1e-10;

/// Converged solution `v*` with `‖F(v*)‖ ≤ 1e-10 ‖F(v⁰)‖`: the iteration-count
/// schedule first, then viscosity continuation (10μ, 3μ, μ) warm-starting
/// each stage.
pub fn reference_solution(problem: &Problem) -> Result<Vec<f64>> {
    let x0 = problem.initial_guess();
    let r0 = problem.residual_norm(&problem.residual(&x0)?);
    let opts = SolveOptions { max_iter: 150, tol: REFERENCE_TOL, ..Default::default() };
    let direct = crate::ptc::solve_nonlinear(problem, &CflStrategy::IterSchedule, &opts);
    if direct.converged {
        return Ok(direct.final_state);
    }

    let mut x = x0;
    let mu = problem.props().mu;
    for factor in [10.0, 3.0, 1.0] {
        let stage = problem.clone().with_props(crate::fem::FluidProps { mu: factor * mu, ..*problem.props() })?;
        let rs = stage.residual_norm(&stage.residual(&x)?);
        // the last stage must meet the tolerance relative to the original start
        let tol = if factor == 1.0 && rs > 0.0 { (REFERENCE_TOL * r0 / rs).min(1.0) } else { 1e-8 };
        let rep = solve_from(&stage, &CflStrategy::IterSchedule, &SolveOptions { tol, ..opts }, x, &mut |_| {});
        if !rep.converged {
            return Err(Error::OracleUnavailable(format!(
                "reference solve failed at viscosity {:e}: {}",
                factor * mu,
                rep.failure.unwrap_or_else(|| "iteration limit".into())
            )));
        }
        x = rep.final_state;
    }
    Ok(x)
}
