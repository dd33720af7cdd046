use std::sync::Arc;

use super::*;
use crate::fem::{BoundaryConditions, FluidProps, Problem};
use crate::features::Normalizer;
use crate::mesh::{generate_mesh, GeometrySpec};
use crate::nn::{Mlp, Model, TargetTransform};

fn small_step(velocity: f64) -> Problem {
    let mesh = generate_mesh(&GeometrySpec::back_step((0.05, 0.05), (0.08, 0.1)), 0.01).unwrap();
    Problem::new(mesh, FluidProps::default(), BoundaryConditions::inflow(velocity)).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

#[test]
fn huge_time_steps_give_the_newton_step() {
    let p = small_step(0.01);
    let x = p.initial_guess();
    let r = p.residual(&x).unwrap();
    let dt = vec![1e12; p.mesh().num_elements()];
    let (_, s) = ptc_step(&p, &x, &r, &dt).unwrap();
    let newton = newton_direction(&p, &x, &r).unwrap();
    assert!(rel_diff(&s, &newton) < 1e-6, "{}", rel_diff(&s, &newton));
}

#[test]
fn loose_tolerance_converges_at_iteration_zero() {
    let p = small_step(0.01);
    let opts = SolveOptions { tol: 2.0, ..Default::default() };
    let rep = solve_nonlinear(&p, &CflStrategy::IterSchedule, &opts);
    assert!(rep.converged);
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.records.len(), 1);
}

#[test]
fn newton_solves_stokes_in_one_step() {
    let p = small_step(0.01).with_convection(false);
    let rep = solve_nonlinear(&p, &CflStrategy::NewtonConstant { damping: 1.0 }, &SolveOptions::default());
    assert!(rep.converged, "{:?}", rep.failure);
    assert_eq!(rep.iterations, 1);
}

#[test]
fn ptc_strategies_converge_on_a_small_back_step() {
    let p = small_step(0.001);
    for strategy in [CflStrategy::IterSchedule, CflStrategy::err_default(), CflStrategy::NewtonAdaptive { lambda_min: 1e-4 }] {
        let rep = solve_nonlinear(&p, &strategy, &SolveOptions::default());
        assert!(rep.converged, "{}: {:?} {:?}", strategy.name(), rep.failure, rep.residual_history());
        assert!(rep.final_residual() <= 1e-6 * rep.initial_residual());
        assert_eq!(rep.records.len(), rep.iterations + 1);
        if strategy.name() != "an" {
            assert!(rep.cfl_history().iter().all(Option::is_some));
        }
    }
}

#[test]
fn iter_schedule_reports_its_cfl_numbers() {
    let p = small_step(0.005);
    let opts = SolveOptions { max_iter: 4, ..Default::default() };
    let rep = solve_nonlinear(&p, &CflStrategy::IterSchedule, &opts);
    let expected: Vec<Option<f64>> = (1..=rep.iterations).map(|n| Some(cfl_iter(n).unwrap())).collect();
    assert_eq!(rep.cfl_history(), expected);
}

#[test]
fn observer_sees_every_iterate() {
    let p = small_step(0.001);
    let mut seen = Vec::new();
    let rep = solve_from(&p, &CflStrategy::IterSchedule, &SolveOptions::default(), p.initial_guess(), &mut |s| {
        seen.push((s.iter, s.residual_norm))
    });
    assert_eq!(seen.len(), rep.iterations + 1);
    for ((i, n), rec) in seen.iter().zip(&rep.records) {
        assert_eq!(*i, rec.iter);
        assert_eq!(*n, rec.residual);
    }
}

#[test]
fn invalid_strategy_is_reported_not_run() {
    let p = small_step(0.005);
    let rep = solve_nonlinear(&p, &CflStrategy::NewtonConstant { damping: 0.0 }, &SolveOptions::default());
    assert!(!rep.converged);
    assert!(rep.failure.is_some());
    assert!(rep.records.is_empty());
}

#[test]
fn learned_strategy_clips_predictions() {
    let p = small_step(0.005);
    // zero network in log mode predicts Δt = 1 everywhere
    let model = Model::new(Mlp::zeros(&[124, 4, 1]).unwrap(), Normalizer::identity(124), TargetTransform::Log).unwrap();
    let strategy = CflStrategy::Learned { model: Arc::new(model), dt_floor: 1e-3, dt_cap: 0.5 };
    let opts = SolveOptions { max_iter: 2, ..Default::default() };
    let rep = solve_nonlinear(&p, &strategy, &opts);
    assert!(rep.failure.is_none(), "{:?}", rep.failure);
    assert_eq!(rep.records[1].dt_range, Some((0.5, 0.5)));
    assert_eq!(rep.records.len(), 3);
}

#[test]
fn armijo_accepts_full_step_on_linear_residual() {
    let ls = armijo(2.0, 1e-4, |l| Some(2.0 * (1.0 - l)));
    assert_eq!(ls, LineSearch { lambda: 1.0, value: 0.0, forced: false });
}

#[test]
fn armijo_backtracks_on_overshoot() {
    // |1 − 3λ| overshoots at λ = 1 and satisfies the condition at λ = 1/2
    let mut trials = Vec::new();
    let ls = armijo(1.0, 1e-4, |l| {
        trials.push(l);
        Some((1.0 - 3.0 * l).abs())
    });
    assert_eq!(trials, vec![1.0, 0.5]);
    assert_eq!(ls.lambda, 0.5);
    assert!(!ls.forced);
}

#[test]
fn armijo_forces_best_trial_when_nothing_decreases() {
    let ls = armijo(1.0, 0.1, |l| Some(1.0 + l));
    assert!(ls.forced);
    assert_eq!(ls.lambda, 0.125);
    let none = armijo(1.0, 0.1, |_| None);
    assert!(none.forced);
    assert_eq!(none.value, f64::INFINITY);
}
