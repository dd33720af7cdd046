//! Projected limited-memory BFGS for smooth box-constrained minimization.
//!
//! Variables sitting on a bound with the gradient pointing outward are held
//! fixed for the step; the quasi-Newton direction is computed on the rest
//! and the trial point is projected back into the box. Backtracking accepts
//! on the projected Armijo condition, so the objective never increases.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Budget of objective + gradient evaluations (including the first).
    pub max_evals: usize,
    /// Stop once an accepted step decreases `f` by less than this fraction.
    pub rel_decrease: f64,
    /// Sufficient-decrease constant of the line search.
    pub armijo: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, max_evals: 200, rel_decrease: 1e-8, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` over `lower ≤ x ≤ upper` from `x0` (projected into the box).
/// `eval` returns `(f, ∇f)`, or `None` where the objective cannot be
/// evaluated; such points are rejected by the line search. Returns `None` only
/// if the starting point itself cannot be evaluated.
pub fn minimize(
    mut eval: impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: &[f64],
    lower: f64,
    upper: f64,
    opts: &LbfgsOptions,
) -> Option<Minimum> {
    let project = |v: f64| v.clamp(lower, upper);
    let mut x: Vec<f64> = x0.iter().map(|&v| project(v)).collect();
    let (mut f, mut g) = eval(&x).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite()))?;
    let initial_value = f;
    let mut evals = 1;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    while evals < opts.max_evals && f > 0.0 {
        let free: Vec<bool> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| !((xi <= lower && gi > 0.0) || (xi >= upper && gi < 0.0)))
            .collect();
        let gf: Vec<f64> = g.iter().zip(&free).map(|(&gi, &fr)| if fr { gi } else { 0.0 }).collect();
        if gf.iter().all(|&v| v == 0.0) {
            break;
        }
        let mut d = two_loop(&gf, &mem, &free);
        if dot(&d, &gf) >= 0.0 {
            mem.clear();
            d = gf.iter().map(|v| -v).collect();
        }
        if mem.is_empty() {
            // without curvature information the gradient carries the
            // objective's scale; take a unit step in the max norm instead
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            d.iter_mut().for_each(|v| *v /= dmax);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while evals < opts.max_evals {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| project(xi + alpha * di)).collect();
            let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|&s| s == 0.0) {
                break;
            }
            evals += 1;
            if let Some((ft, gt)) = eval(&xt) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + opts.armijo * dot(&g, &step) {
                    accepted = Some((xt, ft, gt, step));
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                break;
            }
        }
        let Some((xn, fn_, gn, s)) = accepted else { break };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let decrease = f - fn_;
        x = xn;
        f = fn_;
        g = gn;
        if decrease <= opts.rel_decrease * (f + decrease).abs() {
            break;
        }
    }
    Some(Minimum { x, value: f, initial_value, evaluations: evals })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−H g` by the two-loop recursion, restricted to the free variables.
fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let a = rho * dot(&s, &q);
        q.iter_mut().zip(&y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let gamma = match mem.back() {
        Some((s, y, _)) => {
            let (s, y) = (mask(s), mask(y));
            let yy = dot(&y, &y);
            if yy > 0.0 && dot(&s, &y) > 0.0 {
                dot(&s, &y) / yy
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let (s, y) = (mask(s), mask(y));
        let b = rho * dot(&y, &q);
        q.iter_mut().zip(&s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter().zip(free).map(|(&v, &f)| if f { -v } else { 0.0 }).collect()
}
