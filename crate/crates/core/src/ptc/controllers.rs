//! Global CFL controllers and the CFL → local time-step map.

use crate::error::{Error, Result};

/// Speed below which an element is treated as at rest when converting a CFL
/// number into a time step (m/s).
pub const EPS_U: f64 = 1e-10;

/// Iteration-count schedule: geometric growth with base 1.3, restarted with
/// a larger multiplier after iterations 20 and 40.
pub fn cfl_iter(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("cfl_iter is defined for n >= 1".into()));
    }
    let g = |k: usize| 1.3f64.powi(k.min(9) as i32);
    Ok(if n <= 20 {
        g(n)
    } else if n <= 40 {
        g(9) + 9.0 * g(n - 20)
    } else {
        g(9) + 9.0 * g(9) + 90.0 * g(n - 40)
    })
}

/// Parameters of the error-based (PID) CFL controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrControllerParams {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Target error, in the same units as the error estimates.
    pub tol: f64,
    pub cfl0: f64,
    pub cfl_min: f64,
    pub cfl_max: f64,
}

impl Default for ErrControllerParams {
    fn default() -> Self {
        Self { k_p: 0.65, k_i: 0.05, k_d: 0.05, tol: 1e-6, cfl0: 1.0, cfl_min: 1e-4, cfl_max: 1e8 }
    }
}

impl ErrControllerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k_p > 0.0
            && self.k_i > 0.0
            && self.k_d > 0.0
            && self.tol > 0.0
            && self.cfl0 > 0.0
            && self.cfl_min > 0.0
            && self.cfl_min <= self.cfl_max;
        if !ok {
            return Err(Error::Config(format!("invalid error-controller parameters {self:?}")));
        }
        Ok(())
    }
}

/// One controller update. `errors` holds the most recent estimates first:
/// `[e_{n−1}, e_{n−2}, e_{n−3}]`, with missing history as `None`; ratios
/// involving a missing estimate are taken as 1.
pub fn cfl_err(errors: [Option<f64>; 3], prev_cfl: f64, p: &ErrControllerParams) -> Result<f64> {
    let e1 = errors[0].ok_or_else(|| Error::Domain("cfl_err needs the latest error estimate".into()))?;
    for e in errors.iter().flatten() {
        if !(*e > 0.0) || !e.is_finite() {
            return Err(Error::Domain(format!("error estimate must be positive and finite, got {e}")));
        }
    }
    let r1 = errors[1].map_or(1.0, |e2| e2 / e1);
    let r2 = match (errors[1], errors[2]) {
        (Some(e2), Some(e3)) => e3 / e2,
        _ => 1.0,
    };
    let factor = r1.powf(p.k_p) * (p.tol / e1).powf(p.k_i) * (r1 / r2).powf(p.k_d);
    Ok((factor * prev_cfl).clamp(p.cfl_min, p.cfl_max))
}

/// `Δt_e = CFL · h_e / max(‖u‖_e, ε_u)`.
pub fn local_dt(cfl: f64, h: f64, speed: f64) -> f64 {
    cfl * h / speed.max(EPS_U)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn schedule_values() {
        let p9 = 1.3f64.powi(9);
        assert!(rel(cfl_iter(1).unwrap(), 1.3) < 1e-15);
        assert!(rel(cfl_iter(9).unwrap(), 10.604499373) < 1e-9);
        assert!(rel(cfl_iter(10).unwrap(), p9) < 1e-15);
        assert!(rel(cfl_iter(20).unwrap(), p9) < 1e-15);
        assert!(rel(cfl_iter(21).unwrap(), p9 + 9.0 * 1.3) < 1e-15);
        assert!(rel(cfl_iter(25).unwrap(), 44.0209) < 1e-5);
        assert!(rel(cfl_iter(41).unwrap(), p9 + 9.0 * p9 + 90.0 * 1.3) < 1e-15);
        assert!(cfl_iter(0).is_err());
    }

    #[test]
    fn schedule_is_nondecreasing() {
        let v: Vec<f64> = (1..=200).map(|n| cfl_iter(n).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn controller_fixed_point() {
        let p = ErrControllerParams { tol: 1e-3, ..Default::default() };
        let c = cfl_err([Some(1e-3); 3], 7.0, &p).unwrap();
        assert!(rel(c, 7.0) < 1e-15);
    }

    #[test]
    fn controller_growth_and_shrink() {
        // e ratios equal across steps, tol = e_{n−1}
        let p = ErrControllerParams { tol: 1e-3, ..Default::default() };
        let grow = cfl_err([Some(1e-3), Some(1e-2), Some(1e-1)], 1.0, &p).unwrap();
        assert!(rel(grow, 10f64.powf(0.65)) < 1e-12);
        assert!(rel(grow, 4.4668) < 1e-4);
        let shrink = cfl_err([Some(1e-3), Some(1e-4), Some(1e-5)], 1.0, &p).unwrap();
        assert!(rel(shrink, 10f64.powf(-0.65)) < 1e-12);
    }

    #[test]
    fn controller_missing_history_is_neutral() {
        let p = ErrControllerParams::default();
        let c = cfl_err([Some(1.0), None, None], 1.0, &p).unwrap();
        assert!(rel(c, (1e-6f64).powf(0.05)) < 1e-14);
        assert!(cfl_err([None, None, None], 1.0, &p).is_err());
        assert!(cfl_err([Some(0.0), None, None], 1.0, &p).is_err());
    }

    #[test]
    fn controller_clamps() {
        let p = ErrControllerParams { tol: 1e-3, ..Default::default() };
        assert_eq!(cfl_err([Some(1e-3), Some(1e-2), Some(1e-1)], 1e8, &p).unwrap(), 1e8);
        assert_eq!(cfl_err([Some(1e-3), Some(1e-4), Some(1e-5)], 1e-4, &p).unwrap(), 1e-4);
    }

    #[test]
    fn local_step() {
        assert!(rel(local_dt(2.0, 0.1, 0.5), 0.4) < 1e-15);
        assert_eq!(local_dt(1.0, 0.1, 0.0), 0.1 / EPS_U);
        assert_eq!(local_dt(4.0, 0.1, 0.3), 2.0 * local_dt(2.0, 0.1, 0.3));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn controller_is_scale_invariant(
                e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, e3 in 1e-8f64..1.0,
                c in 1e-3f64..1e3, prev in 1e-2f64..1e4,
            ) {
                let p = ErrControllerParams { cfl_min: 0.0f64.max(1e-300), cfl_max: f64::MAX, ..Default::default() };
                let q = ErrControllerParams { tol: p.tol * c, ..p };
                let a = cfl_err([Some(e1), Some(e2), Some(e3)], prev, &p).unwrap();
                let b = cfl_err([Some(c * e1), Some(c * e2), Some(c * e3)], prev, &q).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
    }
}
