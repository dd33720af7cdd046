//! Element kernels of the stabilized P1/P1 discretization.
//!
//! Local unknowns are ordered `[u0, v0, p0, u1, v1, p1, u2, v2, p2]`.
//! Quadrature uses the three edge midpoints with weight `A/3`, which is exact
//! for the quadratic integrands of linear elements.

use super::dual::{Dual, Real};
use crate::mesh::Point;

/// Constant geometric data of one triangle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementGeom {
    pub area: f64,
    /// `∂φ_i/∂x`
    pub b: [f64; 3],
    /// `∂φ_i/∂y`
    pub c: [f64; 3],
    /// Longest edge.
    pub h: f64,
}

impl ElementGeom {
    pub fn new(p: [Point; 3], area: f64, h: f64) -> Self {
        let two_a = 2.0 * area;
        let mut b = [0.0; 3];
        let mut c = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            b[i] = (p[j][1] - p[k][1]) / two_a;
            c[i] = (p[k][0] - p[j][0]) / two_a;
        }
        Self { area, b, c, h }
    }
}

/// Physical coefficients seen by the kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    pub rho: f64,
    pub mu: f64,
    pub force: [f64; 2],
    /// When false the advection velocity is zero: no convection, SUPG or
    /// grad-div terms (Stokes limit).
    pub convection: bool,
}

/// Values of the basis functions at the midpoint of edge `q` (joining local
/// vertices `q` and `q+1`).
const MIDPOINT_PHI: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

fn grad<T: Real>(g: &ElementGeom, w: [T; 3]) -> (T, T) {
    (
        w[0] * g.b[0] + w[1] * g.b[1] + w[2] * g.b[2],
        w[0] * g.c[0] + w[1] * g.c[1] + w[2] * g.c[2],
    )
}

/// Stabilization parameters `(τ, δ)` from the centroid velocity.
fn stabilization<T: Real>(g: &ElementGeom, k: &Coefficients, uc: T, vc: T) -> (T, T) {
    let nu = k.mu / k.rho;
    let h = g.h;
    let visc = 4.0 * nu / (h * h);
    let speed2 = uc * uc + vc * vc;
    let tau = T::cst(1.0) / (speed2 * (4.0 / (h * h)) + visc * visc).sqrt();
    let delta = speed2.sqrt() * (0.5 * h);
    (tau, delta)
}

/// Weak residual of one element.
pub(crate) fn residual<T: Real>(g: &ElementGeom, k: &Coefficients, x: &[T; 9]) -> [T; 9] {
    let u = [x[0], x[3], x[6]];
    let v = [x[1], x[4], x[7]];
    let p = [x[2], x[5], x[8]];
    let (ux, uy) = grad(g, u);
    let (vx, vy) = grad(g, v);
    let (px, py) = grad(g, p);
    let div = ux + vy;
    let zero = T::cst(0.0);
    let third = 1.0 / 3.0;

    let (uc, vc) = if k.convection {
        ((u[0] + u[1] + u[2]) * third, (v[0] + v[1] + v[2]) * third)
    } else {
        (zero, zero)
    };
    let (tau, delta) = stabilization(g, k, uc, vc);
    let rho = k.rho;
    let [fx, fy] = k.force;

    let mut r = [zero; 9];
    let w = g.area / 3.0;
    for phi in MIDPOINT_PHI {
        let (ax, ay) = if k.convection {
            (
                u[0] * phi[0] + u[1] * phi[1] + u[2] * phi[2],
                v[0] * phi[0] + v[1] * phi[1] + v[2] * phi[2],
            )
        } else {
            (zero, zero)
        };
        let conv_x = (ax * ux + ay * uy) * rho;
        let conv_y = (ax * vx + ay * vy) * rho;
        let rm_x = conv_x + px - fx;
        let rm_y = conv_y + py - fy;
        for i in 0..3 {
            let supg = tau * (ax * g.b[i] + ay * g.c[i]);
            r[3 * i] = r[3 * i] + ((conv_x - fx) * phi[i] + supg * rm_x) * w;
            r[3 * i + 1] = r[3 * i + 1] + ((conv_y - fy) * phi[i] + supg * rm_y) * w;
            r[3 * i + 2] =
                r[3 * i + 2] + (div * (rho * phi[i]) + tau * (rm_x * g.b[i] + rm_y * g.c[i])) * w;
        }
    }

    let p_mean = (p[0] + p[1] + p[2]) * third;
    let grad_div = delta * div * rho;
    for i in 0..3 {
        let (bi, ci) = (g.b[i], g.c[i]);
        r[3 * i] = r[3 * i] + ((ux * bi + uy * ci) * k.mu - p_mean * bi + grad_div * bi) * g.area;
        r[3 * i + 1] =
            r[3 * i + 1] + ((vx * bi + vy * ci) * k.mu - p_mean * ci + grad_div * ci) * g.area;
    }
    r
}

/// Residual and its exact 9×9 Jacobian (row-major, `jac[i][j] = ∂r_i/∂x_j`).
pub(crate) fn residual_and_jacobian(
    g: &ElementGeom,
    k: &Coefficients,
    x: &[f64; 9],
) -> ([f64; 9], [[f64; 9]; 9]) {
    let xd: [Dual<9>; 9] = std::array::from_fn(|j| Dual::var(x[j], j));
    let rd = residual(g, k, &xd);
    (rd.map(|d| d.v), rd.map(|d| d.d))
}

/// Galerkin convection term `∫ ρ (u·∇)u φ_i` alone.
pub(crate) fn convection(g: &ElementGeom, rho: f64, x: &[f64; 9]) -> [f64; 9] {
    let u = [x[0], x[3], x[6]];
    let v = [x[1], x[4], x[7]];
    let (ux, uy) = grad(g, u);
    let (vx, vy) = grad(g, v);
    let mut r = [0.0; 9];
    let w = g.area / 3.0;
    for phi in MIDPOINT_PHI {
        let ax: f64 = (0..3).map(|i| u[i] * phi[i]).sum();
        let ay: f64 = (0..3).map(|i| v[i] * phi[i]).sum();
        for i in 0..3 {
            r[3 * i] += rho * (ax * ux + ay * uy) * phi[i] * w;
            r[3 * i + 1] += rho * (ax * vx + ay * vy) * phi[i] * w;
        }
    }
    r
}

/// Strong residual `(r_u, r_v, r_p)` at each vertex of the element.
pub(crate) fn strong_residual(g: &ElementGeom, k: &Coefficients, x: &[f64; 9]) -> [[f64; 3]; 3] {
    let u = [x[0], x[3], x[6]];
    let v = [x[1], x[4], x[7]];
    let p = [x[2], x[5], x[8]];
    let (ux, uy) = grad(g, u);
    let (vx, vy) = grad(g, v);
    let (px, py) = grad(g, p);
    let rp = k.rho * (ux + vy);
    std::array::from_fn(|i| {
        [
            k.rho * (u[i] * ux + v[i] * uy) + px - k.force[0],
            k.rho * (u[i] * vx + v[i] * vy) + py - k.force[1],
            rp,
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ElementGeom {
        let p = [[0.0, 0.0], [0.3, 0.05], [0.1, 0.2]];
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        ElementGeom::new(p, area, 0.3041)
    }

    fn water() -> Coefficients {
        Coefficients { rho: 1000.0, mu: 1e-3, force: [0.0, 0.0], convection: true }
    }

    #[test]
    fn basis_gradients_sum_to_zero_and_reproduce_linears() {
        let g = geom();
        assert!(g.b.iter().sum::<f64>().abs() < 1e-14);
        assert!(g.c.iter().sum::<f64>().abs() < 1e-14);
        // x at the vertices has gradient (1, 0)
        let (gx, gy) = grad(&g, [0.0, 0.3, 0.1]);
        assert!((gx - 1.0).abs() < 1e-14 && gy.abs() < 1e-14);
    }

    #[test]
    fn constant_fields_give_zero_residual() {
        let g = geom();
        let x = [0.01, -0.02, 0.0, 0.01, -0.02, 0.0, 0.01, -0.02, 0.0];
        let r = residual(&g, &water(), &x);
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
        let s = strong_residual(&g, &water(), &x);
        assert!(s.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let g = geom();
        let x = [0.01, 0.003, 0.2, -0.004, 0.008, -0.1, 0.006, -0.002, 0.05];
        for conv in [true, false] {
            let k = Coefficients { convection: conv, ..water() };
            let (r0, jac) = residual_and_jacobian(&g, &k, &x);
            assert_eq!(r0, residual(&g, &k, &x));
            for j in 0..9 {
                let step = 1e-6 * x[j].abs().max(1e-3);
                let mut xp = x;
                let mut xm = x;
                xp[j] += step;
                xm[j] -= step;
                let (rp, rm) = (residual(&g, &k, &xp), residual(&g, &k, &xm));
                for i in 0..9 {
                    let fd = (rp[i] - rm[i]) / (2.0 * step);
                    let scale = jac[i].iter().fold(1e-12f64, |m, v| m.max(v.abs()));
                    assert!((fd - jac[i][j]).abs() < 1e-6 * scale, "({i},{j}) {fd} vs {}", jac[i][j]);
                }
            }
        }
    }

    #[test]
    fn pressure_gradient_strong_residual() {
        let g = geom();
        // p = x, u = v = 0
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.1];
        let s = strong_residual(&g, &water(), &x);
        for row in s {
            assert!((row[0] - 1.0).abs() < 1e-13 && row[1].abs() < 1e-13 && row[2] == 0.0);
        }
    }

    #[test]
    fn rigid_rotation_strong_residual() {
        let p = [[0.0, 0.0], [0.3, 0.05], [0.1, 0.2]];
        let g = geom();
        let k = Coefficients { rho: 1.0, ..water() };
        let mut x = [0.0; 9];
        for i in 0..3 {
            x[3 * i] = -p[i][1];
            x[3 * i + 1] = p[i][0];
        }
        let s = strong_residual(&g, &k, &x);
        for i in 0..3 {
            assert!((s[i][0] + p[i][0]).abs() < 1e-14);
            assert!((s[i][1] + p[i][1]).abs() < 1e-14);
            assert!(s[i][2].abs() < 1e-14);
        }
    }

    #[test]
    fn convection_is_linear_in_density() {
        let g = geom();
        let x = [0.01, 0.003, 0.2, -0.004, 0.008, -0.1, 0.006, -0.002, 0.05];
        let a = convection(&g, 1000.0, &x);
        let b = convection(&g, 2000.0, &x);
        for i in 0..9 {
            assert!((b[i] - 2.0 * a[i]).abs() <= 1e-15 * a[i].abs().max(1e-300));
        }
    }
}
