//! Stabilized equal-order (P1/P1) finite elements for the stationary
//! incompressible Navier–Stokes equations.
//!
//! Unknowns are interleaved per vertex: dof `3·i + c` with `c = 0, 1, 2` for
//! `u`, `v`, `p`. Momentum uses SUPG/GLS plus grad-div stabilization and
//! continuity uses PSPG; the Jacobian is exact (forward-mode differentiation
//! of the element residual, stabilization parameters included).

mod boundary;
mod dual;
mod element;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{Pattern, SparseMatrix};

use element::{Coefficients, ElementGeom};

/// Material data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidProps {
    /// Density (kg/m³).
    pub rho: f64,
    /// Dynamic viscosity (Pa·s).
    pub mu: f64,
    /// Body force per unit volume (N/m³).
    pub body_force: [f64; 2],
}

impl Default for FluidProps {
    /// Water.
    fn default() -> Self {
        Self { rho: 1000.0, mu: 1e-3, body_force: [0.0, 0.0] }
    }
}

impl FluidProps {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite() && self.mu > 0.0 && self.mu.is_finite()) {
            return config(format!("fluid properties need rho > 0 and mu > 0, got {self:?}"));
        }
        if !self.body_force.iter().all(|f| f.is_finite()) {
            return config("body force must be finite");
        }
        Ok(())
    }

    /// `ρ U L / μ`.
    pub fn reynolds(&self, velocity: f64, length: f64) -> f64 {
        self.rho * velocity * length / self.mu
    }
}

/// Boundary data; each value is used only when its tag occurs in the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    /// Peak of the parabolic inflow profile (m/s).
    pub inlet_velocity: f64,
    /// Pressure imposed through the outlet traction (Pa).
    pub outlet_pressure: f64,
    /// Tangential speed of the moving wall (m/s), positive counter-clockwise
    /// around the hole it bounds.
    pub wall_velocity: f64,
}

impl BoundaryConditions {
    pub fn inflow(velocity: f64) -> Self {
        Self { inlet_velocity: velocity, outlet_pressure: 0.0, wall_velocity: 0.0 }
    }

    pub fn rotating_wall(velocity: f64) -> Self {
        Self { inlet_velocity: 0.0, outlet_pressure: 0.0, wall_velocity: velocity }
    }

    /// The velocity that drives the flow: inflow peak or wall speed.
    pub fn driving_velocity(&self, mesh: &Mesh) -> f64 {
        if mesh.tags_present().contains(&BoundaryTag::Inlet) {
            self.inlet_velocity
        } else {
            self.wall_velocity
        }
    }
}

/// Nodal fields, one entry per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], v: vec![0.0; n], p: vec![0.0; n] }
    }

    pub fn from_vector(x: &[f64]) -> Result<Self> {
        if x.len() % 3 != 0 {
            return Err(Error::Dimension { expected: 3 * (x.len() / 3 + 1), found: x.len() });
        }
        Ok(Self {
            u: x.iter().step_by(3).copied().collect(),
            v: x.iter().skip(1).step_by(3).copied().collect(),
            p: x.iter().skip(2).step_by(3).copied().collect(),
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.u.len());
        for i in 0..self.u.len() {
            x.extend([self.u[i], self.v[i], self.p[i]]);
        }
        x
    }

    pub fn num_vertices(&self) -> usize {
        self.u.len()
    }
}

/// A discretized flow problem on a fixed mesh.
#[derive(Debug, Clone)]
pub struct Problem {
    mesh: Mesh,
    props: FluidProps,
    bc: BoundaryConditions,
    convection: bool,
    geom: Vec<ElementGeom>,
    /// Prescribed value for each Dirichlet dof.
    dirichlet: Vec<Option<f64>>,
    /// Outlet traction load, per dof.
    traction: Vec<f64>,
    pattern: Arc<Pattern>,
    /// Value-array positions of each element's 9×9 block.
    scatter: Vec<[usize; 81]>,
}

fn local_dofs(tri: &[usize; 3]) -> [usize; 9] {
    std::array::from_fn(|k| 3 * tri[k / 3] + k % 3)
}

impl Problem {
    pub fn new(mesh: Mesh, props: FluidProps, bc: BoundaryConditions) -> Result<Self> {
        props.validate()?;
        let tags = mesh.tags_present();
        for (tag, value, name) in [
            (BoundaryTag::Inlet, bc.inlet_velocity, "inlet velocity"),
            (BoundaryTag::Outlet, bc.outlet_pressure, "outlet pressure"),
            (BoundaryTag::MovingWall, bc.wall_velocity, "wall velocity"),
        ] {
            if tags.contains(&tag) && !value.is_finite() {
                return config(format!("{name} must be finite"));
            }
        }

        let geom = (0..mesh.num_elements())
            .map(|e| {
                let p = mesh.elements()[e].map(|v| mesh.vertices()[v]);
                ElementGeom::new(p, mesh.element_area(e), mesh.element_size(e))
            })
            .collect();
        let dirichlet = boundary::dirichlet_values(&mesh, &bc)?;
        let traction = boundary::outlet_traction(&mesh, bc.outlet_pressure);

        let n = 3 * mesh.num_vertices();
        let mut rows = vec![Vec::new(); n];
        for tri in mesh.elements() {
            let dofs = local_dofs(tri);
            for &r in &dofs {
                rows[r].extend_from_slice(&dofs);
            }
        }
        let pattern = Arc::new(Pattern::from_rows(rows)?);
        let scatter = mesh
            .elements()
            .iter()
            .map(|tri| {
                let dofs = local_dofs(tri);
                std::array::from_fn(|k| pattern.find(dofs[k / 9], dofs[k % 9]).expect("element block in pattern"))
            })
            .collect();

        Ok(Self { mesh, props, bc, convection: true, geom, dirichlet, traction, pattern, scatter })
    }

    /// Switches the convective (and convection-dependent stabilization)
    /// terms on or off. Off gives the Stokes problem.
    pub fn with_convection(mut self, on: bool) -> Self {
        self.convection = on;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn props(&self) -> &FluidProps {
        &self.props
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.mesh.num_vertices()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet[dof].is_some()
    }

    pub fn dirichlet(&self) -> &[Option<f64>] {
        &self.dirichlet
    }

    /// Zero field with the Dirichlet values imposed.
    pub fn initial_guess(&self) -> Vec<f64> {
        self.dirichlet.iter().map(|d| d.unwrap_or(0.0)).collect()
    }

    fn coefficients(&self) -> Coefficients {
        Coefficients {
            rho: self.props.rho,
            mu: self.props.mu,
            force: self.props.body_force,
            convection: self.convection,
        }
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_dofs() {
            return Err(Error::Dimension { expected: self.num_dofs(), found: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state entry at dof {i}")));
        }
        Ok(())
    }

    fn gather(&self, e: usize, x: &[f64]) -> [f64; 9] {
        local_dofs(&self.mesh.elements()[e]).map(|d| x[d])
    }

    fn finish_residual(&self, x: &[f64], r: &mut [f64]) {
        for (i, t) in self.traction.iter().enumerate() {
            r[i] += t;
        }
        for (i, d) in self.dirichlet.iter().enumerate() {
            if let Some(g) = d {
                r[i] = x[i] - g;
            }
        }
    }

    /// Nonlinear residual `F(v)`; Dirichlet rows hold `v − prescribed`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let k = self.coefficients();
        let local: Vec<[f64; 9]> = (0..self.geom.len())
            .into_par_iter()
            .map(|e| element::residual(&self.geom[e], &k, &self.gather(e, x)))
            .collect();
        let mut r = vec![0.0; self.num_dofs()];
        for (tri, re) in self.mesh.elements().iter().zip(&local) {
            for (d, v) in local_dofs(tri).iter().zip(re) {
                r[*d] += v;
            }
        }
        self.finish_residual(x, &mut r);
        Ok(r)
    }

    /// Residual and exact Jacobian; Dirichlet rows of the Jacobian are
    /// identity rows.
    pub fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, SparseMatrix)> {
        self.check_state(x)?;
        let k = self.coefficients();
        let local: Vec<([f64; 9], [[f64; 9]; 9])> = (0..self.geom.len())
            .into_par_iter()
            .map(|e| element::residual_and_jacobian(&self.geom[e], &k, &self.gather(e, x)))
            .collect();
        let mut r = vec![0.0; self.num_dofs()];
        let mut jac = SparseMatrix::zeros(self.pattern.clone());
        {
            let vals = jac.values_mut();
            for ((tri, (re, je)), pos) in self.mesh.elements().iter().zip(&local).zip(&self.scatter) {
                for (d, v) in local_dofs(tri).iter().zip(re) {
                    r[*d] += v;
                }
                for (k, p) in pos.iter().enumerate() {
                    vals[*p] += je[k / 9][k % 9];
                }
            }
        }
        self.finish_residual(x, &mut r);
        for (i, d) in self.dirichlet.iter().enumerate() {
            if d.is_some() {
                jac.set_identity_row(i);
            }
        }
        Ok((r, jac))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
        Ok(self.residual_and_jacobian(x)?.1)
    }

    /// Diagonal of the pseudo-time mass `M(Δt)`: the row-sum lumped velocity
    /// mass `ρ A_e / 3` per element vertex, divided by `Δt_e`. Pressure and
    /// Dirichlet dofs get zero.
    pub fn pseudo_time_mass(&self, dt: &[f64]) -> Result<Vec<f64>> {
        if dt.len() != self.mesh.num_elements() {
            return Err(Error::Dimension { expected: self.mesh.num_elements(), found: dt.len() });
        }
        if let Some(e) = dt.iter().position(|&t| !(t > 0.0) || t.is_nan()) {
            return Err(Error::Domain(format!("pseudo-time step of element {e} is {}", dt[e])));
        }
        let mut m = vec![0.0; self.num_dofs()];
        for (e, tri) in self.mesh.elements().iter().enumerate() {
            let share = self.props.rho * self.geom[e].area / (3.0 * dt[e]);
            for &v in tri {
                m[3 * v] += share;
                m[3 * v + 1] += share;
            }
        }
        for (i, d) in self.dirichlet.iter().enumerate() {
            if d.is_some() {
                m[i] = 0.0;
            }
        }
        Ok(m)
    }

    /// Adds `M(Δt)` to a matrix on this problem's pattern.
    pub fn add_pseudo_time_mass(&self, a: &mut SparseMatrix, dt: &[f64]) -> Result<()> {
        let m = self.pseudo_time_mass(dt)?;
        for (i, v) in m.iter().enumerate() {
            if *v != 0.0 {
                a.add_to_diagonal(i, *v);
            }
        }
        Ok(())
    }

    /// `M(Δt) + F′(v)`.
    pub fn ptc_matrix(&self, x: &[f64], dt: &[f64]) -> Result<SparseMatrix> {
        let mut a = self.jacobian(x)?;
        self.add_pseudo_time_mass(&mut a, dt)?;
        Ok(a)
    }

    /// Galerkin convection contribution `∫ ρ (u·∇)u · φ` alone, without
    /// boundary conditions.
    pub fn convection_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let mut r = vec![0.0; self.num_dofs()];
        for (e, tri) in self.mesh.elements().iter().enumerate() {
            let re = element::convection(&self.geom[e], self.props.rho, &self.gather(e, x));
            for (d, v) in local_dofs(tri).iter().zip(re) {
                r[*d] += v;
            }
        }
        Ok(r)
    }

    /// Element-local strong residuals: `out[e][k] = (r_u, r_v, r_p)` at the
    /// `k`-th vertex of element `e`.
    pub fn strong_residuals(&self, x: &[f64]) -> Result<Vec<[[f64; 3]; 3]>> {
        self.check_state(x)?;
        let k = self.coefficients();
        Ok((0..self.geom.len())
            .map(|e| element::strong_residual(&self.geom[e], &k, &self.gather(e, x)))
            .collect())
    }

    /// `‖·‖` of the finite-element functions with nodal values `r`:
    /// `sqrt(Σ_c r_cᵀ M r_c)` with the consistent P1 mass matrix `M`.
    pub fn residual_norm(&self, r: &[f64]) -> f64 {
        fe_norm(&self.mesh, r)
    }

    /// Euclidean norm of the centroid velocity of every element.
    pub fn centroid_speeds(&self, x: &[f64]) -> Vec<f64> {
        self.mesh
            .elements()
            .iter()
            .map(|t| {
                let u = (x[3 * t[0]] + x[3 * t[1]] + x[3 * t[2]]) / 3.0;
                let v = (x[3 * t[0] + 1] + x[3 * t[1] + 1] + x[3 * t[2] + 1]) / 3.0;
                u.hypot(v)
            })
            .collect()
    }

    /// Replaces the boundary data, keeping the mesh and assembly structure.
    pub fn with_boundary_conditions(mut self, bc: BoundaryConditions) -> Result<Self> {
        self.dirichlet = boundary::dirichlet_values(&self.mesh, &bc)?;
        self.traction = boundary::outlet_traction(&self.mesh, bc.outlet_pressure);
        self.bc = bc;
        Ok(self)
    }

    /// Replaces the fluid properties.
    pub fn with_props(mut self, props: FluidProps) -> Result<Self> {
        props.validate()?;
        self.props = props;
        Ok(self)
    }
}

/// L² norm of the interleaved three-component P1 function with nodal values
/// `r` (length `3 × vertices`).
pub fn fe_norm(mesh: &Mesh, r: &[f64]) -> f64 {
    let mut s = 0.0;
    for (e, t) in mesh.elements().iter().enumerate() {
        let a12 = mesh.element_area(e) / 12.0;
        for c in 0..3 {
            let w = t.map(|v| r[3 * v + c]);
            let sum = w[0] + w[1] + w[2];
            // [2 1 1; 1 2 1; 1 1 2] = I + ones
            s += a12 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + sum * sum);
        }
    }
    s.max(0.0).sqrt()
}

#[cfg(test)]
mod tests;
