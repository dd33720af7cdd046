//! Patch features for the learned time-step controller.
//!
//! A patch is an element and its (up to three) edge neighbours. Each of the
//! four element blocks holds 31 values:
//!
//! | offset | values |
//! |---|---|
//! | 0..3 | edge lengths (edge `k` joins local vertices `k` and `k+1`) |
//! | 3..30 | `u, v, p, R_u, R_v, R_p, r_u, r_v, r_p` at the 3 vertices, field-major |
//! | 30 | cell Reynolds number `ρ max(‖u_c‖, ε_u) h / μ` |
//!
//! `R` is the assembled weak residual and `r` the element-local strong
//! residual. The centre element comes first, then its neighbours in ascending
//! id; blocks of missing neighbours are zero.

mod dataset;

pub use dataset::{Dataset, Provenance, Splits};

use crate::error::{Error, Result};
use crate::fem::Problem;
use crate::ptc::EPS_U;

pub const BLOCK_LEN: usize = 31;
pub const NUM_BLOCKS: usize = 4;
pub const NUM_FEATURES: usize = BLOCK_LEN * NUM_BLOCKS;

/// Floor for the standard deviation in the z-score.
pub const EPS_SIGMA: f64 = 1e-12;

pub type FeatureVector = [f64; NUM_FEATURES];

/// Per-iterate data shared by all patches.
pub struct PatchContext<'a> {
    problem: &'a Problem,
    state: &'a [f64],
    residual: &'a [f64],
    strong: Vec<[[f64; 3]; 3]>,
}

impl<'a> PatchContext<'a> {
    pub fn new(problem: &'a Problem, state: &'a [f64], residual: &'a [f64]) -> Result<Self> {
        if residual.len() != problem.num_dofs() {
            return Err(Error::Dimension { expected: problem.num_dofs(), found: residual.len() });
        }
        let strong = problem.strong_residuals(state)?;
        Ok(Self { problem, state, residual, strong })
    }

    fn block(&self, e: usize, out: &mut [f64]) {
        let mesh = self.problem.mesh();
        let props = self.problem.props();
        let tri = mesh.elements()[e];
        out[..3].copy_from_slice(&mesh.edge_lengths(e));
        for k in 0..3 {
            let v = tri[k];
            for c in 0..3 {
                out[3 + 3 * c + k] = self.state[3 * v + c];
                out[12 + 3 * c + k] = self.residual[3 * v + c];
                out[21 + 3 * c + k] = self.strong[e][k][c];
            }
        }
        let uc = tri.iter().map(|&v| self.state[3 * v]).sum::<f64>() / 3.0;
        let vc = tri.iter().map(|&v| self.state[3 * v + 1]).sum::<f64>() / 3.0;
        out[30] = props.rho * uc.hypot(vc).max(EPS_U) * mesh.element_size(e) / props.mu;
    }

    /// Raw features of the patch centred at element `e`.
    pub fn patch(&self, e: usize) -> Result<FeatureVector> {
        let mesh = self.problem.mesh();
        if e >= mesh.num_elements() {
            return Err(Error::InvalidElement(e));
        }
        let mut f = [0.0; NUM_FEATURES];
        self.block(e, &mut f[..BLOCK_LEN]);
        for (k, &n) in mesh.neighbors(e).iter().enumerate() {
            self.block(n, &mut f[BLOCK_LEN * (k + 1)..BLOCK_LEN * (k + 2)]);
        }
        Ok(f)
    }
}

/// Raw features of the patch centred at `e`.
pub fn extract_patch(problem: &Problem, state: &[f64], residual: &[f64], e: usize) -> Result<FeatureVector> {
    PatchContext::new(problem, state, residual)?.patch(e)
}

/// Raw features of every element's patch.
pub fn extract_all(problem: &Problem, state: &[f64], residual: &[f64]) -> Result<Vec<FeatureVector>> {
    let ctx = PatchContext::new(problem, state, residual)?;
    (0..problem.mesh().num_elements()).map(|e| ctx.patch(e)).collect()
}

/// Componentwise z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Mean and sample standard deviation (floored at [`EPS_SIGMA`]).
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::EmptyDataset(format!("normalizer needs at least 2 samples, got {}", rows.len())));
        }
        let dim = rows[0].as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Dimension { expected: dim, found: r.len() });
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|s| (s / (n - 1.0)).sqrt().max(EPS_SIGMA)).collect();
        Ok(Self { mean, std })
    }

    /// Identity transform of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }
}
