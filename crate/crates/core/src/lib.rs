//! Pseudo-transient continuation (PTC) for the stationary incompressible
//! Navier–Stokes equations on triangular meshes, with pluggable per-element
//! pseudo-time-step controllers.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: structured/Delaunay triangular meshes for back-step, annulus and
//!   obstacle geometries, with boundary tags and element adjacency.
//! - [`fem`]: stabilized P1/P1 assembly of the residual, Jacobian and the
//!   pseudo-time mass shift.
//! - [`sparse`] and [`linsolve`]: CSR storage and a direct sparse LU.
//! - [`ptc`]: the nonlinear driver and the CFL / Newton strategies.
//! - [`features`], [`nn`], [`oracle`]: the learned controller, its training
//!   targets and its training loop.
//! - [`bench`]: experiment configuration, suites, CSV and SVG output.

pub mod bench;
pub mod error;
pub mod features;
pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod nn;
pub mod oracle;
pub mod ptc;
pub mod sparse;

pub use error::{Error, Result};
