//! Dirichlet data and outlet traction.

use super::BoundaryConditions;
use crate::error::{config, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Prescribed values per dof. No-slip walls win over inflow and moving-wall
/// values at shared corner vertices. Without an outlet the pressure is pinned
/// to zero at vertex 0.
pub(super) fn dirichlet_values(mesh: &Mesh, bc: &BoundaryConditions) -> Result<Vec<Option<f64>>> {
    let nv = mesh.num_vertices();
    let mut vel: Vec<Option<[f64; 2]>> = vec![None; nv];
    let pts = mesh.vertices();
    let edges = mesh.boundary_edges();

    // parabolic inflow along the (straight) inlet segment
    let inlet: Vec<_> = edges.iter().filter(|e| e.tag == BoundaryTag::Inlet).collect();
    if let Some(first) = inlet.first() {
        let [a, b] = first.vertices.map(|v| pts[v]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let normal = [-t[1], t[0]];
        let proj = |v: usize| (pts[v][0] - a[0]) * t[0] + (pts[v][1] - a[1]) * t[1];
        let verts: Vec<usize> = inlet.iter().flat_map(|e| e.vertices).collect();
        let lo = verts.iter().map(|&v| proj(v)).fold(f64::INFINITY, f64::min);
        let hi = verts.iter().map(|&v| proj(v)).fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return config("degenerate inlet");
        }
        for &v in &verts {
            let s = (proj(v) - lo) / (hi - lo);
            let mag = 4.0 * bc.inlet_velocity * s * (1.0 - s);
            vel[v] = Some([mag * normal[0], mag * normal[1]]);
        }
    }

    // moving wall: against the boundary orientation, i.e. counter-clockwise
    // around an enclosed hole
    let mut tangent = vec![[0.0f64; 2]; nv];
    let mut moving = vec![false; nv];
    for e in edges.iter().filter(|e| e.tag == BoundaryTag::MovingWall) {
        let [a, b] = e.vertices.map(|v| pts[v]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        for v in e.vertices {
            tangent[v][0] -= (b[0] - a[0]) / len;
            tangent[v][1] -= (b[1] - a[1]) / len;
            moving[v] = true;
        }
    }
    for v in 0..nv {
        if moving[v] {
            let n = tangent[v][0].hypot(tangent[v][1]);
            let s = if n > 0.0 { bc.wall_velocity / n } else { 0.0 };
            vel[v] = Some([s * tangent[v][0], s * tangent[v][1]]);
        }
    }

    for e in edges {
        if matches!(e.tag, BoundaryTag::Wall | BoundaryTag::ObstacleWall) {
            for v in e.vertices {
                vel[v] = Some([0.0, 0.0]);
            }
        }
    }

    let mut out = vec![None; 3 * nv];
    for (v, val) in vel.iter().enumerate() {
        if let Some([u, w]) = val {
            out[3 * v] = Some(*u);
            out[3 * v + 1] = Some(*w);
        }
    }
    if !mesh.tags_present().contains(&BoundaryTag::Outlet) && nv > 0 {
        out[2] = Some(0.0);
    }
    Ok(out)
}

/// Load `p_out n |edge| / 2` on the velocity dofs of each outlet-edge endpoint
/// (outward normal `n`), from the do-nothing condition `σ·n = −p_out n`.
pub(super) fn outlet_traction(mesh: &Mesh, p_out: f64) -> Vec<f64> {
    let mut t = vec![0.0; 3 * mesh.num_vertices()];
    if p_out == 0.0 {
        return t;
    }
    let pts = mesh.vertices();
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Outlet) {
        let [a, b] = e.vertices.map(|v| pts[v]);
        // domain on the left, so (dy, −dx) points outwards; its length is |edge|
        let n_len = [b[1] - a[1], a[0] - b[0]];
        for v in e.vertices {
            t[3 * v] += 0.5 * p_out * n_len[0];
            t[3 * v + 1] += 0.5 * p_out * n_len[1];
        }
    }
    t
}
