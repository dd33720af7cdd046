//! Mesh generation: structured mapped grids per block, with a local Delaunay
//! patch around an optional obstacle.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use super::delaunay::{circumcenter, triangulate};
use super::geometry::{GeometryKind, GeometrySpec, Obstacle};
use super::{signed_area, BoundaryEdge, BoundaryTag, Mesh, Point};
use crate::error::{config, Result};

/// Generates a conforming mesh whose every element has longest edge at most
/// `h_max` (in the transformed coordinates).
pub fn generate_mesh(spec: &GeometrySpec, h_max: f64) -> Result<Mesh> {
    spec.validate()?;
    if !(h_max > 0.0 && h_max.is_finite()) {
        return config("h_max must be positive");
    }
    let h = h_max / spec.transform.length_factor();
    let spacing = h / std::f64::consts::SQRT_2;
    if (spec.narrowest_channel() / spacing).ceil() < 2.0 {
        return config(format!(
            "h_max = {h_max} does not resolve the narrowest channel ({} m) with two cells",
            spec.narrowest_channel() * spec.transform.length_factor()
        ));
    }

    let mut quads = match spec.kind {
        GeometryKind::BackStep { inflow_width, inflow_length, outflow_width, outflow_length } => {
            back_step_quads(inflow_width, inflow_length, outflow_width, outflow_length, spacing)
        }
        GeometryKind::Annulus { inner_radius, outer_radius } => {
            annulus_quads(inner_radius, outer_radius, spacing)
        }
    };

    let mut obstacle_vertices = HashSet::new();
    let mut extra = Vec::new();
    if let Some(obstacle) = spec.obstacle {
        let patch = carve_obstacle(spec, &obstacle, &mut quads, spacing, h)?;
        obstacle_vertices = patch.obstacle_vertices;
        extra = patch.triangles;
    }

    let QuadMesh { points, quads, .. } = quads;
    let mut elements: Vec<[usize; 3]> = Vec::with_capacity(2 * quads.len() + extra.len());
    for q in &quads {
        for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
            elements.push(orient(&points, tri));
        }
    }
    elements.extend(extra.into_iter().map(|t| orient(&points, t)));

    // unused vertices (inside the carved hole) are dropped
    let mut used = vec![false; points.len()];
    for t in &elements {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut vertices = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if used[i] {
            remap[i] = vertices.len();
            vertices.push(*p);
        }
    }
    let elements: Vec<[usize; 3]> = elements.iter().map(|t| t.map(|v| remap[v])).collect();
    let obstacle_vertices: HashSet<usize> = obstacle_vertices.iter().map(|&v| remap[v]).collect();

    let boundary = tag_boundary(spec, &vertices, &elements, &obstacle_vertices);
    let mesh = Mesh::new(vertices, elements, boundary)?;
    let mesh = match spec.transform {
        super::Transform::Identity => mesh,
        t => mesh.apply_transform(t),
    };
    let worst = mesh.element_sizes().iter().cloned().fold(0.0, f64::max);
    if worst > h_max * (1.0 + 1e-12) {
        return config(format!("generated element of size {worst} exceeds h_max = {h_max}"));
    }
    Ok(mesh)
}

fn orient(points: &[Point], t: [usize; 3]) -> [usize; 3] {
    if signed_area(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

struct QuadMesh {
    points: Vec<Point>,
    /// Counter-clockwise quadrilateral cells.
    quads: Vec<[usize; 4]>,
}

fn subdivide(breaks: &[f64], spacing: f64) -> Vec<f64> {
    let mut lines = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / spacing).ceil().max(1.0) as usize;
        for k in 1..n {
            lines.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
        lines.push(w[1]);
    }
    lines
}

fn back_step_quads(
    inflow_width: f64,
    inflow_length: f64,
    outflow_width: f64,
    outflow_length: f64,
    spacing: f64,
) -> QuadMesh {
    let step = outflow_width - inflow_width;
    let xs = subdivide(&[0.0, inflow_length, inflow_length + outflow_length], spacing);
    let ys = subdivide(&[0.0, step, outflow_width], spacing);
    let inside = |xc: f64, yc: f64| xc > inflow_length || yc > step;

    let mut index = HashMap::new();
    let mut points = Vec::new();
    let mut quads = Vec::new();
    let mut id = |i: usize, j: usize, points: &mut Vec<Point>| {
        *index.entry((i, j)).or_insert_with(|| {
            points.push([xs[i], ys[j]]);
            points.len() - 1
        })
    };
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            if !inside(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])) {
                continue;
            }
            let a = id(i, j, &mut points);
            let b = id(i + 1, j, &mut points);
            let c = id(i + 1, j + 1, &mut points);
            let d = id(i, j + 1, &mut points);
            quads.push([a, b, c, d]);
        }
    }
    QuadMesh { points, quads }
}

fn annulus_quads(inner: f64, outer: f64, spacing: f64) -> QuadMesh {
    let radii = subdivide(&[inner, outer], spacing);
    let n_theta = ((2.0 * PI * outer / spacing).ceil() as usize).max(8);
    let center = [outer, outer];
    let mut points = Vec::with_capacity(radii.len() * n_theta);
    for &r in &radii {
        for m in 0..n_theta {
            let t = 2.0 * PI * m as f64 / n_theta as f64;
            points.push([center[0] + r * t.cos(), center[1] + r * t.sin()]);
        }
    }
    let id = |k: usize, m: usize| k * n_theta + (m % n_theta);
    let mut quads = Vec::new();
    for k in 0..radii.len() - 1 {
        for m in 0..n_theta {
            quads.push([id(k, m), id(k + 1, m), id(k + 1, m + 1), id(k, m + 1)]);
        }
    }
    QuadMesh { points, quads }
}

struct ObstaclePatch {
    triangles: Vec<[usize; 3]>,
    obstacle_vertices: HashSet<usize>,
}

fn quad_contains(points: &[Point], q: &[usize; 4], p: Point) -> bool {
    let inside_tri = |a: Point, b: Point, c: Point| {
        signed_area(a, b, p) >= 0.0 && signed_area(b, c, p) >= 0.0 && signed_area(c, a, p) >= 0.0
    };
    let [a, b, c, d] = q.map(|v| points[v]);
    inside_tri(a, b, c) || inside_tri(a, c, d)
}

fn polygon_contains(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn encroaches(p: Point, a: Point, b: Point) -> bool {
    (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1]) < 0.0
}

/// Constrained segment of the obstacle patch, in local point indices.
#[derive(Clone, Copy, PartialEq)]
enum Segment {
    /// Side shared with a kept grid cell; cannot be split.
    Grid { quad: usize },
    /// Piece of the outer domain boundary.
    Outer { side: (usize, usize), piece: usize },
    /// Chord of the obstacle polygon.
    Obstacle { chord: usize },
}

/// Removes the cells near the obstacle and returns the triangles of the
/// region between the remaining grid and the obstacle boundary. New vertices
/// are appended to `mesh.points`.
///
/// The patch is a conforming Delaunay triangulation: every constrained
/// segment is kept free of other points inside its diametral circle, by
/// splitting obstacle chords and outer-boundary pieces, or by removing the
/// grid cell behind an encroached grid side.
fn carve_obstacle(
    spec: &GeometrySpec,
    obstacle: &Obstacle,
    mesh: &mut QuadMesh,
    spacing: f64,
    h: f64,
) -> Result<ObstaclePatch> {
    for k in 0..720 {
        let p = obstacle.point_at(2.0 * PI * k as f64 / 720.0);
        if !spec.base_contains(p, -1e-12) {
            return config("obstacle is not strictly inside the fluid domain");
        }
    }

    let margin = 0.6 * spacing;
    let near: Vec<bool> = mesh.points.iter().map(|&p| obstacle.signed_distance(p) < margin).collect();
    let mut removed: Vec<bool> = mesh.quads.iter().map(|q| q.iter().any(|&v| near[v])).collect();
    if !removed.iter().any(|&r| r) {
        return config("obstacle is too small for the mesh resolution");
    }

    let target = 0.9 * spacing;
    let mut params: Vec<f64> = {
        let n = ((obstacle.perimeter() / target).ceil() as usize).max(8);
        (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
    };
    loop {
        let n = params.len();
        let mut refined = Vec::with_capacity(2 * n);
        for k in 0..n {
            let t0 = params[k];
            let t1 = if k + 1 < n { params[k + 1] } else { 2.0 * PI };
            refined.push(t0);
            let (p0, p1) = (obstacle.point_at(t0), obstacle.point_at(t1));
            if (p0[0] - p1[0]).hypot(p0[1] - p1[1]) > target {
                refined.push(0.5 * (t0 + t1));
            }
        }
        if refined.len() == n {
            break;
        }
        params = refined;
    }

    // interior split fractions of outer boundary sides, keyed by (a, b) as oriented in the cell
    let mut outer_splits: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut fill: Vec<Point> = Vec::new();
    let limit = h * (1.0 - 1e-9);
    let min_gap = 0.3 * spacing;

    for _round in 0..400 {
        // boundary of the carved region
        let mut sides: HashMap<(usize, usize), (Vec<usize>, Vec<(usize, usize, usize)>)> = HashMap::new();
        for (qi, q) in mesh.quads.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (q[k], q[(k + 1) % 4]);
                let e = sides.entry((a.min(b), a.max(b))).or_default();
                if removed[qi] {
                    e.1.push((qi, a, b));
                } else {
                    e.0.push(qi);
                }
            }
        }
        let mut grid_sides: Vec<(usize, usize, usize)> = Vec::new();
        let mut outer_sides: Vec<(usize, usize)> = Vec::new();
        for (&(a, b), (kept, rem)) in &sides {
            if rem.len() == 1 {
                match kept.first() {
                    Some(&quad) => grid_sides.push((a, b, quad)),
                    None => outer_sides.push((rem[0].1, rem[0].2)),
                }
            }
        }
        grid_sides.sort_unstable();
        outer_sides.sort_unstable();

        // local point set and segments
        let mut ring: Vec<usize> = grid_sides
            .iter()
            .flat_map(|&(a, b, _)| [a, b])
            .chain(outer_sides.iter().flat_map(|&(a, b)| [a, b]))
            .collect();
        ring.sort_unstable();
        ring.dedup();
        let ring_local: HashMap<usize, usize> = ring.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut local: Vec<Point> = ring.iter().map(|&v| mesh.points[v]).collect();
        let obs_start = local.len();
        local.extend(params.iter().map(|&t| obstacle.point_at(t)));
        let n_obs = params.len();
        let mut segments: Vec<(usize, usize, Segment)> = Vec::new();
        for &(a, b, quad) in &grid_sides {
            segments.push((ring_local[&a], ring_local[&b], Segment::Grid { quad }));
        }
        for &(a, b) in &outer_sides {
            let (pa, pb) = (mesh.points[a], mesh.points[b]);
            let fr = outer_splits.get(&(a, b)).cloned().unwrap_or_default();
            let mut prev = ring_local[&a];
            for (piece, &s) in fr.iter().enumerate() {
                local.push([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                let cur = local.len() - 1;
                segments.push((prev, cur, Segment::Outer { side: (a, b), piece }));
                prev = cur;
            }
            segments.push((prev, ring_local[&b], Segment::Outer { side: (a, b), piece: fr.len() }));
        }
        for k in 0..n_obs {
            segments.push((obs_start + k, obs_start + (k + 1) % n_obs, Segment::Obstacle { chord: k }));
        }
        local.extend(fill.iter().copied());

        let encroached = |p: Point| -> Option<Segment> {
            segments
                .iter()
                .find(|&&(a, b, _)| encroaches(p, local[a], local[b]))
                .map(|&(_, _, s)| s)
        };

        // enforce the empty diametral circle of every segment
        let mut fixes: Vec<Segment> = Vec::new();
        for &(a, b, seg) in &segments {
            let (pa, pb) = (local[a], local[b]);
            if local.iter().enumerate().any(|(i, &p)| i != a && i != b && encroaches(p, pa, pb)) {
                fixes.push(seg);
            }
        }
        if apply_fixes(&fixes, &mut removed, &mut outer_splits, &mut params) {
            continue;
        }

        let in_region = |p: Point| {
            mesh.quads
                .iter()
                .zip(&removed)
                .any(|(q, &r)| r && quad_contains(&mesh.points, q, p))
        };
        let obstacle_poly = &local[obs_start..obs_start + n_obs];
        let tris: Vec<[usize; 3]> = triangulate(&local)
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|v| local[v]);
                let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
                !polygon_contains(obstacle_poly, g) && in_region(g)
            })
            .collect();

        let longest = |t: &[usize; 3]| -> f64 {
            (0..3)
                .map(|k| {
                    let (a, b) = (local[t[k]], local[t[(k + 1) % 3]]);
                    (a[0] - b[0]).hypot(a[1] - b[1])
                })
                .fold(0.0, f64::max)
        };
        let mut bad: Vec<&[usize; 3]> = tris.iter().filter(|t| longest(t) > limit).collect();
        bad.sort_by(|x, y| longest(y).total_cmp(&longest(x)));

        let mut new_pts: Vec<Point> = Vec::new();
        for t in bad {
            let [a, b, c] = t.map(|v| local[v]);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            for cand in [circumcenter(a, b, c), Some(centroid)].into_iter().flatten() {
                if !in_region(cand) || obstacle.signed_distance(cand) < 0.0 {
                    continue;
                }
                if let Some(seg) = encroached(cand) {
                    if !matches!(seg, Segment::Grid { .. }) {
                        fixes.push(seg);
                        break;
                    }
                    continue;
                }
                let close = local.iter().chain(&new_pts).any(|q| (cand[0] - q[0]).hypot(cand[1] - q[1]) < min_gap);
                if close {
                    continue;
                }
                new_pts.push(cand);
                break;
            }
        }
        if !new_pts.is_empty() || !fixes.is_empty() {
            fill.extend(new_pts);
            apply_fixes(&fixes, &mut removed, &mut outer_splits, &mut params);
            continue;
        }

        // every constrained edge must survive in the triangulation
        let mut tri_edges = HashSet::new();
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                tri_edges.insert((a.min(b), a.max(b)));
            }
        }
        if segments.iter().any(|&(a, b, _)| !tri_edges.contains(&(a.min(b), a.max(b)))) {
            return config("obstacle patch triangulation lost a constrained edge");
        }

        // splice into the global vertex list
        let base = mesh.points.len();
        let mut map: Vec<usize> = ring.clone();
        for (k, p) in local.iter().enumerate().skip(ring.len()) {
            mesh.points.push(*p);
            map.push(base + k - ring.len());
        }
        mesh.quads = mesh
            .quads
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(q, _)| *q)
            .collect();
        let obstacle_vertices = (0..n_obs).map(|k| map[obs_start + k]).collect();
        let triangles = tris.iter().map(|t| t.map(|v| map[v])).collect();
        return Ok(ObstaclePatch { triangles, obstacle_vertices });
    }
    config("obstacle patch refinement did not converge")
}

/// Applies segment repairs; returns whether anything changed.
fn apply_fixes(
    fixes: &[Segment],
    removed: &mut [bool],
    outer_splits: &mut HashMap<(usize, usize), Vec<f64>>,
    params: &mut Vec<f64>,
) -> bool {
    let mut changed = false;
    let mut chords = Vec::new();
    let mut pieces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &f in fixes {
        match f {
            Segment::Grid { quad } => {
                changed |= !removed[quad];
                removed[quad] = true;
            }
            Segment::Outer { side, piece } => pieces.entry(side).or_default().push(piece),
            Segment::Obstacle { chord } => chords.push(chord),
        }
    }
    for (side, mut list) in pieces {
        list.sort_unstable();
        list.dedup();
        let fr = outer_splits.entry(side).or_default();
        for &piece in list.iter().rev() {
            let lo = if piece == 0 { 0.0 } else { fr[piece - 1] };
            let hi = if piece == fr.len() { 1.0 } else { fr[piece] };
            fr.insert(piece, 0.5 * (lo + hi));
            changed = true;
        }
    }
    chords.sort_unstable();
    chords.dedup();
    for &k in chords.iter().rev() {
        let t0 = params[k];
        let t1 = if k + 1 < params.len() { params[k + 1] } else { 2.0 * PI };
        params.insert(k + 1, 0.5 * (t0 + t1));
        changed = true;
    }
    changed
}

fn tag_boundary(
    spec: &GeometrySpec,
    vertices: &[Point],
    elements: &[[usize; 3]],
    obstacle_vertices: &HashSet<usize>,
) -> Vec<BoundaryEdge> {
    let mut count: HashMap<(usize, usize), ([usize; 2], usize)> = HashMap::new();
    for t in elements {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            count.entry((a.min(b), a.max(b))).or_insert(([a, b], 0)).1 += 1;
        }
    }
    let mut edges: Vec<BoundaryEdge> = count
        .into_values()
        .filter(|(_, n)| *n == 1)
        .map(|(v, _)| {
            let mid = [
                0.5 * (vertices[v[0]][0] + vertices[v[1]][0]),
                0.5 * (vertices[v[0]][1] + vertices[v[1]][1]),
            ];
            let tag = if obstacle_vertices.contains(&v[0]) && obstacle_vertices.contains(&v[1]) {
                BoundaryTag::ObstacleWall
            } else {
                match spec.kind {
                    GeometryKind::BackStep { inflow_length, outflow_length, .. } => {
                        let total = inflow_length + outflow_length;
                        let tol = 1e-9 * total;
                        if mid[0] < tol {
                            BoundaryTag::Inlet
                        } else if mid[0] > total - tol {
                            BoundaryTag::Outlet
                        } else {
                            BoundaryTag::Wall
                        }
                    }
                    GeometryKind::Annulus { inner_radius, outer_radius } => {
                        let r = (mid[0] - outer_radius).hypot(mid[1] - outer_radius);
                        if r < 0.5 * (inner_radius + outer_radius) {
                            BoundaryTag::MovingWall
                        } else {
                            BoundaryTag::Wall
                        }
                    }
                }
            };
            BoundaryEdge { vertices: v, tag }
        })
        .collect();
    edges.sort_by_key(|e| e.vertices);
    edges
}
