//! Incremental Bowyer–Watson Delaunay triangulation for the small point sets
//! around obstacles. Quadratic, with exact orientation/incircle predicates.

use std::collections::HashMap;

use robust::{incircle, orient2d, Coord};

use super::Point;

fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Delaunay triangles (counter-clockwise, indices into `points`).
pub(crate) fn triangulate(points: &[Point]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut pts = points.to_vec();
    pts.push([mid[0] - 40.0 * span, mid[1] - 30.0 * span]);
    pts.push([mid[0] + 40.0 * span, mid[1] - 30.0 * span]);
    pts.push([mid[0], mid[1] + 40.0 * span]);

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for i in 0..n {
        let p = c(pts[i]);
        let (bad, keep): (Vec<_>, Vec<_>) = tris
            .into_iter()
            .partition(|t| incircle(c(pts[t[0]]), c(pts[t[1]]), c(pts[t[2]]), p) > 0.0);
        tris = keep;
        // cavity boundary: directed edges of bad triangles whose twin is not bad
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))] == 1 && orient2d(c(pts[a]), c(pts[b]), p) > 0.0 {
                    tris.push([a, b, i]);
                }
            }
        }
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    tris
}

pub(crate) fn circumcenter(a: Point, b: Point, p: Point) -> Option<Point> {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (p[0] - a[0], p[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < f64::MIN_POSITIVE {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    Some([a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_center_gives_four_triangles() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 4);
        let area: f64 = tris
            .iter()
            .map(|t| super::super::signed_area(pts[t[0]], pts[t[1]], pts[t[2]]))
            .sum();
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cocircular_grid_is_covered() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                pts.push([i as f64 * 0.25, j as f64 / 3.0]);
            }
        }
        let tris = triangulate(&pts);
        let area: f64 = tris
            .iter()
            .map(|t| super::super::signed_area(pts[t[0]], pts[t[1]], pts[t[2]]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12, "area {area}");
        assert!(tris
            .iter()
            .all(|t| super::super::signed_area(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0));
    }

    #[test]
    fn circumcenter_of_right_triangle_is_hypotenuse_midpoint() {
        let cc = circumcenter([0.0, 0.0], [2.0, 0.0], [0.0, 2.0]).unwrap();
        assert!((cc[0] - 1.0).abs() < 1e-15 && (cc[1] - 1.0).abs() < 1e-15);
    }
}
