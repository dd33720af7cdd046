//! Conforming triangular meshes with boundary tags and element adjacency.

mod delaunay;
mod generate;
mod geometry;
mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use generate::generate_mesh;
pub use geometry::{GeometryKind, GeometrySpec, Obstacle, ObstacleShape, Transform};
pub use io::{read_mesh, write_mesh};

pub type Point = [f64; 2];

/// Boundary condition class of a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    Wall,
    MovingWall,
    ObstacleWall,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Inlet,
        BoundaryTag::Outlet,
        BoundaryTag::Wall,
        BoundaryTag::MovingWall,
        BoundaryTag::ObstacleWall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "INLET",
            BoundaryTag::Outlet => "OUTLET",
            BoundaryTag::Wall => "WALL",
            BoundaryTag::MovingWall => "MOVING_WALL",
            BoundaryTag::ObstacleWall => "OBSTACLE_WALL",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Format(format!("unknown boundary tag `{s}`")))
    }
}

/// A boundary edge. Vertices are ordered so that the domain lies to the left
/// of `vertices[0] -> vertices[1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// An immutable, validated triangular mesh.
///
/// Elements are stored counter-clockwise. `neighbors[e]` lists the elements
/// sharing an edge with `e` in ascending id order.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    neighbors: Vec<Vec<usize>>,
    sizes: Vec<f64>,
    areas: Vec<f64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh and checks orientation, conformity and boundary coverage.
    ///
    /// Boundary edges may be given in either direction; they are re-oriented
    /// to follow their element.
    pub fn new(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Config("non-finite vertex coordinate".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Config(format!("element {e} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(Error::Config(format!(
                    "element {e} has non-positive signed area {area:e}"
                )));
            }
            areas.push(area);
        }

        // edge -> (element, oriented edge) occurrences
        let mut edges: HashMap<(usize, usize), Vec<(usize, [usize; 2])>> = HashMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry(edge_key(a, b)).or_default().push((e, [a, b]));
            }
        }

        let mut neighbors = vec![Vec::with_capacity(3); elements.len()];
        let mut open: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
        for (key, uses) in &edges {
            match uses.as_slice() {
                [(_, oriented)] => {
                    open.insert(*key, *oriented);
                }
                [(e1, _), (e2, _)] => {
                    neighbors[*e1].push(*e2);
                    neighbors[*e2].push(*e1);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "non-conforming mesh: edge {key:?} shared by {} elements",
                        uses.len()
                    )))
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }

        let mut oriented = Vec::with_capacity(boundary.len());
        let mut seen = HashMap::new();
        for be in boundary {
            let key = edge_key(be.vertices[0], be.vertices[1]);
            let Some(dir) = open.get(&key) else {
                return Err(Error::Config(format!(
                    "boundary edge {:?} is not an edge of exactly one element",
                    be.vertices
                )));
            };
            if seen.insert(key, be.tag).is_some() {
                return Err(Error::Config(format!("boundary edge {key:?} listed twice")));
            }
            oriented.push(BoundaryEdge { vertices: *dir, tag: be.tag });
        }
        if seen.len() != open.len() {
            return Err(Error::Config(format!(
                "{} open edges but {} tagged boundary edges",
                open.len(),
                seen.len()
            )));
        }

        let sizes = elements
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| vertices[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .collect();

        Ok(Self { vertices, elements, boundary: oriented, neighbors, sizes, areas })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Elements sharing an edge with `e`, ascending.
    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.neighbors[e]
    }

    /// Longest edge of element `e`.
    pub fn element_size(&self, e: usize) -> f64 {
        self.sizes[e]
    }

    pub fn element_sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Edge lengths of element `e`, edge `k` joining local vertices `k` and `k+1`.
    pub fn edge_lengths(&self, e: usize) -> [f64; 3] {
        let [a, b, c] = self.elements[e].map(|v| self.vertices[v]);
        [dist(a, b), dist(b, c), dist(c, a)]
    }

    pub fn tags_present(&self) -> Vec<BoundaryTag> {
        let mut tags: Vec<_> = self.boundary.iter().map(|b| b.tag).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn num_edges(&self) -> usize {
        let interior: usize = self.neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        interior + self.boundary.len()
    }

    /// Euler characteristic V - E + F of the triangulated domain; equals
    /// `1 - holes` for a connected planar domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_elements() as i64
    }

    /// Applies a coordinate transform. Element orientation is restored after
    /// reflections by swapping the last two local vertices; element and vertex
    /// numbering are unchanged.
    pub fn apply_transform(&self, t: Transform) -> Mesh {
        let vertices: Vec<Point> = self.vertices.iter().map(|&p| t.apply(p)).collect();
        let flip = t.reverses_orientation();
        let elements: Vec<[usize; 3]> = if flip {
            self.elements.iter().map(|&[a, b, c]| [a, c, b]).collect()
        } else {
            self.elements.clone()
        };
        let boundary = self
            .boundary
            .iter()
            .map(|be| {
                let [a, b] = be.vertices;
                BoundaryEdge { vertices: if flip { [b, a] } else { [a, b] }, tag: be.tag }
            })
            .collect();
        let factor = t.length_factor();
        Mesh {
            vertices,
            elements,
            boundary,
            neighbors: self.neighbors.clone(),
            sizes: self.sizes.iter().map(|h| h * factor).collect(),
            areas: self.areas.iter().map(|a| a * factor * factor).collect(),
        }
    }
}
