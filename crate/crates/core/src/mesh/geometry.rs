use std::f64::consts::PI;

use super::Point;
use crate::error::{config, Result};

/// Coordinate transform applied after mesh generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// Reflection `x -> -x`.
    MirrorX,
    /// Quarter turn counter-clockwise about the origin.
    Rotate90Ccw,
    Scale(f64),
}

impl Transform {
    pub fn apply(self, [x, y]: Point) -> Point {
        match self {
            Transform::Identity => [x, y],
            Transform::MirrorX => [-x, y],
            Transform::Rotate90Ccw => [-y, x],
            Transform::Scale(s) => [s * x, s * y],
        }
    }

    /// Maps a vector (velocity) the same way as a point, without the scaling.
    pub fn apply_vector(self, [x, y]: Point) -> Point {
        match self {
            Transform::Scale(_) => [x, y],
            t => t.apply([x, y]),
        }
    }

    pub fn reverses_orientation(self) -> bool {
        matches!(self, Transform::MirrorX)
    }

    pub fn length_factor(self) -> f64 {
        match self {
            Transform::Scale(s) => s,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleShape {
    Circle { radius: f64 },
    /// `a` is the semi-axis along x, `b` along y.
    Ellipse { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub shape: ObstacleShape,
    pub center: Point,
}

impl Obstacle {
    pub(crate) fn semi_axes(&self) -> (f64, f64) {
        match self.shape {
            ObstacleShape::Circle { radius } => (radius, radius),
            ObstacleShape::Ellipse { a, b } => (a, b),
        }
    }

    pub(crate) fn point_at(&self, t: f64) -> Point {
        let (a, b) = self.semi_axes();
        [self.center[0] + a * t.cos(), self.center[1] + b * t.sin()]
    }

    /// Ramanujan's perimeter approximation; exact for circles.
    pub(crate) fn perimeter(&self) -> f64 {
        let (a, b) = self.semi_axes();
        PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
    }

    pub(crate) fn contains(&self, p: Point) -> bool {
        let (a, b) = self.semi_axes();
        let dx = (p[0] - self.center[0]) / a;
        let dy = (p[1] - self.center[1]) / b;
        dx * dx + dy * dy < 1.0
    }

    /// Signed distance to the boundary curve (negative inside), by dense
    /// sampling of the parametrisation.
    pub(crate) fn signed_distance(&self, p: Point) -> f64 {
        const SAMPLES: usize = 720;
        let mut best = f64::INFINITY;
        for k in 0..SAMPLES {
            let q = self.point_at(2.0 * PI * k as f64 / SAMPLES as f64);
            best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
        }
        if self.contains(p) {
            -best
        } else {
            best
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryKind {
    /// Inflow tunnel (upper left) joined to a wider outflow tunnel. Widths are
    /// the tunnel heights; the step sits at `x = inflow_length`.
    BackStep {
        inflow_width: f64,
        inflow_length: f64,
        outflow_width: f64,
        outflow_length: f64,
    },
    /// Annulus centred at `(outer_radius, outer_radius)`.
    Annulus { inner_radius: f64, outer_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub obstacle: Option<Obstacle>,
    pub transform: Transform,
}

impl GeometrySpec {
    pub fn back_step(inflow: (f64, f64), outflow: (f64, f64)) -> Self {
        Self {
            kind: GeometryKind::BackStep {
                inflow_width: inflow.0,
                inflow_length: inflow.1,
                outflow_width: outflow.0,
                outflow_length: outflow.1,
            },
            obstacle: None,
            transform: Transform::Identity,
        }
    }

    pub fn annulus(inner_radius: f64, outer_radius: f64) -> Self {
        Self {
            kind: GeometryKind::Annulus { inner_radius, outer_radius },
            obstacle: None,
            transform: Transform::Identity,
        }
    }

    /// B1: inflow tunnel 0.05 x 0.25 m, outflow tunnel 0.12 x 1.15 m.
    pub fn b1() -> Self {
        Self::back_step((0.05, 0.25), (0.12, 1.15))
    }

    /// B2: inflow tunnel 0.08 x 0.25 m, outflow tunnel 0.22 x 1.15 m.
    pub fn b2() -> Self {
        Self::back_step((0.08, 0.25), (0.22, 1.15))
    }

    /// C: outer radius 0.4 m, inner radius 0.2 m.
    pub fn couette() -> Self {
        Self::annulus(0.2, 0.4)
    }

    /// CS: outer radius 0.08 m, inner radius 0.04 m.
    pub fn couette_small() -> Self {
        Self::annulus(0.04, 0.08)
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacle = Some(obstacle);
        self
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    /// Smallest channel dimension of the base geometry.
    pub fn narrowest_channel(&self) -> f64 {
        match self.kind {
            GeometryKind::BackStep { inflow_width, outflow_width, .. } => {
                let lower = outflow_width - inflow_width;
                inflow_width.min(lower)
            }
            GeometryKind::Annulus { inner_radius, outer_radius } => outer_radius - inner_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GeometryKind::BackStep { inflow_width, inflow_length, outflow_width, outflow_length } => {
                let all = [inflow_width, inflow_length, outflow_width, outflow_length];
                if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return config("back-step dimensions must be positive");
                }
                if inflow_width >= outflow_width {
                    return config("inflow tunnel must be narrower than the outflow tunnel");
                }
            }
            GeometryKind::Annulus { inner_radius, outer_radius } => {
                if !(inner_radius > 0.0 && outer_radius.is_finite()) {
                    return config("annulus radii must be positive");
                }
                if inner_radius >= outer_radius {
                    return config("annulus inner radius must be smaller than the outer radius");
                }
            }
        }
        if let Some(o) = self.obstacle {
            let (a, b) = o.semi_axes();
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return config("obstacle dimensions must be positive");
            }
        }
        match self.transform {
            Transform::Scale(s) if !(s > 0.0 && s.is_finite()) => {
                config("scale factor must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Whether `p` (untransformed coordinates) lies in the closed base domain,
    /// ignoring any obstacle.
    pub(crate) fn base_contains(&self, p: Point, slack: f64) -> bool {
        match self.kind {
            GeometryKind::BackStep { inflow_width, inflow_length, outflow_width, outflow_length } => {
                let (x, y) = (p[0], p[1]);
                let total = inflow_length + outflow_length;
                if x < -slack || x > total + slack || y < -slack || y > outflow_width + slack {
                    return false;
                }
                x >= inflow_length - slack || y >= outflow_width - inflow_width - slack
            }
            GeometryKind::Annulus { inner_radius, outer_radius } => {
                let r = (p[0] - outer_radius).hypot(p[1] - outer_radius);
                r >= inner_radius - slack && r <= outer_radius + slack
            }
        }
    }
}
