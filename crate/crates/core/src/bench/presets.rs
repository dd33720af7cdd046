//! Built-in suites: a desk-scale matrix that runs in minutes, and the full
//! benchmark matrix of the paper's test tables.

use std::path::PathBuf;

use super::config::{ExperimentConfig, StrategyKind, SuiteConfig};
use crate::fem::FluidProps;
use crate::mesh::{GeometrySpec, Obstacle, ObstacleShape, Transform};

pub const BASELINES: [StrategyKind; 4] =
    [StrategyKind::Iter, StrategyKind::Err, StrategyKind::NewtonConstant, StrategyKind::NewtonAdaptive];

/// `start:step:end`, inclusive, rounded to the step's decimals.
fn range(start: f64, step: f64, end: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| round(start + k as f64 * step)).collect()
}

fn round(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

fn case(family: &str, id: String, geometry: GeometrySpec, h_max: f64, velocity: f64) -> ExperimentConfig {
    ExperimentConfig {
        id,
        family: family.to_string(),
        geometry,
        h_max,
        velocity,
        velocity_range: None,
        props: FluidProps::default(),
        strategies: BASELINES.to_vec(),
        tol: 1e-6,
        max_iter: 100,
        seed: 0,
        snapshots: Vec::new(),
    }
}

fn sweep(
    family: &str,
    geometry: GeometrySpec,
    hs: &[f64],
    us: &[f64],
    velocity_range: (f64, f64),
) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for &h in hs {
        for &u in us {
            let mut c = case(family, format!("{family}-h{h}-u{u}"), geometry, h, u);
            c.velocity_range = Some(velocity_range);
            out.push(c);
        }
    }
    out
}

fn circle(x: f64, y: f64, radius: f64) -> Obstacle {
    Obstacle { shape: ObstacleShape::Circle { radius }, center: [x, y] }
}

fn ellipse(x: f64, y: f64, a: f64, b: f64) -> Obstacle {
    Obstacle { shape: ObstacleShape::Ellipse { a, b }, center: [x, y] }
}

fn shape_tag(o: &Obstacle) -> String {
    match o.shape {
        ObstacleShape::Circle { radius } => format!("circle{radius}"),
        ObstacleShape::Ellipse { a, b } => format!("ellipse{a}x{b}"),
    }
}

/// B1 at three mesh sizes × three inflow velocities, C at 2 × 2 and B1 with
/// a circular obstacle at two positions: 15 configurations, all below 2 000
/// elements.
pub fn desk() -> SuiteConfig {
    let mut cases = sweep("B1", GeometrySpec::b1(), &[0.0206, 0.0231, 0.0256], &[0.001, 0.004, 0.007], (0.001, 0.015));
    cases.extend(sweep("C", GeometrySpec::couette(), &[0.035, 0.04], &[0.01, 0.05], (0.01, 0.1)));
    for x in [0.3, 1.1] {
        let o = circle(x, 0.04, 0.03);
        let mut c = case("BO", format!("BO-{}-x{x}-y0.04", shape_tag(&o)), GeometrySpec::b1().with_obstacle(o), 0.0206, 0.008);
        c.velocity_range = Some((0.008, 0.008));
        cases.push(c);
    }
    SuiteConfig { name: "desk".into(), output: PathBuf::from("out/desk"), model: None, cases }
}

/// The full test matrix: back-step families (B1, B1S, B2, B2S, mirrored BM,
/// rotated BR), Couette (C, CS) and obstacle cases (BO, CO).
///
/// The obstacle table lists 0.01/0.03/0.05 as Couette-obstacle mesh sizes and
/// 0.014–0.022 as its wall velocities; both are kept as printed.
pub fn full() -> SuiteConfig {
    let b1_u = [0.001, 0.004, 0.007, 0.01, 0.012, 0.015];
    let b1_h = range(0.0106, 0.005, 0.0256);
    let b1s_u: Vec<f64> = b1_u.iter().map(|u| round(10.0 * u)).collect();
    let b1s_h = range(0.00106, 0.0005, 0.00256);
    let b2_u = range(0.001, 0.003, 0.01);
    let b2_h = [0.0126, 0.0156, 0.0186, 0.0206];
    let b2s_u = range(0.01, 0.03, 0.1);
    let b2s_h: Vec<f64> = b2_h.iter().map(|h| round(0.1 * h)).collect();
    let scaled = Transform::Scale(0.1);

    let mut cases = Vec::new();
    cases.extend(sweep("B1", GeometrySpec::b1(), &b1_h, &b1_u, (0.001, 0.015)));
    cases.extend(sweep("B1S", GeometrySpec::b1().with_transform(scaled), &b1s_h, &b1s_u, (0.01, 0.15)));
    cases.extend(sweep("B2", GeometrySpec::b2(), &b2_h, &b2_u, (0.001, 0.01)));
    cases.extend(sweep("B2S", GeometrySpec::b2().with_transform(scaled), &b2s_h, &b2s_u, (0.01, 0.1)));
    cases.extend(sweep("BM", GeometrySpec::b1().with_transform(Transform::MirrorX), &b1_h, &b1_u, (0.001, 0.015)));
    cases.extend(sweep("BR", GeometrySpec::b1().with_transform(Transform::Rotate90Ccw), &b1_h, &b1_u, (0.001, 0.015)));
    cases.extend(sweep(
        "C",
        GeometrySpec::couette(),
        &range(0.014, 0.002, 0.022),
        &[0.01, 0.03, 0.04, 0.05, 0.07, 0.1],
        (0.01, 0.1),
    ));
    cases.extend(sweep("CS", GeometrySpec::couette_small(), &range(0.0028, 0.0004, 0.0044), &[0.01, 0.03, 0.05], (0.01, 0.05)));

    let shapes = |x: f64, y: f64, r: f64| [circle(x, y, r), ellipse(x, y, 0.03, 0.02), ellipse(x, y, 0.02, 0.03)];
    let mut bo_centres: Vec<(f64, f64)> = range(0.035, 0.005, 0.08).into_iter().map(|y| (0.37, y)).collect();
    bo_centres.extend([(0.3, 0.04), (1.1, 0.04)]);
    for (x, y) in bo_centres {
        for o in shapes(x, y, 0.03) {
            let id = format!("BO-{}-x{x}-y{y}", shape_tag(&o));
            let mut c = case("BO", id, GeometrySpec::b1().with_obstacle(o), 0.0126, 0.008);
            c.velocity_range = Some((0.008, 0.008));
            cases.push(c);
        }
    }
    for o in shapes(0.1, 0.4, 0.04) {
        for h in [0.01, 0.03, 0.05] {
            for u in range(0.014, 0.002, 0.022) {
                let id = format!("CO-{}-h{h}-u{u}", shape_tag(&o));
                let mut c = case("CO", id, GeometrySpec::couette().with_obstacle(o), h, u);
                c.velocity_range = Some((0.014, 0.022));
                cases.push(c);
            }
        }
    }
    SuiteConfig { name: "full".into(), output: PathBuf::from("out/full"), model: None, cases }
}

/// Training cases for `gen-data`: B1 at two mesh sizes and four inflow
/// velocities, harvested before the 1st, 5th and 10th step. It shares two
/// mesh sizes with the desk sweep, so desk B1 results are not fully held
/// out.
pub fn desk_data() -> SuiteConfig {
    let mut cases = sweep("B1", GeometrySpec::b1(), &[0.0206, 0.0256], &[0.001, 0.003, 0.005, 0.007], (0.001, 0.015));
    for c in &mut cases {
        c.strategies = vec![StrategyKind::Iter];
        c.snapshots = vec![1, 5, 10];
    }
    SuiteConfig { name: "desk-data".into(), output: PathBuf::from("out/data"), model: None, cases }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<SuiteConfig> {
    match name {
        "desk" => Some(desk()),
        "full" => Some(full()),
        "desk-data" => Some(desk_data()),
        _ => None,
    }
}
