//! Experiment configuration.
//!
//! A suite file is a list of `key = value` lines grouped into one `[suite]`
//! section and any number of `[case <id>]` sections; `#` starts a comment.
//! Keys set in `[suite]` are defaults for every case, so a case only lists
//! what differs:
//!
//! ```text
//! [suite]
//! name = desk
//! output = out/desk
//! strategies = iter, err, nc, an
//! tol = 1e-6
//! max_iter = 100
//!
//! [case B1-h0.0206-u0.001]
//! family = B1
//! geometry = b1
//! h_max = 0.0206
//! velocity = 0.001
//! ```
//!
//! | key | where | value |
//! |---|---|---|
//! | `name`, `output`, `model` | suite | suite name, artifact directory, model file for `nn` |
//! | `strategies` | both | comma list of `iter`, `err`, `nn`, `nc`, `an` |
//! | `tol`, `max_iter`, `seed` | both | stopping rule; seed recorded with the run |
//! | `rho`, `mu` | both | fluid density and dynamic viscosity |
//! | `transform` | both | `identity`, `mirror_x`, `rotate90`, `scale <s>` |
//! | `snapshots` | both | iterations harvested by `gen-data` (1-based) |
//! | `family` | case | label used to group plots and means |
//! | `geometry` | case | `b1`, `b2`, `c`, `cs`, `backstep <w_in> <l_in> <w_out> <l_out>`, `annulus <r_in> <r_out>` |
//! | `obstacle` | case | `none`, `circle <x> <y> <r>`, `ellipse <x> <y> <a> <b>` |
//! | `h_max`, `velocity` | case | largest element edge (m), inflow peak or wall speed (m/s) |
//! | `velocity_range` | case | `<lo> <hi>`; the velocity must lie inside |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{config, Error, Result};
use crate::fem::{BoundaryConditions, FluidProps, Problem};
use crate::mesh::{generate_mesh, GeometryKind, GeometrySpec, Obstacle, ObstacleShape, Transform};
use crate::ptc::{CflStrategy, SolveOptions};

/// Strategy names as they appear in configuration files and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Iter,
    Err,
    Learned,
    NewtonConstant,
    NewtonAdaptive,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Iter,
        StrategyKind::Err,
        StrategyKind::Learned,
        StrategyKind::NewtonConstant,
        StrategyKind::NewtonAdaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Iter => "iter",
            StrategyKind::Err => "err",
            StrategyKind::Learned => "nn",
            StrategyKind::NewtonConstant => "nc",
            StrategyKind::NewtonAdaptive => "an",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (expected iter, err, nn, nc or an)")))
    }

    /// The solver strategy; Newton-constant is undamped, Newton-adaptive
    /// backtracks down to λ = 1e-4.
    pub fn strategy(self, model: Option<&std::sync::Arc<crate::nn::Model>>) -> Result<CflStrategy> {
        Ok(match self {
            StrategyKind::Iter => CflStrategy::IterSchedule,
            StrategyKind::Err => CflStrategy::err_default(),
            StrategyKind::Learned => match model {
                Some(m) => CflStrategy::learned(m.clone()),
                None => return config("strategy `nn` needs a model file"),
            },
            StrategyKind::NewtonConstant => CflStrategy::NewtonConstant { damping: 1.0 },
            StrategyKind::NewtonAdaptive => CflStrategy::NewtonAdaptive { lambda_min: 1e-4 },
        })
    }
}

/// One benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub family: String,
    /// Geometry with obstacle and transform.
    pub geometry: GeometrySpec,
    pub h_max: f64,
    /// Inflow peak (back-step) or wall speed (annulus), m/s.
    pub velocity: f64,
    pub velocity_range: Option<(f64, f64)>,
    pub props: FluidProps,
    pub strategies: Vec<StrategyKind>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub snapshots: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(|c: char| c.is_whitespace() || c == '/' || c == ',') {
            return config(format!("case id `{}` must be non-empty without spaces, commas or slashes", self.id));
        }
        self.geometry.validate()?;
        self.props.validate()?;
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return config(format!("{}: h_max must be positive", self.id));
        }
        if !(self.velocity >= 0.0 && self.velocity.is_finite()) {
            return config(format!("{}: velocity must be non-negative", self.id));
        }
        if let Some((lo, hi)) = self.velocity_range {
            if !(lo <= self.velocity && self.velocity <= hi) {
                return config(format!("{}: velocity {} outside the declared range [{lo}, {hi}]", self.id, self.velocity));
            }
        }
        if self.strategies.is_empty() {
            return config(format!("{}: at least one strategy is required", self.id));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return config(format!("{}: tol must lie in (0, 1)", self.id));
        }
        if self.max_iter == 0 {
            return config(format!("{}: max_iter must be positive", self.id));
        }
        if self.snapshots.contains(&0) {
            return config(format!("{}: snapshot iterations start at 1", self.id));
        }
        Ok(())
    }

    /// Meshes the geometry and sets the driving velocity on the inlet or the
    /// moving wall.
    pub fn problem(&self) -> Result<Problem> {
        self.validate()?;
        let mesh = generate_mesh(&self.geometry, self.h_max)?;
        let bc = match self.geometry.kind {
            GeometryKind::BackStep { .. } => BoundaryConditions::inflow(self.velocity),
            GeometryKind::Annulus { .. } => BoundaryConditions::rotating_wall(self.velocity),
        };
        Problem::new(mesh, self.props, bc)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, ..Default::default() }
    }
}

/// A named list of configurations with a shared artifact directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub name: String,
    pub output: PathBuf,
    pub model: Option<PathBuf>,
    pub cases: Vec<ExperimentConfig>,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return config("suite has no cases");
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.cases {
            c.validate()?;
            if !seen.insert(&c.id) {
                return config(format!("duplicate case id `{}`", c.id));
            }
        }
        if self.model.is_none() && self.cases.iter().any(|c| c.strategies.contains(&StrategyKind::Learned)) {
            return config("strategy `nn` is listed but the suite has no `model`");
        }
        Ok(())
    }

    /// Strategies in first-appearance order over all cases.
    pub fn strategies(&self) -> Vec<StrategyKind> {
        let mut out = Vec::new();
        for c in &self.cases {
            for &s in &c.strategies {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Replaces every case's strategy list.
    pub fn with_strategies(mut self, strategies: &[StrategyKind]) -> Self {
        for c in &mut self.cases {
            c.strategies = strategies.to_vec();
        }
        self
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut suite: Option<BTreeMap<String, (usize, String)>> = None;
        let mut cases: Vec<(String, BTreeMap<String, (usize, String)>)> = Vec::new();
        let mut current: Option<&mut BTreeMap<String, (usize, String)>> = None;

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                let mut parts = header.split_whitespace();
                current = match (parts.next(), parts.next(), parts.next()) {
                    (Some("suite"), None, _) => {
                        if suite.is_some() {
                            return config(format!("line {lineno}: second [suite] section"));
                        }
                        Some(suite.insert(BTreeMap::new()))
                    }
                    (Some("case"), Some(id), None) => {
                        cases.push((id.to_string(), BTreeMap::new()));
                        cases.last_mut().map(|c| &mut c.1)
                    }
                    _ => return config(format!("line {lineno}: expected [suite] or [case <id>], got [{header}]")),
                };
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let section = current
                .as_deref_mut()
                .ok_or_else(|| Error::Config(format!("line {lineno}: key outside any section")))?;
            let key = k.trim().to_string();
            if section.insert(key.clone(), (lineno, v.trim().to_string())).is_some() {
                return config(format!("line {lineno}: `{key}` set twice in the same section"));
            }
        }

        let suite = suite.unwrap_or_default();
        for (k, (line, _)) in &suite {
            if !SUITE_KEYS.contains(&k.as_str()) && !SHARED_KEYS.contains(&k.as_str()) {
                return config(format!("line {line}: unknown suite key `{k}`"));
            }
        }
        let get = |k: &str| suite.get(k).map(|(_, v)| v.clone());
        let out = SuiteConfig {
            name: get("name").unwrap_or_else(|| "suite".into()),
            output: PathBuf::from(get("output").unwrap_or_else(|| "out".into())),
            model: get("model").map(PathBuf::from),
            cases: cases
                .into_iter()
                .map(|(id, keys)| resolve_case(id, &keys, &suite))
                .collect::<Result<_>>()?,
        };
        out.validate()?;
        Ok(out)
    }

    /// Serializes to the configuration format; `parse` reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[suite]\nname = {}\noutput = {}", self.name, self.output.display());
        if let Some(m) = &self.model {
            let _ = writeln!(s, "model = {}", m.display());
        }
        for c in &self.cases {
            let _ = writeln!(s, "\n[case {}]", c.id);
            let _ = writeln!(s, "family = {}", c.family);
            let _ = writeln!(s, "geometry = {}", geometry_text(&c.geometry));
            if let Some(o) = c.geometry.obstacle {
                let _ = writeln!(s, "obstacle = {}", obstacle_text(&o));
            }
            if c.geometry.transform != Transform::Identity {
                let _ = writeln!(s, "transform = {}", transform_text(c.geometry.transform));
            }
            let _ = writeln!(s, "h_max = {}\nvelocity = {}", c.h_max, c.velocity);
            if let Some((lo, hi)) = c.velocity_range {
                let _ = writeln!(s, "velocity_range = {lo} {hi}");
            }
            let _ = writeln!(s, "rho = {}\nmu = {}", c.props.rho, c.props.mu);
            let names: Vec<&str> = c.strategies.iter().map(|k| k.name()).collect();
            let _ = writeln!(s, "strategies = {}", names.join(", "));
            let _ = writeln!(s, "tol = {:e}\nmax_iter = {}\nseed = {}", c.tol, c.max_iter, c.seed);
            if !c.snapshots.is_empty() {
                let snaps: Vec<String> = c.snapshots.iter().map(|n| n.to_string()).collect();
                let _ = writeln!(s, "snapshots = {}", snaps.join(", "));
            }
        }
        s
    }
}

const SUITE_KEYS: [&str; 3] = ["name", "output", "model"];
const SHARED_KEYS: [&str; 8] = ["strategies", "tol", "max_iter", "seed", "rho", "mu", "transform", "snapshots"];
const CASE_KEYS: [&str; 6] = ["family", "geometry", "obstacle", "h_max", "velocity", "velocity_range"];

fn resolve_case(
    id: String,
    keys: &BTreeMap<String, (usize, String)>,
    suite: &BTreeMap<String, (usize, String)>,
) -> Result<ExperimentConfig> {
    for (k, (line, _)) in keys {
        if !CASE_KEYS.contains(&k.as_str()) && !SHARED_KEYS.contains(&k.as_str()) {
            return config(format!("line {line}: unknown case key `{k}`"));
        }
    }
    let lookup = |k: &str| keys.get(k).or_else(|| suite.get(k));
    let ctx = |k: &str, e: Error| -> Error {
        let line = lookup(k).map_or(0, |(l, _)| *l);
        Error::Config(format!("case {id}, line {line}: {e}"))
    };
    let required = |k: &str| -> Result<&str> {
        lookup(k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Config(format!("case {id}: missing `{k}`")))
    };
    let num = |k: &str, default: Option<f64>| -> Result<f64> {
        match lookup(k) {
            Some((_, v)) => parse_f64(v).map_err(|e| ctx(k, e)),
            None => default.ok_or_else(|| Error::Config(format!("case {id}: missing `{k}`"))),
        }
    };

    let mut geometry = parse_geometry(required("geometry")?).map_err(|e| ctx("geometry", e))?;
    if let Some((_, v)) = lookup("obstacle") {
        geometry.obstacle = parse_obstacle(v).map_err(|e| ctx("obstacle", e))?;
    }
    if let Some((_, v)) = lookup("transform") {
        geometry.transform = parse_transform(v).map_err(|e| ctx("transform", e))?;
    }
    let water = FluidProps::default();
    let strategies = match lookup("strategies") {
        Some((_, v)) => list(v).map(StrategyKind::parse).collect::<Result<Vec<_>>>().map_err(|e| ctx("strategies", e))?,
        None => vec![StrategyKind::Iter, StrategyKind::Err],
    };
    let max_iter = match lookup("max_iter") {
        Some((_, v)) => v.parse().map_err(|_| ctx("max_iter", Error::Config(format!("`{v}` is not a count"))))?,
        None => 100,
    };
    let seed = match lookup("seed") {
        Some((_, v)) => v.parse().map_err(|_| ctx("seed", Error::Config(format!("`{v}` is not an integer"))))?,
        None => 0,
    };
    let snapshots = match lookup("snapshots") {
        Some((_, v)) => list(v)
            .map(|s| s.parse().map_err(|_| Error::Config(format!("`{s}` is not an iteration"))))
            .collect::<Result<Vec<usize>>>()
            .map_err(|e| ctx("snapshots", e))?,
        None => Vec::new(),
    };
    let velocity_range = match lookup("velocity_range") {
        Some((_, v)) => {
            let xs = numbers(v).map_err(|e| ctx("velocity_range", e))?;
            match xs[..] {
                [lo, hi] if lo <= hi => Some((lo, hi)),
                _ => return Err(ctx("velocity_range", Error::Config("expected `<lo> <hi>` with lo <= hi".into()))),
            }
        }
        None => None,
    };

    let case = ExperimentConfig {
        family: lookup("family").map_or_else(|| "default".to_string(), |(_, v)| v.clone()),
        geometry,
        h_max: num("h_max", None)?,
        velocity: num("velocity", None)?,
        velocity_range,
        props: FluidProps { rho: num("rho", Some(water.rho))?, mu: num("mu", Some(water.mu))?, ..water },
        strategies,
        tol: num("tol", Some(1e-6))?,
        max_iter,
        seed,
        snapshots,
        id,
    };
    case.validate()?;
    Ok(case)
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("`{v}` is not a finite number")))
}

fn numbers(v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(parse_f64).collect()
}

fn parse_geometry(v: &str) -> Result<GeometrySpec> {
    let mut words = v.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest = numbers(&words.collect::<Vec<_>>().join(" "))?;
    match (kind, &rest[..]) {
        ("b1", []) => Ok(GeometrySpec::b1()),
        ("b2", []) => Ok(GeometrySpec::b2()),
        ("c", []) => Ok(GeometrySpec::couette()),
        ("cs", []) => Ok(GeometrySpec::couette_small()),
        ("backstep", &[wi, li, wo, lo]) => Ok(GeometrySpec::back_step((wi, li), (wo, lo))),
        ("annulus", &[ri, ro]) => Ok(GeometrySpec::annulus(ri, ro)),
        _ => config(format!(
            "unknown geometry `{v}` (b1, b2, c, cs, backstep <w_in> <l_in> <w_out> <l_out>, annulus <r_in> <r_out>)"
        )),
    }
}

fn parse_obstacle(v: &str) -> Result<Option<Obstacle>> {
    let mut words = v.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest = numbers(&words.collect::<Vec<_>>().join(" "))?;
    match (kind, &rest[..]) {
        ("none", []) => Ok(None),
        ("circle", &[x, y, radius]) => Ok(Some(Obstacle { shape: ObstacleShape::Circle { radius }, center: [x, y] })),
        ("ellipse", &[x, y, a, b]) => Ok(Some(Obstacle { shape: ObstacleShape::Ellipse { a, b }, center: [x, y] })),
        _ => config(format!("unknown obstacle `{v}` (none, circle <x> <y> <r>, ellipse <x> <y> <a> <b>)")),
    }
}

fn parse_transform(v: &str) -> Result<Transform> {
    let words: Vec<&str> = v.split_whitespace().collect();
    match words[..] {
        ["identity"] => Ok(Transform::Identity),
        ["mirror_x"] => Ok(Transform::MirrorX),
        ["rotate90"] => Ok(Transform::Rotate90Ccw),
        ["scale", s] => Ok(Transform::Scale(parse_f64(s)?)),
        _ => config(format!("unknown transform `{v}` (identity, mirror_x, rotate90, scale <s>)")),
    }
}

fn geometry_text(g: &GeometrySpec) -> String {
    let base = GeometrySpec { obstacle: None, transform: Transform::Identity, ..*g };
    for (name, spec) in [
        ("b1", GeometrySpec::b1()),
        ("b2", GeometrySpec::b2()),
        ("c", GeometrySpec::couette()),
        ("cs", GeometrySpec::couette_small()),
    ] {
        if base == spec {
            return name.to_string();
        }
    }
    match g.kind {
        GeometryKind::BackStep { inflow_width, inflow_length, outflow_width, outflow_length } => {
            format!("backstep {inflow_width} {inflow_length} {outflow_width} {outflow_length}")
        }
        GeometryKind::Annulus { inner_radius, outer_radius } => format!("annulus {inner_radius} {outer_radius}"),
    }
}

fn obstacle_text(o: &Obstacle) -> String {
    match o.shape {
        ObstacleShape::Circle { radius } => format!("circle {} {} {radius}", o.center[0], o.center[1]),
        ObstacleShape::Ellipse { a, b } => format!("ellipse {} {} {a} {b}", o.center[0], o.center[1]),
    }
}

fn transform_text(t: Transform) -> String {
    match t {
        Transform::Identity => "identity".into(),
        Transform::MirrorX => "mirror_x".into(),
        Transform::Rotate90Ccw => "rotate90".into(),
        Transform::Scale(s) => format!("scale {s}"),
    }
}
