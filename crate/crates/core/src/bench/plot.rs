//! Minimal SVG charts: per-family iteration scatter and residual histories.

use std::fmt::Write;

use crate::error::{Error, Result};

/// A named residual history.
pub type Series = (String, Vec<f64>);

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, y0, x1, y1) = (LEFT, TOP, W - RIGHT, H - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    s
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#, y - 10.0, COLORS[i % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(name));
    }
}

/// Iterations per configuration for each strategy, with a dashed line at
/// each strategy's mean. `series` holds `(name, iterations, mean)`.
pub fn scatter_plot(title: &str, series: &[(String, Vec<usize>, f64)]) -> Result<String> {
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0);
    if n == 0 {
        return Err(Error::Config("scatter plot needs at least one point".into()));
    }
    let ymax = series.iter().flat_map(|s| s.1.iter().copied()).max().unwrap_or(1).max(1) as f64 * 1.05;
    let px = |i: usize| LEFT + (W - RIGHT - LEFT) * (i as f64 + 0.5) / n as f64;
    let py = |v: f64| H - BOTTOM - (H - BOTTOM - TOP) * v / ymax;

    let mut s = frame(title, "configuration", "nonlinear iterations");
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.0}</text>"#, LEFT - 6.0, py(v) + 4.0, v);
    }
    for (k, (_, its, mean)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        for (i, &v) in its.iter().enumerate() {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{c}"/>"#, px(i), py(v as f64));
        }
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="{c}" stroke-dasharray="6 4"/>"#,
            W - RIGHT,
            y = py(*mean)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.0.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Residual norm against iteration on a log axis, one polyline per series.
pub fn convergence_plot(title: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Config("convergence plot needs at least one series".into()));
    }
    if let Some((name, _)) = series.iter().find(|s| s.1.is_empty()) {
        return Err(Error::Config(format!("series `{name}` has an empty history")));
    }
    let positive = series.iter().flat_map(|s| s.1.iter().copied()).filter(|v| v.is_finite() && *v > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if hi > 0.0 { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) } else { (0.0, 1.0) };
    let nmax = series.iter().map(|s| s.1.len()).max().unwrap_or(1).saturating_sub(1).max(1) as f64;
    let px = |i: usize| LEFT + (W - RIGHT - LEFT) * i as f64 / nmax;
    let py = |v: f64| {
        let l = if v > 0.0 && v.is_finite() { v.log10().clamp(lo, hi) } else { lo };
        H - BOTTOM - (H - BOTTOM - TOP) * (l - lo) / (hi - lo)
    };

    let mut s = frame(title, "iteration", "residual norm");
    let mut e = lo as i32;
    while e as f64 <= hi {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{e}</text>"#, LEFT - 6.0, py(10f64.powi(e)) + 4.0);
        e += 1;
    }
    for (k, (_, hist)) in series.iter().enumerate() {
        let pts: Vec<String> = hist.iter().enumerate().map(|(i, &v)| format!("{:.1},{:.1}", px(i), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            COLORS[k % COLORS.len()]
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.0.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    Ok(s)
}
