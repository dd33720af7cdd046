use std::path::PathBuf;

use super::config::{ExperimentConfig, StrategyKind, SuiteConfig};
use super::plot::{convergence_plot, scatter_plot};
use super::presets::{desk, desk_data, full, preset};
use super::suite::{run_suite, summary_from_runs, RunRecord, SuiteResult};
use crate::fem::FluidProps;
use crate::mesh::GeometrySpec;
use crate::ptc::SolveReport;

fn tiny_case(id: &str, velocity: f64) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        family: "C".into(),
        geometry: GeometrySpec::couette(),
        h_max: 0.05,
        velocity,
        velocity_range: None,
        props: FluidProps::default(),
        strategies: vec![StrategyKind::Iter, StrategyKind::NewtonAdaptive],
        tol: 1e-6,
        max_iter: 60,
        seed: 0,
        snapshots: Vec::new(),
    }
}

fn tiny_suite(output: PathBuf) -> SuiteConfig {
    SuiteConfig { name: "tiny".into(), output, model: None, cases: vec![tiny_case("a", 0.02), tiny_case("b", 0.03)] }
}

fn record(case: &str, strategy: StrategyKind, iterations: usize, converged: bool) -> RunRecord {
    let hist: Vec<(usize, f64)> = (0..=iterations).map(|i| (i, 10f64.powi(-(i as i32)))).collect();
    let mut rep = SolveReport::from_history(strategy.name(), &hist);
    rep.converged = converged;
    RunRecord {
        case_id: case.into(),
        family: "F".into(),
        strategy,
        elements: 10,
        tol: 1e-6,
        max_iter: 100,
        report: Some(rep),
        error: None,
    }
}

#[test]
fn presets_validate() {
    for s in [desk(), full(), desk_data()] {
        s.validate().unwrap();
    }
    assert_eq!(desk().cases.len(), 15);
    assert!(preset("nope").is_none());
    let b1 = full().cases.iter().filter(|c| c.family == "B1").count();
    assert_eq!(b1, 24);
}

#[test]
fn presets_round_trip_through_text() {
    for s in [desk(), desk_data()] {
        let back = SuiteConfig::parse(&s.to_text()).unwrap();
        assert_eq!(back.to_text(), s.to_text());
        assert_eq!(back.cases.len(), s.cases.len());
    }
}

#[test]
fn ties_and_non_convergence_in_summary() {
    use StrategyKind::*;
    let runs = vec![
        record("x", Iter, 12, true),
        record("x", Err, 12, true),
        record("x", NewtonAdaptive, 5, false),
        record("y", Iter, 30, false),
        record("y", Err, 40, false),
        record("y", NewtonAdaptive, 9, false),
    ];
    let res = SuiteResult::from_runs(vec![Iter, Err, NewtonAdaptive], runs);
    let mut buf = Vec::new();
    res.write_summary(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "case_id,family,iter_iterations,iter_converged,err_iterations,err_converged,an_iterations,an_converged,winner");
    assert_eq!(lines[1], "x,F,12,true,12,true,100,false,iter|err");
    assert_eq!(lines[2], "y,F,100,false,100,false,100,false,");

    let means = res.means();
    let an = means.iter().find(|m| m.strategy == NewtonAdaptive).unwrap();
    assert_eq!((an.mean_iterations, an.converged, an.total), (100.0, 0, 2));
    let it = means.iter().find(|m| m.strategy == Iter).unwrap();
    assert_eq!(it.mean_iterations, 56.0);
}

#[test]
fn nn_requires_a_model() {
    let mut s = tiny_suite(PathBuf::from("unused"));
    s.cases[0].strategies.push(StrategyKind::Learned);
    assert!(s.validate().is_err());
    s.model = Some(PathBuf::from("m.txt"));
    assert!(run_suite(&s, None, 1).is_err());
}

#[test]
fn suite_artifacts_rebuild_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let suite = tiny_suite(dir.path().to_path_buf());
    let res = run_suite(&suite, None, 2).unwrap();
    assert_eq!(res.runs.len(), 4);
    assert_eq!(res.failed_runs(), 0);
    // plain Newton may stall on this annulus; the schedule converges
    assert!(res.runs.iter().filter(|r| r.strategy == StrategyKind::Iter).all(|r| r.converged()), "{:?}", res.rows);
    res.write_artifacts(dir.path()).unwrap();
    for f in ["summary.csv", "means.csv", "runs/index.csv", "runs/a__iter.csv", "plots/C.svg", "plots/convergence_a.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }

    let rebuilt = summary_from_runs(dir.path()).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    res.write_summary(&mut a).unwrap();
    rebuilt.write_summary(&mut b).unwrap();
    assert_eq!(String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
}

#[test]
fn setup_failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut suite = tiny_suite(dir.path().to_path_buf());
    suite.cases[1].h_max = 10.0; // too coarse to mesh the annulus
    let res = run_suite(&suite, None, 1).unwrap();
    assert_eq!(res.failed_runs(), 2);
    assert!(res.runs.iter().filter(|r| r.case_id == "b").all(|r| r.error.is_some()));
    assert_eq!(res.rows[1].winners, vec![]);
}

#[test]
fn plots_reject_empty_input() {
    assert!(convergence_plot("t", &[]).is_err());
    assert!(convergence_plot("t", &[("iter".into(), vec![])]).is_err());
    assert!(scatter_plot("t", &[]).is_err());
    let svg = convergence_plot("a<b", &[("iter".into(), vec![1.0, 1e-3, 1e-7])]).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("a&lt;b"));
    let svg = scatter_plot("F", &[("iter".into(), vec![10, 20], 15.0)]).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2);
}
