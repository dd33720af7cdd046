use std::ffi::{CStr, CString};
use std::ptr;

use ptcflow_ffi::*;

const SUITE: &str = "[suite]\nname = t\nstrategies = iter\n\n[case tiny]\ngeometry = backstep 0.05 0.03 0.08 0.05\nh_max = 0.02\nvelocity = 0.001\n";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ptc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny() -> *mut PtcProblem {
    let mut p = ptr::null_mut();
    let st = unsafe { ptc_problem_from_config(c(SUITE).as_ptr(), c("tiny").as_ptr(), &mut p) };
    assert_eq!(st, PtcStatus::Ok);
    p
}

#[test]
fn schedule_matches_the_library() {
    let mut v = 0.0;
    for n in [1, 10, 21, 60] {
        assert_eq!(unsafe { ptc_cfl_iter(n, &mut v) }, PtcStatus::Ok);
        assert_eq!(v, ptcflow::ptc::cfl_iter(n).unwrap());
    }
    assert_eq!(unsafe { ptc_cfl_iter(0, &mut v) }, PtcStatus::Config);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { ptc_cfl_iter(1, ptr::null_mut()) }, PtcStatus::NullArgument);
    // a successful call clears the message
    assert_eq!(unsafe { ptc_cfl_iter(1, &mut v) }, PtcStatus::Ok);
    assert!(ptc_last_error().is_null());
}

#[test]
fn solve_and_read_back() {
    let p = tiny();
    let ne = unsafe { ptc_problem_num_elements(p) };
    let nd = unsafe { ptc_problem_num_dofs(p) };
    assert!(ne > 0 && nd > 0);

    let mut opts = ptc_solve_options_default();
    assert_eq!(unsafe { ptc_problem_solve_options(p, &mut opts) }, PtcStatus::Ok);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ptc_solve(p, c("iter").as_ptr(), ptr::null(), opts, &mut r) }, PtcStatus::Ok);
    assert!(unsafe { ptc_report_converged(r) });
    let it = unsafe { ptc_report_iterations(r) };

    let mut needed = 0;
    assert_eq!(unsafe { ptc_report_residuals(r, ptr::null_mut(), 0, &mut needed) }, PtcStatus::BufferTooSmall);
    assert_eq!(needed, it + 1);
    let mut res = vec![0.0; needed];
    assert_eq!(unsafe { ptc_report_residuals(r, res.as_mut_ptr(), res.len(), ptr::null_mut()) }, PtcStatus::Ok);
    assert!(res[it] <= opts.tol * res[0]);

    let mut state = vec![0.0; nd];
    assert_eq!(unsafe { ptc_report_state(r, state.as_mut_ptr(), nd, &mut needed) }, PtcStatus::Ok);
    assert_eq!(needed, nd);
    assert!(state.iter().all(|v| v.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let path = c(csv.to_str().unwrap());
    assert_eq!(unsafe { ptc_report_write_csv(r, path.as_ptr()) }, PtcStatus::Ok);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("iter,residual"));

    unsafe {
        ptc_report_free(r);
        ptc_problem_free(p);
    }
}

#[test]
fn errors_map_to_codes() {
    let mut p = ptr::null_mut();
    let st = unsafe { ptc_problem_from_config(c(SUITE).as_ptr(), c("missing").as_ptr(), &mut p) };
    assert_eq!(st, PtcStatus::Config);
    assert!(last_error().contains("missing"));
    assert!(p.is_null());

    let st = unsafe { ptc_problem_from_preset(c("nope").as_ptr(), c("x").as_ptr(), &mut p) };
    assert_eq!(st, PtcStatus::Config);
    let st = unsafe { ptc_problem_from_config(ptr::null(), c("x").as_ptr(), &mut p) };
    assert_eq!(st, PtcStatus::NullArgument);
    let bad = [0xffu8, 0xfe, 0];
    let st = unsafe { ptc_problem_from_config(bad.as_ptr().cast(), c("x").as_ptr(), &mut p) };
    assert_eq!(st, PtcStatus::InvalidString);

    let p = tiny();
    let mut r = ptr::null_mut();
    let opts = ptc_solve_options_default();
    // nn without a model, unknown strategy, bad tolerance
    assert_eq!(unsafe { ptc_solve(p, c("nn").as_ptr(), ptr::null(), opts, &mut r) }, PtcStatus::Config);
    assert_eq!(unsafe { ptc_solve(p, c("fast").as_ptr(), ptr::null(), opts, &mut r) }, PtcStatus::Config);
    let bad_opts = PtcSolveOptions { tol: 2.0, ..opts };
    assert_eq!(unsafe { ptc_solve(p, c("iter").as_ptr(), ptr::null(), bad_opts, &mut r) }, PtcStatus::Config);
    assert!(r.is_null());

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ptc_model_load(c("/nonexistent/model.txt").as_ptr(), &mut m) }, PtcStatus::Io);
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.txt");
    std::fs::write(&junk, "not a model\n").unwrap();
    assert_eq!(unsafe { ptc_model_load(c(junk.to_str().unwrap()).as_ptr(), &mut m) }, PtcStatus::Format);

    unsafe {
        ptc_problem_free(p);
        // null handles are ignored
        ptc_problem_free(ptr::null_mut());
        ptc_report_free(ptr::null_mut());
        ptc_model_free(ptr::null_mut());
        assert_eq!(ptc_problem_num_elements(ptr::null()), 0);
        assert!(!ptc_report_converged(ptr::null()));
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ptcflow.h")).unwrap();
    for name in [
        "ptc_last_error",
        "ptc_problem_from_config",
        "ptc_problem_from_preset",
        "ptc_solve",
        "ptc_report_residuals",
        "ptc_model_load",
        "PTC_STATUS_BUFFER_TOO_SMALL",
        "typedef struct PtcProblem PtcProblem",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
