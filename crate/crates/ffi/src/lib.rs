//! C ABI for the ptcflow solver.
//!
//! Objects cross the boundary as opaque handles: create them with a
//! `*_from_*`/`*_load` function, release them with the matching `*_free`.
//! Every fallible call returns a [`PtcStatus`]; on failure a description
//! is kept per thread and can be read with [`ptc_last_error`]. Panics never
//! unwind into the caller; they are reported as [`PtcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use ptcflow::bench::{preset, ExperimentConfig, StrategyKind, SuiteConfig};
use ptcflow::fem::Problem;
use ptcflow::nn::Model;
use ptcflow::ptc::{cfl_iter, solve_nonlinear, SolveOptions, SolveReport};
use ptcflow::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidString = 2,
    /// Invalid configuration, unknown name or out-of-range parameter.
    Config = 3,
    /// Singular matrix, non-finite values or another numerical failure.
    Numeric = 4,
    /// File could not be read or written.
    Io = 5,
    /// Malformed file contents.
    Format = 6,
    /// The output buffer is shorter than the data; the required length was
    /// stored.
    BufferTooSmall = 7,
    /// An internal panic was caught.
    Panic = 8,
}

/// A meshed case ready to solve.
pub struct PtcProblem {
    case: ExperimentConfig,
    problem: Problem,
}

/// A trained step-size model for the `nn` strategy.
pub struct PtcModel {
    model: Arc<Model>,
}

/// The outcome of one solve.
pub struct PtcReport {
    report: SolveReport,
}

/// Stopping rule of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PtcSolveOptions {
    /// Relative residual reduction at which the solve counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PtcStatus, msg: impl Into<String>) -> PtcStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> PtcStatus {
    let status = match &e {
        Error::Config(_) | Error::Domain(_) | Error::InvalidElement(_) | Error::EmptyDataset(_) => PtcStatus::Config,
        Error::Numeric(_) | Error::Singular { .. } | Error::Dimension { .. } | Error::OracleUnavailable(_) => {
            PtcStatus::Numeric
        }
        Error::Format(_) => PtcStatus::Format,
        Error::Io(_) => PtcStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PtcStatus>) -> PtcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtcStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PtcStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PtcStatus>;
}

impl<T> OrStatus<T> for ptcflow::Result<T> {
    fn or_status(self) -> Result<T, PtcStatus> {
        self.map_err(from_error)
    }
}

unsafe fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, PtcStatus> {
    if s.is_null() {
        return Err(fail(PtcStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(PtcStatus::InvalidString, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, PtcStatus> {
    p.as_ref().ok_or_else(|| fail(PtcStatus::NullArgument, format!("`{name}` is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), PtcStatus> {
    if p.is_null() {
        Err(fail(PtcStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

fn build_problem(suite: &SuiteConfig, case_id: &str) -> Result<Box<PtcProblem>, PtcStatus> {
    let case = suite
        .cases
        .iter()
        .find(|c| c.id == case_id)
        .ok_or_else(|| fail(PtcStatus::Config, format!("no case `{case_id}` in suite `{}`", suite.name)))?
        .clone();
    let problem = case.problem().or_status()?;
    Ok(Box::new(PtcProblem { case, problem }))
}

/// Copies `src` into `buf[..len]`, storing the full length in `needed`.
unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), PtcStatus> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        return Err(fail(PtcStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    if !src.is_empty() {
        out_arg(buf, "buf")?;
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ptc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ptc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The iteration-count CFL schedule at step `n` (1-based).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_cfl_iter(n: usize, out: *mut f64) -> PtcStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = cfl_iter(n).or_status()?;
        Ok(())
    })
}

/// Defaults: `tol = 1e-6`, `max_iter = 100`.
#[no_mangle]
pub extern "C" fn ptc_solve_options_default() -> PtcSolveOptions {
    let d = SolveOptions::default();
    PtcSolveOptions { tol: d.tol, max_iter: d.max_iter }
}

/// Meshes case `case_id` of a built-in suite (`desk`, `full`, `desk-data`).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_from_preset(
    preset_name: *const c_char,
    case_id: *const c_char,
    out: *mut *mut PtcProblem,
) -> PtcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let name = str_arg(preset_name, "preset_name")?;
        let id = str_arg(case_id, "case_id")?;
        let suite = preset(name).ok_or_else(|| fail(PtcStatus::Config, format!("unknown preset `{name}`")))?;
        *out = Box::into_raw(build_problem(&suite, id)?);
        Ok(())
    })
}

/// Meshes case `case_id` of a suite given as configuration text (the
/// format read by `ptcflow bench --config`).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_from_config(
    config_text: *const c_char,
    case_id: *const c_char,
    out: *mut *mut PtcProblem,
) -> PtcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(config_text, "config_text")?;
        let id = str_arg(case_id, "case_id")?;
        let suite = SuiteConfig::parse(text).or_status()?;
        *out = Box::into_raw(build_problem(&suite, id)?);
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards; null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_free(problem: *mut PtcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of triangles, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_num_elements(problem: *const PtcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.mesh().num_elements())
}

/// Unknowns `(u, v, p)` per vertex, interleaved; 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_num_dofs(problem: *const PtcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.num_dofs())
}

/// The case's own stopping rule.
///
/// # Safety
/// `problem` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_problem_solve_options(problem: *const PtcProblem, out: *mut PtcSolveOptions) -> PtcStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        out_arg(out, "out")?;
        *out = PtcSolveOptions { tol: p.case.tol, max_iter: p.case.max_iter };
        Ok(())
    })
}

/// Loads a model file written by `ptcflow train`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_model_load(path: *const c_char, out: *mut *mut PtcModel) -> PtcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let file = File::open(path).map_err(|e| fail(PtcStatus::Io, format!("{path}: {e}")))?;
        let model = Model::load(BufReader::new(file)).or_status()?;
        *out = Box::into_raw(Box::new(PtcModel { model: Arc::new(model) }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ptc_model_free(model: *mut PtcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features the model expects.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptc_model_input_dim(model: *const PtcModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.input_dim())
}

/// Time step predicted for one raw feature vector, before clipping.
///
/// # Safety
/// `features` must point to `len` readable values; `out` must be valid for
/// a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_model_predict_dt(
    model: *const PtcModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> PtcStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        out_arg(out, "out")?;
        if len > 0 {
            ref_arg(features, "features")?;
        }
        let x = if len == 0 { &[][..] } else { std::slice::from_raw_parts(features, len) };
        *out = m.model.predict_dt(x).or_status()?;
        Ok(())
    })
}

/// Solves `problem` with `strategy` (`iter`, `err`, `nn`, `nc`, `an`).
/// `model` is required for `nn` and ignored otherwise. Non-convergence is a
/// successful call; inspect the report.
///
/// # Safety
/// Handles must be live (`model` may be null); `strategy` must be
/// NUL-terminated; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ptc_solve(
    problem: *const PtcProblem,
    strategy: *const c_char,
    model: *const PtcModel,
    options: PtcSolveOptions,
    out: *mut *mut PtcReport,
) -> PtcStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        out_arg(out, "out")?;
        let kind = StrategyKind::parse(str_arg(strategy, "strategy")?).or_status()?;
        let model = model.as_ref().map(|m| m.model.clone());
        let strategy = kind.strategy(model.as_ref()).or_status()?;
        if !(options.tol > 0.0 && options.tol < 1.0) || options.max_iter == 0 {
            return Err(fail(PtcStatus::Config, "need 0 < tol < 1 and max_iter >= 1"));
        }
        let opts = SolveOptions { tol: options.tol, max_iter: options.max_iter, ..Default::default() };
        let report = solve_nonlinear(&p.problem, &strategy, &opts);
        *out = Box::into_raw(Box::new(PtcReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_free(report: *mut PtcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_converged(report: *const PtcReport) -> bool {
    report.as_ref().is_some_and(|r| r.report.converged)
}

/// Steps taken.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_iterations(report: *const PtcReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.iterations)
}

/// Residual norms, initial one first (`iterations + 1` values). With
/// `len` too small nothing is copied, `BUFFER_TOO_SMALL` is returned and
/// the required length is stored in `needed` (if not null).
///
/// # Safety
/// `buf` must be writable for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_residuals(
    report: *const PtcReport,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> PtcStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        copy_out(&r.report.residual_history(), buf, len, needed)
    })
}

/// Final iterate, `(u, v, p)` interleaved per vertex. Buffer handling as in
/// [`ptc_report_residuals`].
///
/// # Safety
/// `buf` must be writable for `len` values; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_state(
    report: *const PtcReport,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> PtcStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        copy_out(&r.report.final_state, buf, len, needed)
    })
}

/// Writes the convergence history as CSV.
///
/// # Safety
/// `report` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ptc_report_write_csv(report: *const PtcReport, path: *const c_char) -> PtcStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let path = str_arg(path, "path")?;
        let file = File::create(path).map_err(|e| fail(PtcStatus::Io, format!("{path}: {e}")))?;
        r.report.write_csv(BufWriter::new(file)).or_status()
    })
}
