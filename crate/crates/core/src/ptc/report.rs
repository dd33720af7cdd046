//! Convergence records of a nonlinear solve.

use std::io::Write;
use std::time::Duration;

use crate::error::Result;

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Residual norm after this iteration.
    pub residual: f64,
    /// Global CFL number, for strategies that use one.
    pub global_cfl: Option<f64>,
    /// Smallest and largest local time step, for pseudo-transient steps.
    pub dt_range: Option<(f64, f64)>,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub(super) fn initial(residual: f64, elapsed: Duration) -> Self {
        Self { iter: 0, residual, global_cfl: None, dt_range: None, wall_ms: elapsed.as_secs_f64() * 1e3 }
    }
}

/// Result of [`solve_nonlinear`](super::solve_nonlinear).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub strategy: String,
    pub converged: bool,
    /// Steps taken; `records.len() == iterations + 1`.
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub final_state: Vec<f64>,
    /// Seconds.
    pub wall_time: f64,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl SolveReport {
    pub(super) fn new(strategy: &str, state: Vec<f64>) -> Self {
        Self {
            strategy: strategy.to_string(),
            converged: false,
            iterations: 0,
            records: Vec::new(),
            final_state: state,
            wall_time: 0.0,
            failure: None,
        }
    }

    pub(super) fn push(&mut self, rec: IterationRecord) {
        self.iterations = rec.iter;
        self.records.push(rec);
    }

    /// A report carrying only a residual history, as read back from a run
    /// CSV. `converged` is left false for the caller to decide.
    pub fn from_history(strategy: &str, history: &[(usize, f64)]) -> Self {
        let mut rep = Self::new(strategy, Vec::new());
        for &(iter, residual) in history {
            rep.push(IterationRecord { iter, residual, global_cfl: None, dt_range: None, wall_ms: 0.0 });
        }
        rep
    }

    pub fn residual_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn cfl_history(&self) -> Vec<Option<f64>> {
        self.records.iter().skip(1).map(|r| r.global_cfl).collect()
    }

    pub fn initial_residual(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.residual)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    /// Iteration count for comparisons: `max_iter` when not converged.
    pub fn effective_iterations(&self, max_iter: usize) -> usize {
        if self.converged {
            self.iterations
        } else {
            max_iter
        }
    }

    /// `iter,residual,global_cfl,min_dt,max_dt,wall_ms`, one row per record;
    /// fields that do not apply are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,residual,global_cfl,min_dt,max_dt,wall_ms")?;
        for r in &self.records {
            let cfl = r.global_cfl.map(|c| format!("{c:e}")).unwrap_or_default();
            let (lo, hi) = r
                .dt_range
                .map(|(a, b)| (format!("{a:e}"), format!("{b:e}")))
                .unwrap_or_default();
            writeln!(out, "{},{:e},{},{},{},{:.3}", r.iter, r.residual, cfl, lo, hi, r.wall_ms)?;
        }
        Ok(())
    }
}
