//! Running a suite and writing its tables.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{StrategyKind, SuiteConfig};
use super::plot::{convergence_plot, scatter_plot, Series};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::ptc::{solve_nonlinear, SolveReport};

/// Environment variable holding the number of concurrent runs.
pub const WORKERS_ENV: &str = "PTCFLOW_WORKERS";

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Outcome of one (case, strategy) pair. `report` is `None` when the run
/// could not be set up (e.g. meshing failed); `error` says why.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub case_id: String,
    pub family: String,
    pub strategy: StrategyKind,
    pub elements: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.converged)
    }

    /// Steps taken if converged, `max_iter` otherwise.
    pub fn iterations(&self) -> usize {
        self.report.as_ref().map_or(self.max_iter, |r| r.effective_iterations(self.max_iter))
    }
}

/// One row of the suite summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub case_id: String,
    pub family: String,
    /// `(strategy, iterations, converged)` in suite strategy order; `None`
    /// where the case does not list the strategy.
    pub results: Vec<(StrategyKind, Option<(usize, bool)>)>,
    /// Converged strategies with the fewest iterations; empty if none
    /// converged.
    pub winners: Vec<StrategyKind>,
}

impl ComparisonRow {
    fn from_runs(runs: &[&RunRecord], strategies: &[StrategyKind]) -> Self {
        let results: Vec<(StrategyKind, Option<(usize, bool)>)> = strategies
            .iter()
            .map(|&s| (s, runs.iter().find(|r| r.strategy == s).map(|r| (r.iterations(), r.converged()))))
            .collect();
        let best = results.iter().filter_map(|(_, r)| r.filter(|r| r.1).map(|r| r.0)).min();
        let winners = results
            .iter()
            .filter(|(_, r)| matches!((r, best), (Some((n, true)), Some(b)) if *n == b))
            .map(|(s, _)| *s)
            .collect();
        Self { case_id: runs[0].case_id.clone(), family: runs[0].family.clone(), results, winners }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub strategies: Vec<StrategyKind>,
    pub runs: Vec<RunRecord>,
    pub rows: Vec<ComparisonRow>,
}

impl SuiteResult {
    /// Number of runs that could not be executed at all.
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.report.is_none()).count()
    }

    pub fn from_runs(strategies: Vec<StrategyKind>, runs: Vec<RunRecord>) -> Self {
        let mut order: Vec<&str> = Vec::new();
        for r in &runs {
            if !order.contains(&r.case_id.as_str()) {
                order.push(&r.case_id);
            }
        }
        let rows = order
            .iter()
            .map(|id| {
                let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.case_id == *id).collect();
                ComparisonRow::from_runs(&mine, &strategies)
            })
            .collect();
        Self { strategies, runs, rows }
    }

    /// Mean iterations (non-converged counted as `max_iter`) and
    /// converged/total counts per family and strategy.
    pub fn means(&self) -> Vec<FamilyMean> {
        let mut acc: BTreeMap<(String, StrategyKind), (usize, usize, usize)> = BTreeMap::new();
        for r in &self.runs {
            let e = acc.entry((r.family.clone(), r.strategy)).or_default();
            e.0 += r.iterations();
            e.1 += r.converged() as usize;
            e.2 += 1;
        }
        acc.into_iter()
            .map(|((family, strategy), (sum, converged, total))| FamilyMean {
                family,
                strategy,
                mean_iterations: sum as f64 / total as f64,
                converged,
                total,
            })
            .collect()
    }

    /// `case_id,family,<s>_iterations,<s>_converged,...,winner`; ties in the
    /// winner column are joined with `|`.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["case_id".to_string(), "family".to_string()];
        for s in &self.strategies {
            header.push(format!("{}_iterations", s.name()));
            header.push(format!("{}_converged", s.name()));
        }
        header.push("winner".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = vec![row.case_id.clone(), row.family.clone()];
            for (_, r) in &row.results {
                match r {
                    Some((n, c)) => {
                        fields.push(n.to_string());
                        fields.push(c.to_string());
                    }
                    None => fields.extend([String::new(), String::new()]),
                }
            }
            fields.push(row.winners.iter().map(|s| s.name()).collect::<Vec<_>>().join("|"));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn write_means<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "family,strategy,mean_iterations,converged,not_converged,total")?;
        for m in self.means() {
            writeln!(
                out,
                "{},{},{:.4},{},{},{}",
                m.family,
                m.strategy.name(),
                m.mean_iterations,
                m.converged,
                m.total - m.converged,
                m.total
            )?;
        }
        Ok(())
    }

    /// `case_id,family,strategy,elements,tol,max_iter,status,file` — enough,
    /// together with the per-run CSVs, to rebuild the summary.
    pub fn write_index<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "case_id,family,strategy,elements,tol,max_iter,status,file")?;
        for r in &self.runs {
            let status = match (&r.report, &r.error) {
                (Some(rep), _) if rep.converged => "converged".to_string(),
                (Some(rep), _) => match &rep.failure {
                    Some(f) => format!("stopped: {}", f.replace(',', ";")),
                    None => "iteration limit".to_string(),
                },
                (None, e) => format!("error: {}", e.as_deref().unwrap_or("").replace(',', ";")),
            };
            let file = if r.report.is_some() { run_file(r) } else { String::new() };
            writeln!(
                out,
                "{},{},{},{},{:e},{},{},{}",
                r.case_id,
                r.family,
                r.strategy.name(),
                r.elements,
                r.tol,
                r.max_iter,
                status,
                file
            )?;
        }
        Ok(())
    }

    /// Writes the tables and the plots; see [`Self::write_tables`] and
    /// [`Self::write_plots`].
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        self.write_tables(dir)?;
        self.write_plots(&dir.join("plots"))
    }

    /// `summary.csv`, `means.csv`, `runs/index.csv` and one CSV per run
    /// under `runs/`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("runs"))?;
        self.write_summary(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
        self.write_means(BufWriter::new(File::create(dir.join("means.csv"))?))?;
        self.write_index(BufWriter::new(File::create(dir.join("runs").join("index.csv"))?))?;
        for r in &self.runs {
            if let Some(rep) = &r.report {
                rep.write_csv(BufWriter::new(File::create(dir.join("runs").join(run_file(r)))?))?;
            }
        }
        Ok(())
    }

    /// An ordered iteration scatter per family (`<family>.svg`) and a
    /// residual history plot per case (`convergence_<case>.svg`).
    pub fn write_plots(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;

        let means = self.means();
        let families: Vec<String> = {
            let mut f: Vec<String> = self.rows.iter().map(|r| r.family.clone()).collect();
            f.sort();
            f.dedup();
            f
        };
        for family in families {
            let series: Vec<(String, Vec<usize>, f64)> = self
                .strategies
                .iter()
                .filter_map(|&s| {
                    // each strategy's runs ordered from fewest to most iterations
                    let mut its: Vec<usize> = self
                        .runs
                        .iter()
                        .filter(|r| r.family == family && r.strategy == s)
                        .map(RunRecord::iterations)
                        .collect();
                    its.sort_unstable();
                    let mean = means.iter().find(|m| m.family == family && m.strategy == s)?.mean_iterations;
                    Some((s.name().to_string(), its, mean))
                })
                .collect();
            let svg = scatter_plot(&format!("{family}: nonlinear iterations per configuration"), &series)?;
            fs::write(dir.join(format!("{family}.svg")), svg)?;
        }
        for row in &self.rows {
            let series: Vec<Series> = self
                .runs
                .iter()
                .filter(|r| r.case_id == row.case_id)
                .filter_map(|r| r.report.as_ref().map(|rep| (r.strategy.name().to_string(), rep.residual_history())))
                .collect();
            if series.is_empty() {
                continue;
            }
            let svg = convergence_plot(&row.case_id, &series)?;
            fs::write(dir.join(format!("convergence_{}.svg", row.case_id)), svg)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMean {
    pub family: String,
    pub strategy: StrategyKind,
    pub mean_iterations: f64,
    pub converged: usize,
    pub total: usize,
}

fn run_file(r: &RunRecord) -> String {
    format!("{}__{}.csv", r.case_id, r.strategy.name())
}

/// Runs every (case, strategy) pair with at most `workers` runs at a time.
/// Problems are set up once per case; set-up failures are recorded against
/// each of the case's strategies and the suite carries on.
pub fn run_suite(suite: &SuiteConfig, model: Option<Arc<Model>>, workers: usize) -> Result<SuiteResult> {
    suite.validate()?;
    let strategies = suite.strategies();
    if strategies.contains(&StrategyKind::Learned) && model.is_none() {
        return Err(Error::Config("strategy `nn` is listed but no model was loaded".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let runs = pool.install(|| {
        let problems: Vec<_> = suite.cases.par_iter().map(|c| c.problem()).collect();
        let jobs: Vec<(usize, StrategyKind)> = suite
            .cases
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.strategies.iter().map(move |&s| (i, s)))
            .collect();
        jobs.par_iter()
            .map(|&(i, kind)| {
                let case = &suite.cases[i];
                let mut rec = RunRecord {
                    case_id: case.id.clone(),
                    family: case.family.clone(),
                    strategy: kind,
                    elements: 0,
                    tol: case.tol,
                    max_iter: case.max_iter,
                    report: None,
                    error: None,
                };
                let problem = match &problems[i] {
                    Ok(p) => p,
                    Err(e) => {
                        rec.error = Some(e.to_string());
                        return rec;
                    }
                };
                rec.elements = problem.mesh().num_elements();
                match kind.strategy(model.as_ref()) {
                    Ok(s) => rec.report = Some(solve_nonlinear(problem, &s, &case.solve_options())),
                    Err(e) => rec.error = Some(e.to_string()),
                }
                rec
            })
            .collect::<Vec<_>>()
    });
    Ok(SuiteResult::from_runs(strategies, runs))
}

/// Reads a per-run CSV back into `(iter, residual)` pairs.
pub fn read_history_csv<R: BufRead>(input: R) -> Result<Vec<(usize, f64)>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if !header.starts_with("iter,residual") {
        return Err(Error::Format(format!("not a run history (header `{header}`)")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut fields = line.split(',');
        let parse_err = || Error::Format(format!("run history row {}: `{line}`", i + 1));
        let iter = fields.next().and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
        let res = fields.next().and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
        out.push((iter, res));
    }
    Ok(out)
}

/// Rebuilds the summary table from `runs/index.csv` and the per-run CSVs
/// alone: a run converged iff its last residual is within `tol` of the
/// first.
pub fn summary_from_runs(dir: &Path) -> Result<SuiteResult> {
    let index = BufReader::new(File::open(dir.join("runs").join("index.csv"))?);
    let mut runs = Vec::new();
    let mut strategies = Vec::new();
    for (i, line) in index.lines().enumerate().skip(1) {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Format(format!("index row {i}: expected 8 fields")));
        }
        let strategy = StrategyKind::parse(f[2])?;
        if !strategies.contains(&strategy) {
            strategies.push(strategy);
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("index row {i}: bad number `{s}`")));
        let tol = num(f[4])?;
        let max_iter = f[5].parse().map_err(|_| Error::Format(format!("index row {i}: bad max_iter")))?;
        let report = if f[7].is_empty() {
            None
        } else {
            let hist = read_history_csv(BufReader::new(File::open(dir.join("runs").join(f[7]))?))?;
            let (first, last) = match (hist.first(), hist.last()) {
                (Some(a), Some(b)) => (a.1, *b),
                _ => return Err(Error::Format(format!("{}: empty history", f[7]))),
            };
            let mut rep = SolveReport::from_history(f[2], &hist);
            rep.converged = last.1 <= tol * first;
            Some(rep)
        };
        runs.push(RunRecord {
            case_id: f[0].to_string(),
            family: f[1].to_string(),
            strategy,
            elements: f[3].parse().unwrap_or(0),
            tol,
            max_iter,
            error: report.is_none().then(|| f[6].to_string()),
            report,
        });
    }
    Ok(SuiteResult::from_runs(strategies, runs))
}
