//! Training-set generation: baseline snapshots, optimal steps, patch
//! features, per-group balancing and the train/test/validation split.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{optimal_dt, reference_solution, velocity_l2, OracleOptions};
use crate::error::{Error, Result};
use crate::features::{Dataset, PatchContext, Provenance, Splits};
use crate::fem::Problem;
use crate::ptc::{cfl_iter, local_dts, ptc_step, solve_from, CflStrategy, SolveOptions};

/// One configuration to harvest samples from.
#[derive(Debug, Clone)]
pub struct TrainingCase {
    pub id: String,
    /// Balancing group, typically the mesh size.
    pub group: String,
    pub problem: Problem,
    /// Snapshot iterations, 1-based: `k` is the state the baseline run
    /// takes its `k`-th step from.
    pub snapshots: Vec<usize>,
}

/// Oracle outcome at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub case_id: String,
    pub iter: usize,
    /// Velocity L² distance to `v*` after the optimal step.
    pub optimal_distance: f64,
    /// Same for the step the iteration-count schedule takes.
    pub baseline_distance: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    /// `(id, group, elements)` of every case attempted.
    pub cases: Vec<(String, String, usize)>,
    /// `(id, reason)`; also used for individual snapshots that were skipped.
    pub skipped: Vec<(String, String)>,
    pub snapshots: Vec<SnapshotRecord>,
    /// Samples per group before balancing.
    pub group_counts: BTreeMap<String, usize>,
    pub balanced_per_group: usize,
}

impl Manifest {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed {}", self.seed)?;
        for (id, group, ne) in &self.cases {
            writeln!(out, "case {id} group={group} elements={ne}")?;
        }
        for (id, why) in &self.skipped {
            writeln!(out, "skipped {id}: {why}")?;
        }
        for s in &self.snapshots {
            writeln!(
                out,
                "snapshot {} iter={} optimal={:e} baseline={:e} evals={}",
                s.case_id, s.iter, s.optimal_distance, s.baseline_distance, s.evaluations
            )?;
        }
        for (g, n) in &self.group_counts {
            writeln!(out, "group {g} samples={n}")?;
        }
        writeln!(out, "balanced_per_group {}", self.balanced_per_group)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    /// Balanced samples before splitting.
    pub data: Dataset,
    pub splits: Splits,
    pub manifest: Manifest,
}

struct CaseOutput {
    group: String,
    data: Dataset,
    records: Vec<SnapshotRecord>,
    skipped: Vec<(String, String)>,
}

fn harvest(case: &TrainingCase, opts: &OracleOptions) -> Result<CaseOutput> {
    let p = &case.problem;
    let reference = reference_solution(p)?;
    let last = case.snapshots.iter().copied().max().unwrap_or(0);
    let mut snaps: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    let run = SolveOptions { max_iter: last, ..Default::default() };
    solve_from(p, &CflStrategy::IterSchedule, &run, p.initial_guess(), &mut |s| {
        if case.snapshots.contains(&(s.iter + 1)) {
            snaps.push((s.iter + 1, s.state.to_vec(), s.residual.to_vec()));
        }
    });

    let mut out = CaseOutput { group: case.group.clone(), data: Dataset::default(), records: Vec::new(), skipped: Vec::new() };
    for &n in &case.snapshots {
        let Some((_, x, r)) = snaps.iter().find(|s| s.0 == n) else {
            out.skipped.push((format!("{}@{n}", case.id), "baseline run ended before this iteration".into()));
            continue;
        };
        let opt = match optimal_dt(p, x, n, &reference, opts) {
            Ok(o) => o,
            Err(e) => {
                out.skipped.push((format!("{}@{n}", case.id), e.to_string()));
                continue;
            }
        };
        let base_dt = local_dts(p, x, cfl_iter(n)?);
        let (base_next, _) = ptc_step(p, x, r, &base_dt)?;
        let diff: Vec<f64> = base_next.iter().zip(&reference).map(|(a, b)| a - b).collect();
        out.records.push(SnapshotRecord {
            case_id: case.id.clone(),
            iter: n,
            optimal_distance: opt.distance,
            baseline_distance: velocity_l2(p.mesh(), &diff),
            evaluations: opt.evaluations,
        });
        let ctx = PatchContext::new(p, x, r)?;
        for (e, &dt) in opt.dt.iter().enumerate() {
            let prov = Provenance { config_id: case.id.clone(), iter: n, elem: e };
            out.data.push(ctx.patch(e)?.to_vec(), dt, prov);
        }
    }
    Ok(out)
}

/// Downsamples every group to the size of the smallest one (seeded,
/// uniformly without replacement, original order kept within a group).
pub fn balance_groups(groups: &BTreeMap<String, Dataset>, seed: u64) -> (Dataset, usize) {
    let m = groups.values().map(Dataset::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Dataset::default();
    for ds in groups.values() {
        let mut idx = sample(&mut rng, ds.len(), m).into_vec();
        idx.sort_unstable();
        out.extend(ds.subset(&idx));
    }
    (out, m)
}

/// Harvests every case (in parallel), balances by group and splits
/// 70/15/15. Cases whose reference solve fails are skipped and listed in
/// the manifest.
pub fn generate_dataset(cases: &[TrainingCase], seed: u64, opts: &OracleOptions) -> Result<GeneratedData> {
    if let Some(c) = cases.iter().find(|c| c.snapshots.contains(&0)) {
        return Err(Error::Config(format!("{}: snapshot iterations are 1-based", c.id)));
    }
    let results: Vec<Result<CaseOutput>> = cases.par_iter().map(|c| harvest(c, opts)).collect();
    let mut manifest = Manifest { seed, ..Default::default() };
    let mut groups: BTreeMap<String, Dataset> = BTreeMap::new();
    for (case, res) in cases.iter().zip(results) {
        manifest.cases.push((case.id.clone(), case.group.clone(), case.problem.mesh().num_elements()));
        match res {
            Ok(out) => {
                manifest.skipped.extend(out.skipped);
                manifest.snapshots.extend(out.records);
                if !out.data.is_empty() {
                    groups.entry(out.group).or_default().extend(out.data);
                }
            }
            Err(e @ Error::OracleUnavailable(_)) => manifest.skipped.push((case.id.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyDataset("no case produced training samples".into()));
    }
    manifest.group_counts = groups.iter().map(|(g, d)| (g.clone(), d.len())).collect();
    let (data, m) = balance_groups(&groups, seed);
    manifest.balanced_per_group = m;
    let splits = data.split(0.7, 0.15, seed)?;
    Ok(GeneratedData { data, splits, manifest })
}
