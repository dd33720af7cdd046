//! Training samples and their CSV form:
//! `f000..f123,dt_opt,config_id,iter,elem`.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_id: String,
    pub iter: usize,
    pub elem: usize,
}

/// Feature rows with scalar targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

/// Train / test / validation partition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, features: Vec<f64>, target: f64, provenance: Provenance) {
        self.features.push(features);
        self.targets.push(target);
        self.provenance.push(provenance);
    }

    pub fn extend(&mut self, other: Dataset) {
        self.features.extend(other.features);
        self.targets.extend(other.targets);
        self.provenance.extend(other.provenance);
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i].clone()).collect(),
        }
    }

    /// Seeded shuffle, then the first `train` and `test` fractions; the rest
    /// is validation. Sizes are rounded down for train and test.
    pub fn split(&self, train: f64, test: f64, seed: u64) -> Result<Splits> {
        if !(train > 0.0 && test >= 0.0 && train + test <= 1.0) {
            return Err(Error::Config(format!("invalid split fractions {train}, {test}")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (train * self.len() as f64 + 1e-9).floor() as usize;
        let n_test = (test * self.len() as f64 + 1e-9).floor() as usize;
        Ok(Splits {
            train: self.subset(&idx[..n_train]),
            test: self.subset(&idx[n_train..n_train + n_test]),
            validation: self.subset(&idx[n_train + n_test..]),
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.dim();
        let header: Vec<String> = (0..dim).map(|k| format!("f{k:03}")).collect();
        writeln!(out, "{},dt_opt,config_id,iter,elem", header.join(","))?;
        for i in 0..self.len() {
            for x in &self.features[i] {
                write!(out, "{x:?},")?;
            }
            let p = &self.provenance[i];
            writeln!(out, "{:?},{},{},{}", self.targets[i], p.config_id, p.iter, p.elem)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        let dim = cols.len().checked_sub(4).ok_or_else(|| Error::Format("dataset header too short".into()))?;
        let expected: Vec<String> = (0..dim).map(|k| format!("f{k:03}")).collect();
        if cols[..dim] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..]
            || cols[dim..] != ["dt_opt", "config_id", "iter", "elem"]
        {
            return Err(Error::Format("unexpected dataset header".into()));
        }
        let mut ds = Dataset::default();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != dim + 4 {
                return Err(Error::Format(format!("dataset row {}: expected {} fields", ln + 2, dim + 4)));
            }
            let bad = || Error::Format(format!("dataset row {}: malformed number", ln + 2));
            let features = f[..dim].iter().map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            let target = f[dim].parse::<f64>().map_err(|_| bad())?;
            let iter = f[dim + 2].parse::<usize>().map_err(|_| bad())?;
            let elem = f[dim + 3].parse::<usize>().map_err(|_| bad())?;
            ds.push(features, target, Provenance { config_id: f[dim + 1].to_string(), iter, elem });
        }
        Ok(ds)
    }
}
