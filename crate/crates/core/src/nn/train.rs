//! Adam training with early stopping, k-fold grid search.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mlp, Model, TargetTransform, TrainMeta};
use crate::error::{Error, Result};
use crate::features::{Dataset, Normalizer};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub target: TargetTransform,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16],
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 5000,
            patience: 150,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            target: TargetTransform::Log,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch count must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers need at least one unit");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return bad("invalid Adam moments");
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.hidden);
        d.push(1);
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

pub fn write_log_csv<W: Write>(log: &[EpochLog], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_rmse,val_rmse")?;
    for l in log {
        writeln!(out, "{},{:?},{:?}", l.epoch, l.train_rmse, l.val_rmse)?;
    }
    Ok(())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= cfg.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.eps);
        }
    }
}

fn transformed_targets(ds: &Dataset, target: TargetTransform) -> Result<Vec<f64>> {
    ds.targets
        .iter()
        .map(|&t| {
            let y = target.forward(t);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::Numeric(format!("target {t} is not representable in {target:?} mode")))
            }
        })
        .collect()
}

/// Trains on `train`, early-stopping on `validation` RMSE (in transformed
/// target space). The returned model carries the best-validation parameters.
pub fn train(train: &Dataset, validation: &Dataset, cfg: &TrainConfig) -> Result<(Model, Vec<EpochLog>)> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::EmptyDataset("training needs non-empty train and validation splits".into()));
    }
    if validation.dim() != train.dim() {
        return Err(Error::Dimension { expected: train.dim(), found: validation.dim() });
    }
    let normalizer = Normalizer::fit(&train.features)?;
    let xs: Vec<Vec<f64>> = train.features.iter().map(|x| normalizer.normalize(x)).collect();
    let xv: Vec<Vec<f64>> = validation.features.iter().map(|x| normalizer.normalize(x)).collect();
    let ys = transformed_targets(train, cfg.target)?;
    let yv = transformed_targets(validation, cfg.target)?;

    let mut mlp = Mlp::he_init(&cfg.dims(train.dim()), cfg.seed)?;
    let mut adam = Adam::new(mlp.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut best = (f64::INFINITY, mlp.clone(), 0usize);
    let mut log = Vec::new();
    let mut bx: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i].as_slice()));
            by.extend(chunk.iter().map(|&i| ys[i]));
            let (_, grad) = mlp.loss_and_grad(&bx, &by);
            adam.step(mlp.params_mut(), &grad, cfg);
        }
        if mlp.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
        }
        let entry = EpochLog { epoch, train_rmse: mlp.rmse(&xs, &ys), val_rmse: mlp.rmse(&xv, &yv) };
        log.push(entry);
        if entry.val_rmse < best.0 {
            best = (entry.val_rmse, mlp.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }

    let (val_rmse, mlp, best_epoch) = best;
    let mut model = Model::new(mlp, normalizer, cfg.target)?;
    model.meta = TrainMeta {
        seed: cfg.seed,
        epochs: log.len(),
        train_rmse: log[best_epoch - 1].train_rmse,
        val_rmse,
    };
    Ok((model, log))
}

/// Contiguous folds over a seeded permutation of `0..n`. Fold sizes differ
/// by at most one.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::Config(format!("cannot split {n} samples into {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (q, r) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = q + usize::from(f < r);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Cross-validated score of one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub hidden: Vec<usize>,
    pub mean_val_rmse: f64,
    pub fold_rmse: Vec<f64>,
}

/// k-fold cross validation of every hidden-layer shape
/// (`layers` × `widths`, uniform width). Returns entries ranked by mean
/// validation RMSE, best first; ties keep grid order.
pub fn grid_search(
    data: &Dataset,
    layers: &[usize],
    widths: &[usize],
    folds: usize,
    base: &TrainConfig,
) -> Result<Vec<GridEntry>> {
    let parts = fold_indices(data.len(), folds, base.seed)?;
    let mut table = Vec::new();
    for &l in layers {
        for &w in widths {
            let cfg = TrainConfig { hidden: vec![w; l], ..base.clone() };
            let mut fold_rmse = Vec::with_capacity(folds);
            for (k, held) in parts.iter().enumerate() {
                let rest: Vec<usize> =
                    parts.iter().enumerate().filter(|&(j, _)| j != k).flat_map(|(_, p)| p.iter().copied()).collect();
                let (model, _) = train(&data.subset(&rest), &data.subset(held), &cfg)?;
                fold_rmse.push(model.meta.val_rmse);
            }
            let mean_val_rmse = fold_rmse.iter().sum::<f64>() / folds as f64;
            table.push(GridEntry { hidden: cfg.hidden, mean_val_rmse, fold_rmse });
        }
    }
    table.sort_by(|a, b| a.mean_val_rmse.total_cmp(&b.mean_val_rmse));
    Ok(table)
}

pub fn write_grid_csv<W: Write>(table: &[GridEntry], mut out: W) -> Result<()> {
    writeln!(out, "rank,layers,width,mean_val_rmse")?;
    for (r, e) in table.iter().enumerate() {
        writeln!(out, "{},{},{},{:?}", r + 1, e.hidden.len(), e.hidden.first().copied().unwrap_or(0), e.mean_val_rmse)?;
    }
    Ok(())
}
