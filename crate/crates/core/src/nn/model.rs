//! A trained time-step model: network, input normalizer and target
//! transform, with a versioned text format.
//!
//! ```text
//! ptcflow-model 1
//! target log
//! dims 124 16 16 1
//! meta <seed> <epochs> <train_rmse> <val_rmse>
//! mean <values>
//! std <values>
//! params <values>
//! check_input <values>
//! check_output <value>
//! ```
//!
//! On load the stored check input is re-evaluated and must reproduce the
//! stored output exactly.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::Mlp;
use crate::error::{Error, Result};
use crate::features::Normalizer;

const MAGIC: &str = "ptcflow-model";
const VERSION: u32 = 1;

/// How network outputs relate to time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetTransform {
    /// The network predicts `ln Δt`.
    Log,
    /// The network predicts `Δt` directly.
    Raw,
}

impl TargetTransform {
    pub fn forward(self, dt: f64) -> f64 {
        match self {
            TargetTransform::Log => dt.ln(),
            TargetTransform::Raw => dt,
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            TargetTransform::Log => y.exp(),
            TargetTransform::Raw => y,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            TargetTransform::Log => "log",
            TargetTransform::Raw => "raw",
        }
    }
}

/// Training bookkeeping stored with the model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mlp: Mlp,
    pub normalizer: Normalizer,
    pub target: TargetTransform,
    pub meta: TrainMeta,
}

impl Model {
    pub fn new(mlp: Mlp, normalizer: Normalizer, target: TargetTransform) -> Result<Self> {
        if normalizer.dim() != mlp.input_dim() {
            return Err(Error::Dimension { expected: mlp.input_dim(), found: normalizer.dim() });
        }
        Ok(Self { mlp, normalizer, target, meta: TrainMeta::default() })
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    /// Network output for raw (unnormalized) features.
    pub fn network_output(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), found: x.len() });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("NaN in model input".into()));
        }
        Ok(self.mlp.forward(&self.normalizer.normalize(x)))
    }

    /// Predicted time step for raw features, before any clipping.
    pub fn predict_dt(&self, x: &[f64]) -> Result<f64> {
        Ok(self.target.inverse(self.network_output(x)?))
    }

    pub fn predict_dt_batch<X: AsRef<[f64]> + Sync>(&self, xs: &[X]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict_dt(x.as_ref())).collect()
    }

    /// RMSE against a dataset's targets in the network's output space (log
    /// time steps for [`TargetTransform::Log`]), as reported during training.
    pub fn rmse(&self, data: &crate::features::Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset("no samples to score".into()));
        }
        let se: Vec<f64> = data
            .features
            .par_iter()
            .zip(&data.targets)
            .map(|(x, &t)| Ok((self.network_output(x)? - self.target.forward(t)).powi(2)))
            .collect::<Result<_>>()?;
        Ok((se.iter().sum::<f64>() / se.len() as f64).sqrt())
    }

    fn check_input(&self) -> Vec<f64> {
        // a point a few standard deviations off the mean exercises every unit
        (0..self.input_dim())
            .map(|i| self.normalizer.mean[i] + self.normalizer.std[i] * (((i * 7) % 5) as f64 - 2.0))
            .collect()
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let dims: Vec<String> = self.mlp.dims().iter().map(|d| d.to_string()).collect();
        writeln!(out, "{MAGIC} {VERSION}")?;
        writeln!(out, "target {}", self.target.as_str())?;
        writeln!(out, "dims {}", dims.join(" "))?;
        let m = &self.meta;
        writeln!(out, "meta {} {} {:?} {:?}", m.seed, m.epochs, m.train_rmse, m.val_rmse)?;
        writeln!(out, "mean {}", join(&self.normalizer.mean))?;
        writeln!(out, "std {}", join(&self.normalizer.std))?;
        writeln!(out, "params {}", join(self.mlp.params()))?;
        let input = self.check_input();
        writeln!(out, "check_input {}", join(&input))?;
        writeln!(out, "check_output {:?}", self.network_output(&input)?)?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
        let field = |key: &str| -> Result<&str> {
            lines
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
                .ok_or_else(|| Error::Format(format!("model file lacks `{key}`")))
        };
        let floats = |key: &str| -> Result<Vec<f64>> {
            field(key)?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("bad number in `{key}`"))))
                .collect()
        };
        let header = lines.first().map(String::as_str).unwrap_or_default();
        if header != format!("{MAGIC} {VERSION}") {
            return Err(Error::Format(format!("unsupported model header `{header}`")));
        }
        let target = match field("target")? {
            "log" => TargetTransform::Log,
            "raw" => TargetTransform::Raw,
            t => return Err(Error::Format(format!("unknown target transform `{t}`"))),
        };
        let dims: Vec<usize> = field("dims")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format("bad layer dimension".into())))
            .collect::<Result<_>>()?;
        let meta_tok: Vec<&str> = field("meta")?.split_whitespace().collect();
        if meta_tok.len() != 4 {
            return Err(Error::Format("`meta` needs 4 fields".into()));
        }
        let bad = || Error::Format("bad `meta` field".into());
        let meta = TrainMeta {
            seed: meta_tok[0].parse().map_err(|_| bad())?,
            epochs: meta_tok[1].parse().map_err(|_| bad())?,
            train_rmse: meta_tok[2].parse().map_err(|_| bad())?,
            val_rmse: meta_tok[3].parse().map_err(|_| bad())?,
        };
        let mlp = Mlp::from_params(&dims, floats("params")?)?;
        let normalizer = Normalizer { mean: floats("mean")?, std: floats("std")? };
        if normalizer.std.len() != normalizer.mean.len() {
            return Err(Error::Format("normalizer arrays differ in length".into()));
        }
        let mut model = Model::new(mlp, normalizer, target)?;
        model.meta = meta;

        let input = floats("check_input")?;
        let expected = floats("check_output")?;
        if expected.len() != 1 || model.network_output(&input)?.to_bits() != expected[0].to_bits() {
            return Err(Error::Format("model check vector does not reproduce".into()));
        }
        Ok(model)
    }
}
