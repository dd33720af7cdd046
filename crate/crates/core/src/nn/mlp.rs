//! Fully connected ReLU network with a single linear output.
//!
//! Parameters live in one flat vector, layer by layer: the row-major weight
//! matrix (`out × in`) followed by the bias.

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) || *dims.last().unwrap() != 1 {
            return Err(Error::Config(format!("invalid layer dimensions {dims:?}")));
        }
        Ok(Self { dims: dims.to_vec(), params: vec![0.0; param_count(dims)] })
    }

    /// He-normal weights, zero biases.
    pub fn he_init(dims: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in dims.windows(2) {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
            for p in &mut m.params[off..off + w[0] * w[1]] {
                *p = normal.sample(&mut rng);
            }
            off += w[1] * (w[0] + 1);
        }
        Ok(m)
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        let m = Self::zeros(dims)?;
        if params.len() != m.params.len() {
            return Err(Error::Dimension { expected: m.params.len(), found: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        Ok(Self { params, ..m })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of the weights and bias of layer `l` (0-based).
    fn layer(&self, l: usize) -> (usize, usize) {
        let off: usize = self.dims[..l + 1].windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        (off, off + self.dims[l] * self.dims[l + 1])
    }

    fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Pre-activations of every layer for input `x`.
    fn pass(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let input: Vec<f64> = match zs.last() {
                None => x.to_vec(),
                Some(z) => z.iter().map(|v| v.max(0.0)).collect(),
            };
            let z = (0..n_out)
                .map(|o| {
                    let row = &self.params[w + o * n_in..w + (o + 1) * n_in];
                    row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>() + self.params[b + o]
                })
                .collect();
            zs.push(z);
        }
        zs
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.pass(x).last().expect("at least one layer")[0]
    }

    /// Root mean squared error over a set of samples.
    pub fn rmse<X: AsRef<[f64]>>(&self, xs: &[X], ys: &[f64]) -> f64 {
        if ys.is_empty() {
            return 0.0;
        }
        let sq: f64 = xs.iter().zip(ys).map(|(x, y)| (self.forward(x.as_ref()) - y).powi(2)).sum();
        (sq / ys.len() as f64).sqrt()
    }

    /// Adds `e ∂f/∂θ` for one sample to `grad`, with `e = f(x) − y`; returns `e`.
    fn backprop(&self, x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
        let zs = self.pass(x);
        let nl = self.num_layers();
        let e = zs[nl - 1][0] - y;
        let mut delta = vec![e];
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let input: Vec<f64> = if l == 0 { x.to_vec() } else { zs[l - 1].iter().map(|v| v.max(0.0)).collect() };
            for o in 0..n_out {
                grad[b + o] += delta[o];
                for (gi, xi) in grad[w + o * n_in..w + (o + 1) * n_in].iter_mut().zip(&input) {
                    *gi += delta[o] * xi;
                }
            }
            if l > 0 {
                delta = (0..n_in)
                    .map(|i| {
                        if zs[l - 1][i] > 0.0 {
                            (0..n_out).map(|o| self.params[w + o * n_in + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        e
    }

    /// RMSE loss over the samples and its gradient with respect to the
    /// parameters. The gradient is zero where the loss is zero.
    pub fn loss_and_grad<X: AsRef<[f64]> + Sync>(&self, xs: &[X], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = ys.len();
        let np = self.params.len();
        if n == 0 {
            return (0.0, vec![0.0; np]);
        }
        // fixed chunks summed in order keep the result bit-reproducible
        let partials: Vec<(f64, Vec<f64>)> = xs
            .par_chunks(64)
            .zip(ys.par_chunks(64))
            .map(|(xc, yc)| {
                let mut g = vec![0.0; np];
                let sse = xc.iter().zip(yc).map(|(x, &y)| self.backprop(x.as_ref(), y, &mut g).powi(2)).sum::<f64>();
                (sse, g)
            })
            .collect();
        let mut sse = 0.0;
        let mut grad = vec![0.0; np];
        for (s, g) in partials {
            sse += s;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let loss = (sse / n as f64).sqrt();
        let scale = if loss > 0.0 { 1.0 / (n as f64 * loss) } else { 0.0 };
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss, grad)
    }
}

/// Largest relative difference between the backpropagated gradient and
/// central finite differences over `count` randomly chosen parameters (all
/// parameters if there are fewer).
pub fn gradient_check<X: AsRef<[f64]> + Sync>(mlp: &Mlp, xs: &[X], ys: &[f64], count: usize, seed: u64) -> f64 {
    use rand::seq::index::sample;
    let (_, grad) = mlp.loss_and_grad(xs, ys);
    let n = mlp.params.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if count >= n { (0..n).collect() } else { sample(&mut rng, n, count).into_vec() };
    let mut worst = 0.0f64;
    let mut m = mlp.clone();
    let mut loss_at = |k: usize, t: f64| {
        m.params[k] = mlp.params[k] + t;
        let l = m.loss_and_grad(xs, ys).0;
        m.params[k] = mlp.params[k];
        l
    };
    for k in picks {
        // fourth-order central differences
        let h = 1e-4 * mlp.params[k].abs().max(0.1);
        let fd = (8.0 * (loss_at(k, h) - loss_at(k, -h)) - (loss_at(k, 2.0 * h) - loss_at(k, -2.0 * h))) / (12.0 * h);
        let scale = grad[k].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((grad[k] - fd).abs() / scale);
    }
    worst
}
