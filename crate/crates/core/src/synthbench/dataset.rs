use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{self, derive_seed};
use crate::numgrad::Tensor;

/// Highest opinion score; scores live in `[0, MOS_MAX]`.
pub const MOS_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub dim: usize,
    /// Observation noise, in MOS units.
    pub noise_std: f64,
    pub train_fraction: f64,
    pub teacher_hidden: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_samples: 2500,
            dim: 16,
            noise_std: 5.0,
            train_fraction: 0.8,
            teacher_hidden: 32,
            seed: 0,
        }
    }
}

/// Features, opinion scores and a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// `n x d`, standard normal.
    pub features: Tensor,
    /// Observed scores.
    pub mos: Vec<f64>,
    /// Noise-free teacher scores.
    pub latent: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.mos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mos.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features.data()[i * d..(i + 1) * d]
    }

    /// Rows `idx` stacked into a `len x d` tensor.
    pub fn rows(&self, idx: &[usize]) -> Tensor {
        let d = self.dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(vec![idx.len(), d], data).expect("row shape")
    }

    pub fn scores(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.mos[i]).collect()
    }
}

pub fn generate_dataset(n: usize, d: usize, noise_std: f64, seed: u64) -> Result<SyntheticDataset> {
    generate(&DatasetConfig {
        n_samples: n,
        dim: d,
        noise_std,
        seed,
        ..DatasetConfig::default()
    })
}

/// Features ~ N(0, I); latent score from a fixed random `tanh` teacher,
/// rescaled to `[0, 100]`; observed score = latent + N(0, noise_std),
/// clamped to `[0, 100]`.
pub fn generate(cfg: &DatasetConfig) -> Result<SyntheticDataset> {
    if cfg.n_samples < 10 || cfg.dim == 0 || cfg.teacher_hidden == 0 {
        return Err(Error::InvalidArgument(format!(
            "dataset needs n >= 10 and positive dims, got {cfg:?}"
        )));
    }
    if !(cfg.noise_std >= 0.0) || !cfg.noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise_std {} must be >= 0", cfg.noise_std)));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction {} outside (0, 1)",
            cfg.train_fraction
        )));
    }
    let (n, d, h) = (cfg.n_samples, cfg.dim, cfg.teacher_hidden);

    let mut rng = init::rng(derive_seed(cfg.seed, 1));
    let features = init::normal(&[n, d], 1.0, &mut rng);

    let mut trng = init::rng(derive_seed(cfg.seed, 2));
    let w1 = init::linear(d, h, &mut trng);
    let b1 = init::normal(&[h], 0.5, &mut trng);
    let w2 = init::linear(h, 1, &mut trng);

    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let x = &features.data()[i * d..(i + 1) * d];
            (0..h)
                .map(|j| {
                    let pre: f64 = (0..d).map(|k| x[k] * w1.data()[k * h + j]).sum::<f64>()
                        + b1.data()[j];
                    pre.tanh() * w2.data()[j]
                })
                .sum()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let latent: Vec<f64> = raw.iter().map(|r| MOS_MAX * (r - lo) / (hi - lo)).collect();

    let mut nrng = init::rng(derive_seed(cfg.seed, 3));
    let mos = if cfg.noise_std == 0.0 {
        latent.clone()
    } else {
        let noise = Normal::new(0.0, cfg.noise_std).expect("noise std");
        latent
            .iter()
            .map(|l| (l + noise.sample(&mut nrng)).clamp(0.0, MOS_MAX))
            .collect()
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut init::rng(derive_seed(cfg.seed, 4)));
    let n_train = ((n as f64) * cfg.train_fraction).round() as usize;
    let test = order.split_off(n_train);

    Ok(SyntheticDataset {
        features,
        mos,
        latent,
        train: order,
        test,
        seed: cfg.seed,
    })
}
