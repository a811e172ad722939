use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corrmetrics::{pearson, spearman};
use crate::error::{Error, Result};
use crate::gccloss::{gmc_loss, mse_loss, LossConfig};
use crate::init::{self, derive_seed};
use crate::monet::MoNetConfig;
use crate::numgrad::{adam_step, cosine_annealing_lr, AdamState, Tape, Tensor, Var};
use crate::scorequeue::{capacity_from_ratio, ScoreQueue};

use super::dataset::{SyntheticDataset, MOS_MAX};
use super::model::{Model, ModelKind};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Plain mean squared error.
    Mse,
    /// Full composite objective with the queue.
    Gmc,
    /// Composite objective with the SGCC weight forced to 0.
    PgccOnly,
    /// Composite objective with the PGCC weight forced to 0.
    SgccOnly,
    /// Composite objective over the current batch only.
    NoQueue,
}

impl LossKind {
    pub fn uses_queue(self) -> bool {
        matches!(self, Self::Gmc | Self::PgccOnly | Self::SgccOnly)
    }

    /// Loss weights actually applied for this kind.
    pub fn effective(self, cfg: &LossConfig) -> LossConfig {
        match self {
            Self::PgccOnly => LossConfig { beta: 0.0, ..*cfg },
            Self::SgccOnly => LossConfig { alpha: 0.0, ..*cfg },
            _ => *cfg,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "gmc" => Ok(Self::Gmc),
            "pgcc-only" => Ok(Self::PgccOnly),
            "sgcc-only" => Ok(Self::SgccOnly),
            "no-queue" => Ok(Self::NoQueue),
            other => Err(Error::InvalidArgument(format!("unknown loss kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub loss: LossKind,
    pub loss_weights: LossConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Cosine schedule restart period, in epochs.
    pub cosine_period: usize,
    /// Queue capacity as a fraction of the training-set size; 0 disables it.
    pub queue_ratio: f64,
    pub mlp_hidden: Vec<usize>,
    pub monet: MoNetConfig,
    /// Test SROCC level used for the epochs-to-reach statistic.
    pub srocc_target: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Mlp,
            loss: LossKind::Gmc,
            loss_weights: LossConfig::default(),
            epochs: 60,
            batch_size: 11,
            lr: 1e-3,
            weight_decay: 1e-5,
            cosine_period: 50,
            queue_ratio: 0.6,
            mlp_hidden: vec![32, 16],
            monet: MoNetConfig {
                tokens: 4,
                input_dim: 4,
                embed_dim: 4,
                levels: 4,
                mals: 3,
                ..MoNetConfig::default()
            },
            srocc_target: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_weights.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.cosine_period == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and cosine_period must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lr {} must be > 0 and weight_decay {} >= 0",
                self.lr, self.weight_decay
            )));
        }
        if !(0.0..=1.0).contains(&self.queue_ratio) {
            return Err(Error::InvalidArgument(format!(
                "queue_ratio {} outside [0, 1]",
                self.queue_ratio
            )));
        }
        Ok(())
    }

    /// Queue capacity for a training set of `n_train` samples.
    pub fn queue_capacity(&self, n_train: usize) -> Result<usize> {
        if !self.loss.uses_queue() || self.queue_ratio == 0.0 {
            return Ok(0);
        }
        capacity_from_ratio(self.queue_ratio, n_train)
    }
}

/// Per-epoch curves and summary of one run. NaN marks an undefined metric
/// (constant predictions); it serializes as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub lr: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub train_srocc: Vec<f64>,
    pub train_plcc: Vec<f64>,
    pub test_srocc: Vec<f64>,
    pub test_plcc: Vec<f64>,
    pub summary: TrainSummary,
    /// Excluded from determinism comparisons.
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub final_test_srocc: f64,
    pub final_test_plcc: f64,
    pub best_test_srocc: f64,
    /// First 1-based epoch whose test SROCC reached the target.
    pub epochs_to_target: Option<usize>,
    pub steps: usize,
    /// Steps whose correlation factor fell back to gamma.
    pub gcc_fallback_steps: usize,
}

fn metric(f: fn(&[f64], &[f64]) -> Result<f64>, x: &[f64], y: &[f64]) -> f64 {
    f(x, y).unwrap_or(f64::NAN)
}

/// Stateful mini-batch trainer.
pub struct Trainer<'d> {
    data: &'d SyntheticDataset,
    cfg: TrainConfig,
    seed: u64,
    model: Model,
    params: Vec<Tensor>,
    adam: AdamState,
    queue: ScoreQueue,
    steps: usize,
    fallback_steps: usize,
}

impl<'d> Trainer<'d> {
    pub fn new(data: &'d SyntheticDataset, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let model = Model::build(cfg.model, data.dim(), &cfg.mlp_hidden, &cfg.monet, seed)?;
        let params = model.parameters();
        let adam = AdamState::new(&params);
        let queue = ScoreQueue::new(cfg.queue_capacity(data.train.len())?);
        Ok(Self {
            data,
            cfg,
            seed,
            model,
            params,
            adam,
            queue,
            steps: 0,
            fallback_steps: 0,
        })
    }

    pub fn queue(&self) -> &ScoreQueue {
        &self.queue
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// One optimizer step on the samples `idx`; returns the loss value.
    pub fn step(&mut self, idx: &[usize], lr: f64) -> Result<f64> {
        let x = self.data.rows(idx);
        let targets: Vec<f64> = self.data.scores(idx).iter().map(|s| s / MOS_MAX).collect();

        let tape = Tape::new();
        let vars: Vec<Var<'_>> = self.params.iter().map(|p| tape.param(p)).collect();
        let preds = self.model.forward(&vars, &x)?;
        let gts = tape.constant(&Tensor::vector(targets.clone()));
        let loss = match self.cfg.loss {
            LossKind::Mse => mse_loss(preds, gts)?,
            kind => {
                let out = gmc_loss(
                    preds,
                    gts,
                    &self.queue.snapshot(),
                    &kind.effective(&self.cfg.loss_weights),
                )?;
                if out.gcc_skipped {
                    self.fallback_steps += 1;
                }
                out.loss
            }
        };
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("training loss {value}")));
        }
        let grads = tape.backward(loss)?;
        let grads: Vec<Tensor> = vars.iter().map(|v| grads.wrt(*v)).collect();
        let detached = preds.value().data().to_vec();
        drop(tape);

        adam_step(&mut self.params, &grads, &mut self.adam, lr, self.cfg.weight_decay)?;
        self.queue.push_batch(&detached, &targets)?;
        self.steps += 1;
        Ok(value)
    }

    /// Learning rate for a 0-based epoch.
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        cosine_annealing_lr(epoch, self.cfg.cosine_period, self.cfg.lr)
    }

    /// Shuffled pass over the training split; returns the mean batch loss.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<f64> {
        let lr = self.lr_at(epoch)?;
        let mut order = self.data.train.clone();
        order.shuffle(&mut init::rng(derive_seed(self.seed, 1000 + epoch as u64)));
        let mut total = 0.0;
        let mut batches = 0;
        for batch in order.chunks(self.cfg.batch_size) {
            total += self.step(batch, lr)?;
            batches += 1;
        }
        Ok(total / batches as f64)
    }

    /// (SROCC, PLCC) of the current model on `idx`.
    pub fn evaluate(&mut self, idx: &[usize]) -> Result<(f64, f64)> {
        self.model.set_parameters(&self.params)?;
        let preds = self.model.predict(&self.data.rows(idx))?;
        let gts = self.data.scores(idx);
        Ok((metric(spearman, &preds, &gts), metric(pearson, &preds, &gts)))
    }
}

/// Full training run with per-epoch evaluation on both splits.
pub fn train(data: &SyntheticDataset, cfg: &TrainConfig, seed: u64) -> Result<TrainReport> {
    let start = Instant::now();
    let mut trainer = Trainer::new(data, cfg.clone(), seed)?;
    let epochs = cfg.epochs;
    let mut report = TrainReport {
        seed,
        config: cfg.clone(),
        lr: Vec::with_capacity(epochs),
        train_loss: Vec::with_capacity(epochs),
        train_srocc: Vec::with_capacity(epochs),
        train_plcc: Vec::with_capacity(epochs),
        test_srocc: Vec::with_capacity(epochs),
        test_plcc: Vec::with_capacity(epochs),
        summary: TrainSummary {
            final_test_srocc: f64::NAN,
            final_test_plcc: f64::NAN,
            best_test_srocc: f64::NAN,
            epochs_to_target: None,
            steps: 0,
            gcc_fallback_steps: 0,
        },
        wall_clock_secs: 0.0,
    };
    for epoch in 0..epochs {
        report.lr.push(trainer.lr_at(epoch)?);
        report.train_loss.push(trainer.run_epoch(epoch)?);
        let (s, p) = trainer.evaluate(&data.train)?;
        report.train_srocc.push(s);
        report.train_plcc.push(p);
        let (s, p) = trainer.evaluate(&data.test)?;
        report.test_srocc.push(s);
        report.test_plcc.push(p);
        debug!(
            "epoch {epoch}: loss {:.5} test srocc {s:.4} plcc {p:.4}",
            report.train_loss[epoch]
        );
    }
    let s = &mut report.summary;
    s.final_test_srocc = *report.test_srocc.last().expect("epochs > 0");
    s.final_test_plcc = *report.test_plcc.last().expect("epochs > 0");
    s.best_test_srocc = report
        .test_srocc
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, f64::max);
    s.epochs_to_target = report
        .test_srocc
        .iter()
        .position(|&v| v >= cfg.srocc_target)
        .map(|e| e + 1);
    s.steps = trainer.steps();
    s.gcc_fallback_steps = trainer.fallback_steps;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
