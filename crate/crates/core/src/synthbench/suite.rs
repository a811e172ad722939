use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::{generate, DatasetConfig, SyntheticDataset};
use super::model::ModelKind;
use super::train::{train, LossKind, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    LossCompare,
    LrSweep,
    QueueSweep,
    MalSweep,
    Ablation,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 5] = [
        Self::LossCompare,
        Self::LrSweep,
        Self::QueueSweep,
        Self::MalSweep,
        Self::Ablation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LossCompare => "loss-compare",
            Self::LrSweep => "lr-sweep",
            Self::QueueSweep => "queue-sweep",
            Self::MalSweep => "mal-sweep",
            Self::Ablation => "ablation",
        }
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite kind {s:?}")))
    }
}

/// Everything needed to reproduce a run or a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub suite: Option<SuiteKind>,
    /// Learning rates for the lr sweep.
    pub lr_grid: Vec<f64>,
    /// Queue ratios for the queue sweep.
    pub queue_ratios: Vec<f64>,
    /// MAL counts for the MAL sweep.
    pub mal_counts: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            suite: None,
            lr_grid: vec![1e-4, 1e-5, 1e-6],
            queue_ratios: vec![0.2, 0.4, 0.6, 0.8],
            mal_counts: vec![1, 2, 3, 4, 5],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.lr_grid.iter().any(|lr| !(*lr > 0.0))
            || self.queue_ratios.iter().any(|r| !(0.0..=1.0).contains(r))
            || self.mal_counts.contains(&0)
        {
            return Err(Error::InvalidArgument(
                "sweep grids need lr > 0, ratios in [0, 1] and MAL counts >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Dataset used by run seed `seed`; the noise draw and split vary with it.
    pub fn dataset_for(&self, seed: u64) -> DatasetConfig {
        DatasetConfig {
            seed: self.dataset.seed.wrapping_add(seed),
            ..self.dataset.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ArmStatus {
    Ok,
    Failed { error: String },
    Skipped { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
}

/// Aggregate of one arm over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub name: String,
    pub status: ArmStatus,
    pub config: TrainConfig,
    pub final_test_srocc: Vec<f64>,
    pub final_test_plcc: Vec<f64>,
    pub epochs_to_target: Vec<Option<usize>>,
    pub median_test_srocc: f64,
    pub median_test_plcc: f64,
    pub spread_test_srocc: Spread,
    pub spread_test_plcc: Spread,
    /// `None` when the median run never reached the target.
    pub median_epochs_to_target: Option<f64>,
    pub median_curves: BTreeMap<&'static str, Vec<f64>>,
    pub wall_clock_secs: f64,
}

impl ArmReport {
    fn empty(name: String, config: TrainConfig, status: ArmStatus) -> Self {
        Self {
            name,
            status,
            config,
            final_test_srocc: Vec::new(),
            final_test_plcc: Vec::new(),
            epochs_to_target: Vec::new(),
            median_test_srocc: f64::NAN,
            median_test_plcc: f64::NAN,
            spread_test_srocc: spread(&[]),
            spread_test_plcc: spread(&[]),
            median_epochs_to_target: None,
            median_curves: BTreeMap::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ArmStatus::Ok
    }

    fn from_runs(name: String, config: TrainConfig, runs: &[TrainReport], secs: f64) -> Self {
        let finals: Vec<f64> = runs.iter().map(|r| r.summary.final_test_srocc).collect();
        let plcc: Vec<f64> = runs.iter().map(|r| r.summary.final_test_plcc).collect();
        let reach: Vec<Option<usize>> = runs.iter().map(|r| r.summary.epochs_to_target).collect();
        let reach_values: Vec<f64> = reach
            .iter()
            .map(|e| e.map_or(f64::INFINITY, |e| e as f64))
            .collect();
        let median_reach = median(&reach_values);

        let curve = |pick: fn(&TrainReport) -> &Vec<f64>| -> Vec<f64> {
            (0..config.epochs)
                .map(|e| median(&runs.iter().map(|r| pick(r)[e]).collect::<Vec<_>>()))
                .collect()
        };
        let mut median_curves = BTreeMap::new();
        median_curves.insert("train_loss", curve(|r| &r.train_loss));
        median_curves.insert("train_srocc", curve(|r| &r.train_srocc));
        median_curves.insert("train_plcc", curve(|r| &r.train_plcc));
        median_curves.insert("test_srocc", curve(|r| &r.test_srocc));
        median_curves.insert("test_plcc", curve(|r| &r.test_plcc));

        Self {
            name,
            status: ArmStatus::Ok,
            config,
            median_test_srocc: median(&finals),
            median_test_plcc: median(&plcc),
            spread_test_srocc: spread(&finals),
            spread_test_plcc: spread(&plcc),
            final_test_srocc: finals,
            final_test_plcc: plcc,
            epochs_to_target: reach,
            median_epochs_to_target: median_reach.is_finite().then_some(median_reach),
            median_curves,
            wall_clock_secs: secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub kind: SuiteKind,
    pub seeds: Vec<u64>,
    pub dataset: DatasetConfig,
    pub arms: Vec<ArmReport>,
}

impl SuiteReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn all_failed(&self) -> bool {
        self.arms.iter().all(|a| !a.is_ok())
    }
}

/// Median ignoring NaN; NaN if nothing is left.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else if v[m - 1] == v[m] {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn spread(values: &[f64]) -> Spread {
    let finite = values.iter().copied().filter(|x| !x.is_nan());
    Spread {
        min: finite.clone().fold(f64::NAN, f64::min),
        max: finite.fold(f64::NAN, f64::max),
    }
}

enum Arm {
    Run(String, TrainConfig),
    Skip(String, TrainConfig, String),
}

fn arms(kind: SuiteKind, base: &ExperimentConfig) -> Vec<Arm> {
    let with = |loss: LossKind| TrainConfig {
        loss,
        ..base.train.clone()
    };
    match kind {
        SuiteKind::LossCompare => vec![
            Arm::Run("mse".into(), with(LossKind::Mse)),
            Arm::Run("gmc".into(), with(LossKind::Gmc)),
        ],
        SuiteKind::LrSweep => base
            .lr_grid
            .iter()
            .flat_map(|&lr| {
                [("mse", LossKind::Mse), ("gmc", LossKind::Gmc)].map(|(n, loss)| {
                    Arm::Run(format!("lr={lr:e}/{n}"), TrainConfig { lr, ..with(loss) })
                })
            })
            .collect(),
        SuiteKind::QueueSweep => base
            .queue_ratios
            .iter()
            .map(|&r| {
                Arm::Run(
                    format!("queue={r}"),
                    TrainConfig {
                        queue_ratio: r,
                        ..with(LossKind::Gmc)
                    },
                )
            })
            .collect(),
        SuiteKind::MalSweep => base
            .mal_counts
            .iter()
            .map(|&m| {
                let mut cfg = with(LossKind::Gmc);
                cfg.model = ModelKind::Monet;
                cfg.monet.mals = m;
                Arm::Run(format!("M={m}"), cfg)
            })
            .collect(),
        SuiteKind::Ablation => {
            let mut out = vec![
                Arm::Run("full".into(), with(LossKind::Gmc)),
                Arm::Run("w/o SGCC".into(), with(LossKind::PgccOnly)),
                Arm::Run("w/o PGCC".into(), with(LossKind::SgccOnly)),
                Arm::Run("w/o GCC".into(), with(LossKind::Mse)),
                Arm::Run("w/o queue".into(), with(LossKind::NoQueue)),
            ];
            let mut no_mal = with(LossKind::Gmc);
            no_mal.monet.with_mal = false;
            out.push(match base.train.model {
                ModelKind::Monet => Arm::Run("w/o MAL".into(), no_mal),
                ModelKind::Mlp => Arm::Skip(
                    "w/o MAL".into(),
                    no_mal,
                    "the MLP has no MAL to remove; use model \"monet\"".into(),
                ),
            });
            out
        }
    }
}

/// Arm names `kind` produces for `base`, in report order.
pub fn arm_names(kind: SuiteKind, base: &ExperimentConfig) -> Vec<String> {
    arms(kind, base)
        .into_iter()
        .map(|a| match a {
            Arm::Run(n, _) | Arm::Skip(n, _, _) => n,
        })
        .collect()
}

/// Runs every arm of `kind` over `seeds`. Seed `s` trains on the dataset
/// from [`ExperimentConfig::dataset_for`], so arms are compared on the same
/// data per seed. A failing arm is recorded and the suite continues.
pub fn run_suite(kind: SuiteKind, base: &ExperimentConfig, seeds: &[u64]) -> Result<SuiteReport> {
    if seeds.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a suite needs at least 3 seeds, got {}",
            seeds.len()
        )));
    }
    base.validate()?;
    let data: Vec<SyntheticDataset> = seeds
        .iter()
        .map(|&s| generate(&base.dataset_for(s)))
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for arm in arms(kind, base) {
        let (name, cfg) = match arm {
            Arm::Skip(name, cfg, reason) => {
                reports.push(ArmReport::empty(name, cfg, ArmStatus::Skipped { reason }));
                continue;
            }
            Arm::Run(name, cfg) => (name, cfg),
        };
        let start = Instant::now();
        let runs: Result<Vec<TrainReport>> = seeds
            .iter()
            .zip(&data)
            .map(|(&s, d)| train(d, &cfg, s))
            .collect();
        let secs = start.elapsed().as_secs_f64();
        reports.push(match runs {
            Ok(runs) => {
                let r = ArmReport::from_runs(name, cfg, &runs, secs);
                info!(
                    "{} arm {}: median test SROCC {:.4} ({secs:.1}s)",
                    kind.name(),
                    r.name,
                    r.median_test_srocc
                );
                r
            }
            Err(e) => {
                warn!("{} arm {name} failed: {e}", kind.name());
                ArmReport::empty(name, cfg, ArmStatus::Failed { error: e.to_string() })
            }
        });
    }
    Ok(SuiteReport {
        kind,
        seeds: seeds.to_vec(),
        dataset: base.dataset.clone(),
        arms: reports,
    })
}
