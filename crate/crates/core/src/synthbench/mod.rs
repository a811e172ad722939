//! Synthetic regression benchmark: data generation, training loop and
//! multi-seed experiment suites.

mod dataset;
mod model;
mod suite;
mod train;

pub use dataset::{generate, generate_dataset, DatasetConfig, SyntheticDataset, MOS_MAX};
pub use model::{Mlp, Model, ModelKind};
pub use suite::{
    arm_names, median, run_suite, ArmReport, ArmStatus, ExperimentConfig, Spread, SuiteKind,
    SuiteReport,
};
pub use train::{train, LossKind, TrainConfig, TrainReport, TrainSummary, Trainer};
