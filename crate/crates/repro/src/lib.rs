//! Desk-scale benchmark setup shared by the acceptance checks.
//!
//! The MLP is trained from scratch, so its learning-rate sweep is the usual
//! three-decade grid shifted up to around its working rate of 1e-3.

use gmc_core::synthbench::{ArmReport, ExperimentConfig, SuiteReport};

pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Learning-rate sweep for the MLP benchmark, highest first.
pub const MLP_LR_GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Default dataset and training settings over [`SEEDS`].
pub fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig {
        seeds: SEEDS.to_vec(),
        lr_grid: MLP_LR_GRID.to_vec(),
        ..ExperimentConfig::default()
    }
}

/// A successful arm by name.
pub fn ok_arm<'r>(report: &'r SuiteReport, name: &str) -> Option<&'r ArmReport> {
    report.arm(name).filter(|a| a.is_ok())
}

/// Median epochs to the SROCC target, infinite when the median run never got
/// there.
pub fn median_reach(arm: &ArmReport) -> f64 {
    arm.median_epochs_to_target.unwrap_or(f64::INFINITY)
}
