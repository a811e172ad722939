//! Global correlation consistency (GCC) losses for rank-sensitive regression.
//!
//! * [`numgrad`]: tape-based autodiff, Adam, cosine annealing.
//! * [`corrmetrics`]: exact PLCC / SROCC.
//! * [`rankest`]: differentiable rank estimation from pairwise preference
//!   probabilities.
//! * [`gccloss`]: PGCC, SGCC, MSE and the composite GMC objective.
//! * [`scorequeue`]: bounded FIFO of detached (prediction, label) pairs.
//! * [`monet`]: toy-scale mean-opinion network built from multi-view
//!   attention modules.
//! * [`synthbench`]: synthetic data, training loop and experiment suites.

pub mod corrmetrics;
pub mod error;
mod init;
pub mod gccloss;
pub mod monet;
pub mod numgrad;
pub mod rankest;
pub mod scorequeue;
pub mod synthbench;
pub mod verify;

pub use error::{Error, Result};
