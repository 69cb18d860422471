//! Kernel-based regularized least squares with empirical Bayes and SURE
//! hyper-parameter tuning, plus a Monte Carlo harness comparing the two.
//!
//! Typical use: tune a [`kernels::KernelFamily`] on a
//! [`problem::RegressionProblem`] with [`optim::minimize_cost`], then pass the
//! resulting kernel to [`estimators::rls_estimate`].

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod costs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod kv;
pub mod linalg;
pub mod optim;
pub mod problem;
pub mod rng;

pub use error::{Error, Result};
