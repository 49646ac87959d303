//! Distributional distinguishability of stochastic dynamical systems from
//! output-trajectory data.
//!
//! Sample sets of output trajectories are compared with a Gaussian kernel on
//! trajectory space: the biased MMD estimate quantifies how distinguishable
//! two initial conditions are, and a two-sample test (analytic or
//! permutation threshold) decides whether they are distinguishable at a
//! given confidence level. Grid sweeps turn this into empirical classes of
//! indistinguishability; the empirical observability Gramian provides the
//! local linearized comparison.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod gramian;
pub mod io;
pub mod kernels;
pub mod mmd;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};
pub use kernels::KernelConfig;
pub use mmd::{TestConfig, TestResult, ThresholdMethod};
pub use trajectory::{SampleSet, Trajectory};
