//! Deep RKHS superposition networks.
//!
//! A network is a stack of layers whose units sum learned univariate link
//! functions of the previous layer's outputs. Every link lives in the RKHS of a
//! Gaussian kernel and is penalized by its RKHS norm. Training minimizes a
//! profiled penalized least-squares objective: the last layer is a kernel ridge
//! regression solved in closed form, and only the lower layers are updated by
//! Adam.
//!
//! Modules, bottom-up:
//!
//! * [`numerics`]: seeded sampling, jittered SPD solves, special functions.
//! * [`kernel`]: the Gaussian kernel and its Gram/cross matrices.
//! * [`network`]: architecture, link parameterizations and the forward pass.
//! * [`objective`]: penalty, last-layer ridge solve, profile and joint losses
//!   with analytic gradients.
//! * [`trainer`]: Adam, early stopping, profile and direct training, prediction.
//! * [`hyperopt`]: penalty scaling rule and Bayesian optimization of the
//!   last-layer penalty.
//! * [`prior`]: the hierarchical Gaussian-process prior and its diagnostics.
//! * [`benchmarks`]: synthetic test functions, datasets, the MLP baseline and
//!   experiment drivers.

pub mod benchmarks;
pub mod error;
pub mod hyperopt;
pub mod kernel;
pub mod network;
pub mod numerics;
pub mod objective;
pub mod prior;
pub mod trainer;

pub use error::{Error, Result};
