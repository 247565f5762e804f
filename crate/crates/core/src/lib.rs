//! Variational mutual information estimation with the FLO family of bounds.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`], [`tape`], [`params`], [`optim`], [`gradcheck`], [`nn`]: a small
//!   reverse-mode autodiff stack over dense `f64` matrices, Adam, and MLPs.
//! - [`critics`]: joint, bilinear (cosine) and tabular critics producing pair
//!   scores `g(x, y)` and the PMI head `u(x, y)`.
//! - [`estimators`]: FLO, FDV, InfoNCE, NWJ, TUBA, DV and MINE as tape losses.
//! - [`training`]: minibatch training and Monte Carlo evaluation of estimators.
//! - [`oracle`]: exact MI and closed-form bounds for discrete joint tables.
//! - [`gaussian`]: correlated-Gaussian benchmark with known MI.
//! - [`meta`]: meta-learning regressors on sine tasks with an MI regularizer.

pub mod critics;
pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod meta;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod stats;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
