//! Boosting variational inference as functional Frank-Wolfe over mixtures of
//! truncated isotropic Gaussians.
//!
//! The crate is organised bottom-up:
//!
//! * [`density`]: support boxes, atoms, mixtures, sampling and family constants.
//! * [`integrate`]: adaptive quadrature (d <= 2) and Monte Carlo expectations.
//! * [`objective`]: the KL / negative-ELBO objective, its gradient and the
//!   smoothness / curvature constants.
//! * [`lmo`]: the stochastic projected-gradient oracle and the exhaustive grid oracle.
//! * [`solvers`]: fixed-step, line-search, norm-corrective and fully-corrective loops.
//! * [`targets`]: benchmark posteriors, Bayesian logistic regression, datasets and AUC.
//! * [`cli`]: the configuration-driven experiment runner behind the `boostvi` binary.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
mod error;
pub mod integrate;
pub mod lmo;
pub mod objective;
pub mod solvers;
pub mod targets;

pub use error::{Error, Result};
