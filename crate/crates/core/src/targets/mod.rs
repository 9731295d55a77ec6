//! Benchmark posteriors: truncated Cauchy, truncated Gaussian mixtures and
//! Bayesian logistic regression, with dataset loading and AUC evaluation.

mod analytic;
mod auc;
mod dataset;
mod logreg;
mod meanfield;

pub use analytic::{CauchyTarget, GaussComponent, GaussMixTarget};
pub use auc::{auc, predictive_auc, predictive_probabilities};
pub use dataset::{load_dataset, Dataset};
pub use logreg::{log_joint_logreg, log_sigmoid, sigmoid, LogisticRegressionModel};
pub use meanfield::meanfield_init;
