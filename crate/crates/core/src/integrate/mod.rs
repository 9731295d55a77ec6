//! Numerical integration: adaptive cubature for d <= 2 and seeded Monte Carlo.
//! Every constant and estimator elsewhere in the crate is checked against these.

mod expect;
mod mc;
mod quadrature;

pub use expect::{atom_expectation, mixture_expectation, Estimator, NodeSet, WINDOW_SIGMAS};
pub use mc::{derive_seed, expectation_mc, McEstimate, McSpec, Sampler};
pub use quadrature::{integrate_box, integrate_interval, Quadrature, QuadratureSpec};

