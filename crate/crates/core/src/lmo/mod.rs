//! Linear minimization oracles over the atom family: a stochastic
//! projected-gradient oracle driven by score-function gradients, and an
//! exhaustive grid oracle used as a reference.

mod grid;
mod score;
mod stochastic;

use serde::{Deserialize, Serialize};

use crate::density::{AtomParams, AtomFamilyConfig, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::McEstimate;

pub use grid::{grid_atoms, grid_lmo, grid_lmo_over, grid_lmo_with, measure_delta, DeltaMeasure, GridSpec};
pub use score::{score_gradient, ScoreGradient};
pub use stochastic::{stochastic_lmo, stochastic_lmo_with};
pub(crate) use stochastic::refine_atom;

/// Relative tolerance under which two linear values count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceReduction {
    None,
    /// Subtract the mean of g over the other samples from each sample's weight.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmoConfig {
    /// Projected-gradient steps per restart.
    pub inner_steps: usize,
    /// Initial step size; step l uses η · 0.99^l.
    pub step_size: f64,
    /// Samples per score-function gradient.
    pub samples: usize,
    pub restarts: usize,
    pub learn_sigma: bool,
    pub seed: u64,
    pub variance_reduction: VarianceReduction,
}

impl Default for LmoConfig {
    fn default() -> Self {
        Self {
            inner_steps: 50,
            step_size: 0.01,
            samples: 64,
            restarts: 4,
            learn_sigma: false,
            seed: 0,
            variance_reduction: VarianceReduction::LeaveOneOut,
        }
    }
}

impl LmoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::config("lmo.step_size", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::config("lmo.samples", "must be at least 1"));
        }
        if self.variance_reduction == VarianceReduction::LeaveOneOut && self.samples < 2 {
            return Err(Error::config("lmo.samples", "leave-one-out baseline needs at least 2 samples"));
        }
        if self.restarts == 0 {
            return Err(Error::config("lmo.restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// An oracle answer: the chosen atom and its estimated ⟨∇f(q), s⟩ = E_s[g].
#[derive(Debug, Clone)]
pub struct LmoResult {
    pub atom: TruncatedGaussianAtom,
    pub linear_value: McEstimate,
    /// 1 for the grid oracle; measured offline otherwise.
    pub delta_measured: Option<f64>,
}

/// Clamp the mean into the box, snap it to the grid and clamp σ.
pub fn project_params(theta: &AtomParams, family: &AtomFamilyConfig) -> AtomParams {
    let (mean, sigma) = family.project(&theta.mean, theta.sigma);
    AtomParams { mean, sigma }
}

/// True when `(a, va)` should be preferred to `(b, vb)`: smaller value, ties
/// broken toward the lexicographically smaller (mean, σ).
pub(crate) fn prefer(a: &TruncatedGaussianAtom, va: f64, b: &TruncatedGaussianAtom, vb: f64) -> bool {
    let tol = TIE_TOL * (1.0 + va.abs().max(vb.abs()));
    if va < vb - tol {
        return true;
    }
    if va > vb + tol {
        return false;
    }
    let key_a = a.mean().iter().copied().chain(std::iter::once(a.sigma()));
    let key_b = b.mean().iter().copied().chain(std::iter::once(b.sigma()));
    for (x, y) in key_a.zip(key_b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
