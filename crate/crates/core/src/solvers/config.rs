use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::MixtureDensity;
use crate::error::{Error, Result};
use crate::lmo::{GridSpec, LmoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// γ = 2/(t+2)
    FwFixed,
    /// γ = clip(gap / C_f)
    FwLinesearch,
    /// Weights re-fitted to q − ∇f(q)/L in L2 over the active atoms.
    NormCorrective,
    /// Weights re-fitted to the objective itself over the active atoms.
    FullyCorrective,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::FwFixed,
        Algorithm::FwLinesearch,
        Algorithm::NormCorrective,
        Algorithm::FullyCorrective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FwFixed => "fw_fixed",
            Algorithm::FwLinesearch => "fw_linesearch",
            Algorithm::NormCorrective => "norm_corrective",
            Algorithm::FullyCorrective => "fully_corrective",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmoChoice {
    Grid(GridSpec),
    Stochastic(LmoConfig),
}

#[derive(Debug, Clone, Default)]
pub enum Init {
    /// One atom at the box center with σ = σ_max.
    #[default]
    Center,
    Mixture(MixtureDensity),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Number of outer iterations.
    pub iterations: usize,
    /// Surrogate smoothness L for the norm-corrective step.
    pub l_surrogate: f64,
    /// Interpret `l_surrogate` relative to the largest Gram diagonal entry
    /// instead of in absolute units; needed when ⟨s, s⟩ is astronomically large
    /// or small (high dimension, small σ).
    pub l_relative: bool,
    /// C_f for the line search; `None` uses the family's curvature bound.
    pub curvature: Option<f64>,
    pub lmo: LmoChoice,
    pub init: Init,
    pub seed: u64,
    /// Samples per atom when expectations use Monte Carlo (d > 2).
    pub mc_samples: usize,
    /// Re-optimise the parameters of every active atom once per iteration.
    pub correct_atoms: bool,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Stop after this many consecutive iterations whose gap is within noise of zero.
    pub stall_patience: usize,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, iterations: usize, lmo: LmoChoice) -> Self {
        Self {
            algorithm,
            iterations,
            l_surrogate: 5.0,
            l_relative: false,
            curvature: None,
            lmo,
            init: Init::Center,
            seed: 0,
            mc_samples: 512,
            correct_atoms: false,
            qp_tol: 1e-10,
            qp_max_iter: 50_000,
            inner_tol: 1e-10,
            inner_max_iter: 200,
            stall_patience: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("solver.T", "must be at least 1"));
        }
        if !(self.l_surrogate > 0.0) || !self.l_surrogate.is_finite() {
            return Err(Error::config("solver.L_surrogate", "must be positive"));
        }
        if let Some(c) = self.curvature {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::config("solver.curvature", "must be positive"));
            }
        }
        if self.mc_samples < 2 {
            return Err(Error::config("metrics.mc_samples", "must be at least 2"));
        }
        if !(self.qp_tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if self.stall_patience == 0 {
            return Err(Error::invalid("stall patience must be at least 1"));
        }
        match &self.lmo {
            LmoChoice::Grid(g) => {
                if g.means_per_dim == 0 || g.sigmas == 0 {
                    return Err(Error::config("solver.grid_means", "grid must be non-empty"));
                }
            }
            LmoChoice::Stochastic(c) => c.validate()?,
        }
        Ok(())
    }
}
