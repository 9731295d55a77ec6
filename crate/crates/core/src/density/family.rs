use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::atom::{log_truncation_mass, TruncatedGaussianAtom};
use super::normal::LN_SQRT_2PI;
use super::support::SupportBox;
use crate::error::{Error, Result};

/// The atom family: isotropic truncated Gaussians on one box with
/// σ in `[sigma_min, sigma_max]` and means optionally snapped to a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFamilyConfig {
    pub support: Arc<SupportBox>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Grid spacing for atom means, measured from `support.lower()`; 0 disables quantization.
    pub mean_stride: f64,
}

/// Uniform lower (`epsilon`) and upper (`m_upper`) bounds on every atom pdf over the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyBounds {
    pub epsilon: f64,
    pub m_upper: f64,
    pub log_epsilon: f64,
    pub log_m_upper: f64,
}

/// The two upper bounds on diam(A)² and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterBounds {
    /// 4 M² · Lebesgue(box)
    pub lebesgue_bound: f64,
    /// 4 / (σ_min^d (2√π)^d K²)
    pub gaussian_bound: f64,
    pub value: f64,
}

impl AtomFamilyConfig {
    pub fn new(support: SupportBox, sigma_min: f64, sigma_max: f64, mean_stride: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !sigma_min.is_finite() {
            return Err(Error::invalid(format!("sigma_min must be positive, got {sigma_min}")));
        }
        if !(sigma_max >= sigma_min) || !sigma_max.is_finite() {
            return Err(Error::invalid(format!(
                "sigma_max ({sigma_max}) must be finite and >= sigma_min ({sigma_min})"
            )));
        }
        if !(mean_stride >= 0.0) || !mean_stride.is_finite() {
            return Err(Error::invalid(format!("mean_stride must be >= 0, got {mean_stride}")));
        }
        Ok(Self {
            support: Arc::new(support),
            sigma_min,
            sigma_max,
            mean_stride,
        })
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Round each coordinate to the nearest grid point (ties toward the lower one),
    /// keeping the result inside the box and on the grid.
    pub fn quantize_mean(&self, mean: &[f64]) -> Vec<f64> {
        let h = self.mean_stride;
        mean.iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = self.support.lower()[i];
                let hi = self.support.upper()[i];
                let x = x.clamp(lo, hi);
                if h == 0.0 {
                    return x;
                }
                let k_max = ((hi - lo) / h + 1e-9).floor();
                let k = ((x - lo) / h - 0.5).ceil().clamp(0.0, k_max);
                (lo + k * h).min(hi)
            })
            .collect()
    }

    /// Projection onto the feasible parameter set: clamp the mean into the box,
    /// snap it to the grid and clamp σ into `[sigma_min, sigma_max]`.
    pub fn project(&self, mean: &[f64], sigma: f64) -> (Vec<f64>, f64) {
        let clamped = self.support.clamp(mean);
        let sigma = if sigma.is_nan() { self.sigma_min } else { sigma.clamp(self.sigma_min, self.sigma_max) };
        (self.quantize_mean(&clamped), sigma)
    }

    /// Build a family member after projecting the parameters.
    pub fn atom(&self, mean: &[f64], sigma: f64) -> Result<TruncatedGaussianAtom> {
        self.support.check_dim(mean)?;
        let (m, s) = self.project(mean, sigma);
        TruncatedGaussianAtom::new(m, s, Arc::clone(&self.support))
    }

    pub fn contains(&self, atom: &TruncatedGaussianAtom) -> bool {
        let (m, s) = self.project(atom.mean(), atom.sigma());
        atom.support() == &*self.support && s == atom.sigma() && m == atom.mean()
    }

    /// Box center with σ = σ_max, the default initial iterate.
    pub fn center_atom(&self) -> Result<TruncatedGaussianAtom> {
        self.atom(&self.support.center(), self.sigma_max)
    }

    /// K = min over means of P(N(μ, σ_max² I) ∈ box). Per-dimension masses are
    /// symmetric about the box center and smallest at the faces, and the lower
    /// corner is always on the quantization grid.
    pub fn log_k_min_mass(&self) -> f64 {
        log_truncation_mass(self.support.lower(), self.sigma_max, &self.support)
            .expect("validated family")
    }

    /// ε and M in closed form.
    ///
    /// The minimum pdf value is attained by the σ_min atom centered at one
    /// diameter vertex (the lower corner `a`) and evaluated at the opposite
    /// vertex `b`: ε = N(b; a, σ_min² I) / P(N(a, σ_min² I) ∈ box).
    /// The maximum is attained by the same atom at its own mean:
    /// M = (2πσ_min²)^{-d/2} / P(N(a, σ_min² I) ∈ box).
    pub fn bounds(&self) -> FamilyBounds {
        let d = self.dim() as f64;
        let s = self.sigma_min;
        let log_mass_corner =
            log_truncation_mass(self.support.lower(), s, &self.support).expect("validated family");
        let log_peak = -d * (s.ln() + LN_SQRT_2PI);
        let log_m = log_peak - log_mass_corner;
        let log_eps = log_peak - 0.5 * self.support.diameter_sq() / (s * s) - log_mass_corner;
        FamilyBounds {
            epsilon: log_eps.exp(),
            m_upper: log_m.exp(),
            log_epsilon: log_eps,
            log_m_upper: log_m,
        }
    }

    /// Upper bounds on the squared L2 diameter of the family.
    pub fn diameter_bounds(&self) -> DiameterBounds {
        let d = self.dim() as f64;
        let b = self.bounds();
        let log_leb = (4.0f64).ln() + 2.0 * b.log_m_upper + self.support.log_lebesgue_measure();
        let log_gauss = (4.0f64).ln()
            - d * (self.sigma_min.ln() + (2.0 * PI.sqrt()).ln())
            - 2.0 * self.log_k_min_mass();
        let lebesgue_bound = log_leb.exp();
        let gaussian_bound = log_gauss.exp();
        DiameterBounds {
            lebesgue_bound,
            gaussian_bound,
            value: lebesgue_bound.min(gaussian_bound),
        }
    }

    /// min(4M²·L(A), 4/(σ_min^d (2√π)^d K²))
    pub fn diameter_sq(&self) -> f64 {
        self.diameter_bounds().value
    }
}
