//! The atom family: truncated isotropic Gaussians on a compact box, their
//! mixtures, sampling, and the family-wide constants (ε, M, diameter).

mod atom;
mod family;
mod mixture;
pub mod normal;
mod support;

pub use atom::{log_truncation_mass, truncation_mass, AtomParams, TruncatedGaussianAtom};
pub use family::{AtomFamilyConfig, DiameterBounds, FamilyBounds};
pub use mixture::{mixture_log_pdf, sample_mixture, MixtureDensity, MixtureSnapshot, ACTIVE_WEIGHT, SIMPLEX_TOL};
pub use support::SupportBox;

/// `quantize_mean(mean, cfg)`
pub fn quantize_mean(mean: &[f64], cfg: &AtomFamilyConfig) -> Vec<f64> {
    cfg.quantize_mean(mean)
}

/// `(ε, M)` for the family.
pub fn family_bounds(cfg: &AtomFamilyConfig) -> (f64, f64) {
    let b = cfg.bounds();
    (b.epsilon, b.m_upper)
}

pub fn family_diameter_sq(cfg: &AtomFamilyConfig) -> f64 {
    cfg.diameter_sq()
}
