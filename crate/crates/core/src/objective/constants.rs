use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{log_truncation_mass, AtomFamilyConfig, DiameterBounds};

/// Smoothness and curvature constants implied by the atom family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConstants {
    pub epsilon: f64,
    pub m_upper: f64,
    /// L = 1/ε
    pub l_smooth: f64,
    pub lebesgue: f64,
    pub diameter: DiameterBounds,
    /// min(L · diam², 4M² L(A) / ε)
    pub curvature_bound: f64,
    /// 4M² L(A) / ε, the loosest link of the chain
    pub lebesgue_curvature_bound: f64,
    pub k_min_mass: f64,
    /// Information-loss constant in the form stated for the Gaussian family.
    pub information_loss_constant: f64,
    /// The same quantity following the proof chain L · 4/(σ_min^d (2√π)^d K²).
    pub information_loss_chain: f64,
}

impl ObjectiveConstants {
    pub fn for_family(cfg: &AtomFamilyConfig) -> Self {
        let b = cfg.bounds();
        let diameter = cfg.diameter_bounds();
        let log_leb = cfg.support.log_lebesgue_measure();
        let log_l = -b.log_epsilon;
        let log_lebesgue_curv = (4.0f64).ln() + 2.0 * b.log_m_upper + log_leb - b.log_epsilon;
        let log_curv = (log_l + diameter.value.ln()).min(log_lebesgue_curv);
        Self {
            epsilon: b.epsilon,
            m_upper: b.m_upper,
            l_smooth: log_l.exp(),
            lebesgue: log_leb.exp(),
            diameter,
            curvature_bound: log_curv.exp(),
            lebesgue_curvature_bound: log_lebesgue_curv.exp(),
            k_min_mass: cfg.log_k_min_mass().exp(),
            information_loss_constant: information_loss_constant(cfg),
            information_loss_chain: information_loss_chain(cfg),
        }
    }
}

/// 4 P(N(a, σ_min² I) ∈ A) / (σ_min^{d/2} 2^{d/2} K²) · exp(diam(A)² / (2σ_min²)),
/// with a the lower corner of the box and K the smallest σ_max truncation mass.
pub fn information_loss_constant(cfg: &AtomFamilyConfig) -> f64 {
    let d = cfg.dim() as f64;
    let s = cfg.sigma_min;
    let log_pa = log_truncation_mass(cfg.support.lower(), s, &cfg.support).expect("validated family");
    let log_c = (4.0f64).ln() + log_pa
        - 0.5 * d * s.ln()
        - 0.5 * d * (2.0f64).ln()
        - 2.0 * cfg.log_k_min_mass()
        + 0.5 * cfg.support.diameter_sq() / (s * s);
    log_c.exp()
}

/// 4 P(N(a, σ_min² I) ∈ A) / (σ_min^d (2√π)^d N(b; a, σ_min² I) K²), i.e. L times the
/// Gaussian diameter bound. Differs from [`information_loss_constant`] by a factor σ_min^{d/2}.
pub fn information_loss_chain(cfg: &AtomFamilyConfig) -> f64 {
    let d = cfg.dim() as f64;
    let s = cfg.sigma_min;
    let log_pa = log_truncation_mass(cfg.support.lower(), s, &cfg.support).expect("validated family");
    let log_n_ba = -0.5 * d * (2.0 * PI * s * s).ln() - 0.5 * cfg.support.diameter_sq() / (s * s);
    let log_c = (4.0f64).ln() + log_pa
        - d * (s.ln() + (2.0 * PI.sqrt()).ln())
        - log_n_ba
        - 2.0 * cfg.log_k_min_mass();
    log_c.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SupportBox;

    fn family(sigma_min: f64, sigma_max: f64) -> AtomFamilyConfig {
        AtomFamilyConfig::new(SupportBox::interval(0.0, 1.0).unwrap(), sigma_min, sigma_max, 0.0).unwrap()
    }

    #[test]
    fn information_loss_constant_matches_formula() {
        let cfg = family(0.5, 0.5);
        assert!((information_loss_constant(&cfg) / 61.930293488343764 - 1.0).abs() < 1e-12);
        assert!((information_loss_chain(&cfg) / 43.79133048648096 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn information_loss_grows_as_sigma_min_shrinks() {
        assert!(information_loss_constant(&family(0.3, 0.5)) > information_loss_constant(&family(0.5, 0.5)));
    }

    #[test]
    fn constants_chain() {
        let c = ObjectiveConstants::for_family(&family(0.2, 0.5));
        assert!((c.l_smooth * c.epsilon - 1.0).abs() < 1e-12);
        assert!(c.curvature_bound <= c.l_smooth * c.diameter.value * (1.0 + 1e-12));
        assert!(c.curvature_bound <= c.lebesgue_curvature_bound * (1.0 + 1e-12));
        assert!(c.information_loss_constant >= c.l_smooth * c.diameter.value * (1.0 - 1e-9));
    }
}
