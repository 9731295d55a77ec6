use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{log_truncation_mass, normal, MixtureDensity, SupportBox, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::objective::{LogDensity, TargetKind, TargetPosterior};

/// One-dimensional Cauchy density renormalised to an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyTarget {
    pub location: f64,
    pub scale: f64,
    pub support: SupportBox,
    log_mass: f64,
}

impl CauchyTarget {
    pub fn new(location: f64, scale: f64, support: SupportBox) -> Result<Self> {
        if support.dim() != 1 {
            return Err(Error::UnsupportedDimension(support.dim()));
        }
        if !(scale > 0.0) || !scale.is_finite() || !location.is_finite() {
            return Err(Error::invalid("Cauchy needs a finite location and a positive scale"));
        }
        let mass = Self::cdf_raw(location, scale, support.upper()[0]) - Self::cdf_raw(location, scale, support.lower()[0]);
        Ok(Self {
            location,
            scale,
            log_mass: mass.ln(),
            support,
        })
    }

    fn cdf_raw(location: f64, scale: f64, x: f64) -> f64 {
        0.5 + ((x - location) / scale).atan() / PI
    }

    /// Mass of the untruncated Cauchy inside the interval.
    pub fn box_mass(&self) -> f64 {
        self.log_mass.exp()
    }

    /// Log density of the untruncated Cauchy on the real line.
    pub fn full_log_pdf(&self, z: f64) -> f64 {
        let u = (z - self.location) / self.scale;
        -(PI * self.scale).ln() - ln_1p_square(u)
    }

    /// The untruncated density as a normalised target (for truncation loss).
    pub fn full_target(&self) -> TargetPosterior {
        let c = self.clone();
        TargetPosterior::from_fn(1, TargetKind::AnalyticDensity { normalized: true }, move |z| c.full_log_pdf(z[0]))
    }

    pub fn into_target(self) -> TargetPosterior {
        TargetPosterior::analytic(self)
    }
}

/// log(1 + u²) without overflow for large |u|.
fn ln_1p_square(u: f64) -> f64 {
    let a = u.abs();
    if a > 1e150 {
        2.0 * a.ln()
    } else {
        (a * a).ln_1p()
    }
}

impl LogDensity for CauchyTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        self.full_log_pdf(z[0]) - self.log_mass
    }
}

/// Isotropic Gaussian component of [`GaussMixTarget`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

/// A mixture of isotropic Gaussians restricted and renormalised to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussMixTarget {
    pub components: Vec<GaussComponent>,
    pub support: Arc<SupportBox>,
    log_weights: Vec<f64>,
    log_z: f64,
}

impl GaussMixTarget {
    pub fn new(components: Vec<GaussComponent>, support: impl Into<Arc<SupportBox>>) -> Result<Self> {
        let support = support.into();
        if components.is_empty() {
            return Err(Error::invalid("mixture target needs at least one component"));
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("component weights must lie on the simplex"));
        }
        let mut log_masses = Vec::with_capacity(components.len());
        for c in &components {
            support.check_dim(&c.mean)?;
            log_masses.push(log_truncation_mass(&c.mean, c.sigma, &support)?);
        }
        let d = support.dim() as f64;
        let log_weights: Vec<f64> = components
            .iter()
            .map(|c| c.weight.ln() - d * (c.sigma.ln() + normal::LN_SQRT_2PI))
            .collect();
        let terms: Vec<f64> = components.iter().zip(&log_masses).map(|(c, m)| c.weight.ln() + m).collect();
        let log_z = log_sum_exp(&terms);
        Ok(Self {
            components,
            support,
            log_weights,
            log_z,
        })
    }

    /// Probability the untruncated mixture assigns to the box.
    pub fn box_mass(&self) -> f64 {
        self.log_z.exp()
    }

    /// The same density as a mixture of truncated atoms, when every mean lies in the box.
    pub fn as_mixture(&self) -> Result<MixtureDensity> {
        let mut atoms = Vec::with_capacity(self.components.len());
        let mut weights = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let atom = TruncatedGaussianAtom::new(c.mean.clone(), c.sigma, Arc::clone(&self.support))?;
            weights.push((c.weight.ln() + atom.trunc_mass().ln() - self.log_z).exp());
            atoms.push(atom);
        }
        MixtureDensity::new(atoms, weights)
    }

    pub fn into_target(self) -> TargetPosterior {
        TargetPosterior::analytic(self)
    }
}

impl LogDensity for GaussMixTarget {
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| {
                let r2: f64 = z.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
                lw - 0.5 * r2 / (c.sigma * c.sigma)
            })
            .collect();
        log_sum_exp(&terms) - self.log_z
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate_box, QuadratureSpec};

    #[test]
    fn cauchy_integrates_to_one() {
        let c = CauchyTarget::new(0.5, 0.7, SupportBox::interval(-5.0, 5.0).unwrap()).unwrap();
        let b = c.support.clone();
        let t = c.into_target();
        let mass = integrate_box(|z| t.log_target(z).exp(), &b, &QuadratureSpec::default()).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cauchy_box_mass_closed_form() {
        let c = CauchyTarget::new(0.0, 1.0, SupportBox::interval(-5.0, 5.0).unwrap()).unwrap();
        assert!((c.box_mass() - 2.0 / PI * 5f64.atan()).abs() < 1e-15);
    }

    #[test]
    fn gauss_mixture_integrates_to_one_and_matches_atom_form() {
        let b = SupportBox::interval(-2.0, 2.0).unwrap();
        let comps = vec![
            GaussComponent {
                weight: 0.3,
                mean: vec![-1.0],
                sigma: 0.4,
            },
            GaussComponent {
                weight: 0.7,
                mean: vec![1.5],
                sigma: 0.8,
            },
        ];
        let g = GaussMixTarget::new(comps, b.clone()).unwrap();
        let mass = integrate_box(|z| g.log_density(z).exp(), &b, &QuadratureSpec::default()).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-8);
        let m = g.as_mixture().unwrap();
        for z in [-1.9, -0.3, 0.0, 1.2, 1.99] {
            assert!((m.log_pdf(&[z]).unwrap() - g.log_density(&[z])).abs() < 1e-12);
        }
    }
}
