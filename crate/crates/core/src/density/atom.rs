use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normal::{self, LN_SQRT_2PI};
use super::support::SupportBox;
use crate::error::{Error, Result};

/// P(N(mean, σ²I) ∈ box), as the product of per-dimension interval masses.
pub fn truncation_mass(mean: &[f64], sigma: f64, support: &SupportBox) -> Result<f64> {
    Ok(log_truncation_mass(mean, sigma, support)?.exp())
}

pub fn log_truncation_mass(mean: &[f64], sigma: f64, support: &SupportBox) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
    }
    support.check_dim(mean)?;
    Ok((0..support.dim())
        .map(|i| {
            let a = (support.lower()[i] - mean[i]) / sigma;
            let b = (support.upper()[i] - mean[i]) / sigma;
            normal::interval_mass(a, b).ln()
        })
        .sum())
}

#[derive(Debug, Clone, Copy)]
struct DimCache {
    alpha: f64,
    beta: f64,
    cdf_alpha: f64,
    cdf_beta: f64,
    mass: f64,
}

/// Isotropic Gaussian N(mean, σ²I) restricted and renormalised to a box.
#[derive(Debug, Clone)]
pub struct TruncatedGaussianAtom {
    mean: Vec<f64>,
    sigma: f64,
    support: Arc<SupportBox>,
    trunc_mass: f64,
    log_norm: f64,
    dims: Vec<DimCache>,
}

/// Serializable view of an atom (the box is stored once per mixture/family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    pub mean: Vec<f64>,
    pub sigma: f64,
}

impl TruncatedGaussianAtom {
    pub fn new(mean: Vec<f64>, sigma: f64, support: impl Into<Arc<SupportBox>>) -> Result<Self> {
        let support = support.into();
        support.check_dim(&mean)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !support.contains(&mean) {
            return Err(Error::invalid(format!("atom mean {mean:?} lies outside the support box")));
        }
        let dims: Vec<DimCache> = (0..support.dim())
            .map(|i| {
                let alpha = (support.lower()[i] - mean[i]) / sigma;
                let beta = (support.upper()[i] - mean[i]) / sigma;
                DimCache {
                    alpha,
                    beta,
                    cdf_alpha: normal::cdf(alpha),
                    cdf_beta: normal::cdf(beta),
                    mass: normal::interval_mass(alpha, beta),
                }
            })
            .collect();
        let log_mass: f64 = dims.iter().map(|c| c.mass.ln()).sum();
        if !log_mass.is_finite() {
            return Err(Error::Numeric("truncation mass underflowed".into()));
        }
        let d = mean.len() as f64;
        let log_norm = -d * (sigma.ln() + LN_SQRT_2PI) - log_mass;
        Ok(Self {
            mean,
            sigma,
            support,
            trunc_mass: log_mass.exp(),
            log_norm,
            dims,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn support_arc(&self) -> &Arc<SupportBox> {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn trunc_mass(&self) -> f64 {
        self.trunc_mass
    }

    pub fn params(&self) -> AtomParams {
        AtomParams {
            mean: self.mean.clone(),
            sigma: self.sigma,
        }
    }

    /// Same parameters (exact equality of mean and σ) over the same box.
    pub fn same_as(&self, other: &Self) -> bool {
        self.sigma == other.sigma && self.mean == other.mean && self.support == other.support
    }

    pub fn pdf(&self, z: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(z)?.exp())
    }

    /// log pdf; `-∞` outside the box.
    pub fn log_pdf(&self, z: &[f64]) -> Result<f64> {
        self.support.check_dim(z)?;
        Ok(self.log_pdf_unchecked(z))
    }

    /// log pdf without the dimension check.
    pub fn log_pdf_unchecked(&self, z: &[f64]) -> f64 {
        if !self.support.contains(z) {
            return f64::NEG_INFINITY;
        }
        self.log_kernel(z)
    }

    /// Untruncated log density shape plus the truncation normaliser, ignoring the box test.
    pub(crate) fn log_kernel(&self, z: &[f64]) -> f64 {
        let inv = 1.0 / self.sigma;
        let sq: f64 = z
            .iter()
            .zip(&self.mean)
            .map(|(x, m)| {
                let u = (x - m) * inv;
                u * u
            })
            .sum();
        self.log_norm - 0.5 * sq
    }

    /// Draw one point by per-dimension inverse-CDF sampling on the truncated interval.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (i, c) in self.dims.iter().enumerate() {
            let u: f64 = rng.random();
            let x = if c.alpha <= 0.0 {
                let p = c.cdf_alpha + u * (c.cdf_beta - c.cdf_alpha);
                normal::quantile(p).clamp(c.alpha, c.beta)
            } else {
                normal::truncated_quantile(c.alpha, c.beta, u)
            };
            let x = if x.is_finite() { x } else { 0.5 * (c.alpha + c.beta) };
            out[i] = (self.mean[i] + self.sigma * x).clamp(self.support.lower()[i], self.support.upper()[i]);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.sample_into(rng, &mut z);
        z
    }

    /// ∇_θ log s(z; θ) for θ = (mean_1..mean_d, σ), including the
    /// derivative of −log(truncation mass).
    pub fn score(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let s = self.sigma;
        let mut g = vec![0.0; d + 1];
        let mut dsigma = -(d as f64) / s;
        for i in 0..d {
            let c = &self.dims[i];
            let r = z[i] - self.mean[i];
            let pa = normal::pdf(c.alpha);
            let pb = normal::pdf(c.beta);
            // ∂μ log m = (φ(α) − φ(β)) / (σ m)
            g[i] = r / (s * s) - (pa - pb) / (s * c.mass);
            // ∂σ log m = (αφ(α) − βφ(β)) / (σ m); α, β may be large but φ decays first
            let ap = if pa > 0.0 { c.alpha * pa } else { 0.0 };
            let bp = if pb > 0.0 { c.beta * pb } else { 0.0 };
            dsigma += r * r / (s * s * s) - (ap - bp) / (s * c.mass);
        }
        g[d] = dsigma;
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_atom() -> TruncatedGaussianAtom {
        TruncatedGaussianAtom::new(vec![0.0], 1.0, SupportBox::interval(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn pdf_is_zero_outside_support() {
        assert_eq!(unit_atom().pdf(&[3.0]).unwrap(), 0.0);
        assert_eq!(unit_atom().log_pdf(&[-1.5]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn pdf_at_center_matches_frozen_value() {
        // P(|N(0,1)| <= 1) = 0.682689492137086 from adaptive quadrature of φ over [-1, 1],
        // frozen before the atom code existed; φ(0) = 0.398942280401433.
        let expected = 0.398_942_280_401_432_7 / 0.682_689_492_137_086;
        assert!((unit_atom().pdf(&[0.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            unit_atom().pdf(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn truncation_mass_rejects_bad_sigma() {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        assert!(truncation_mass(&[0.5], 0.0, &b).is_err());
        assert!(truncation_mass(&[0.5], -1.0, &b).is_err());
    }

    #[test]
    fn truncation_mass_limits() {
        let huge = SupportBox::interval(-1e6, 1e6).unwrap();
        assert!((truncation_mass(&[3.0], 2.0, &huge).unwrap() - 1.0).abs() < 1e-12);
        // mean at a corner of a 3-d box with a tiny sigma keeps half the mass per dimension
        let cube = SupportBox::cube(3, 0.0, 1.0).unwrap();
        let m = truncation_mass(&[0.0, 0.0, 0.0], 1e-3, &cube).unwrap();
        assert!((m - 0.125).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_box_and_are_seeded() {
        let b = SupportBox::new(vec![0.0, -2.0], vec![0.3, 5.0]).unwrap();
        let atom = TruncatedGaussianAtom::new(vec![0.0, 4.9], 0.05, b.clone()).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z = atom.sample(&mut r1);
            assert!(b.contains(&z));
            assert_eq!(z, atom.sample(&mut r2));
        }
    }

    #[test]
    fn mean_outside_box_is_rejected() {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        assert!(TruncatedGaussianAtom::new(vec![1.5], 0.3, b).is_err());
    }
}
