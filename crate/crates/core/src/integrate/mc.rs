use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{MixtureDensity, TruncatedGaussianAtom};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSpec {
    pub n_samples: usize,
    pub seed: u64,
}

impl McSpec {
    pub fn new(n_samples: usize, seed: u64) -> Result<Self> {
        let spec = Self { n_samples, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::invalid("Monte Carlo needs at least 2 samples"));
        }
        Ok(())
    }

    /// Same sample count on an independent stream.
    pub fn stream(&self, tag: u64) -> Self {
        Self {
            n_samples: self.n_samples,
            seed: derive_seed(self.seed, tag),
        }
    }
}

/// Mean with its standard error (`stderr = sd / √n`, sample standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// A value with no sampling error (quadrature results).
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, n: 0 }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, v) in values.iter().enumerate() {
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let stderr = if n > 1 {
            (m2.max(0.0) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { value: mean, stderr, n }
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &McEstimate) -> McEstimate {
        McEstimate {
            value: self.value - other.value,
            stderr: self.stderr.hypot(other.stderr),
            n: self.n.min(other.n),
        }
    }
}

/// Anything we can draw seeded samples from.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

impl Sampler for TruncatedGaussianAtom {
    fn dim(&self) -> usize {
        TruncatedGaussianAtom::dim(self)
    }
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.sample_into(rng, out)
    }
}

impl Sampler for MixtureDensity {
    fn dim(&self) -> usize {
        MixtureDensity::dim(self)
    }
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.sample_into(rng, out)
    }
}

/// Uniform draws over a box.
impl Sampler for crate::density::SupportBox {
    fn dim(&self) -> usize {
        crate::density::SupportBox::dim(self)
    }
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *o = self.lower()[i] + u * self.width(i);
        }
    }
}

/// E[f(z)] over `spec.n_samples` seeded draws. Fails fast on a non-finite value.
pub fn expectation_mc<S, F>(f: F, sampler: &S, spec: &McSpec) -> Result<McEstimate>
where
    S: Sampler + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut z = vec![0.0; sampler.dim()];
    let mut values = Vec::with_capacity(spec.n_samples);
    for index in 0..spec.n_samples {
        sampler.draw(&mut rng, &mut z);
        let v = f(&z);
        if !v.is_finite() {
            return Err(Error::NonFinite { index, point: z });
        }
        values.push(v);
    }
    Ok(McEstimate::from_values(&values))
}

/// Deterministic sub-seed derivation (splitmix64 finaliser).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut x = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
