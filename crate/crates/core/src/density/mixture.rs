use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::atom::{AtomParams, TruncatedGaussianAtom};
use crate::error::{Error, Result};

/// Tolerance on Σw − 1 and on negative weights before exact renormalisation.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Weights below this are treated as inactive and dropped.
pub const ACTIVE_WEIGHT: f64 = 1e-12;

/// Convex combination of truncated Gaussian atoms over a common box.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    atoms: Vec<TruncatedGaussianAtom>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSnapshot {
    pub weights: Vec<f64>,
    pub atoms: Vec<AtomParams>,
}

impl MixtureDensity {
    /// Weights must lie on the simplex to within [`SIMPLEX_TOL`]; they are then renormalised exactly.
    pub fn new(atoms: Vec<TruncatedGaussianAtom>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("a mixture needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let support = atoms[0].support();
        if atoms.iter().any(|a| a.support() != support) {
            return Err(Error::invalid("all atoms of a mixture must share one support box"));
        }
        let n = weights.len() as f64;
        if weights.iter().any(|w| !w.is_finite() || *w < -SIMPLEX_TOL) {
            return Err(Error::invalid(format!("weights must be non-negative: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL * n.max(1.0) {
            return Err(Error::invalid(format!("weights must sum to 1 (sum = {sum})")));
        }
        Self::from_parts(atoms, weights)
    }

    pub fn single(atom: TruncatedGaussianAtom) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    /// Clip tiny negatives, drop inactive atoms, merge duplicates and renormalise.
    pub(crate) fn from_parts(atoms: Vec<TruncatedGaussianAtom>, weights: Vec<f64>) -> Result<Self> {
        let mut out_atoms: Vec<TruncatedGaussianAtom> = Vec::with_capacity(atoms.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(atoms.len());
        for (a, w) in atoms.into_iter().zip(weights) {
            let w = w.max(0.0);
            if let Some(j) = out_atoms.iter().position(|b| b.same_as(&a)) {
                out_w[j] += w;
            } else {
                out_atoms.push(a);
                out_w.push(w);
            }
        }
        let keep: Vec<bool> = out_w.iter().map(|w| *w > ACTIVE_WEIGHT).collect();
        if !keep.iter().any(|k| *k) {
            return Err(Error::Numeric("all mixture weights vanished".into()));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for ((a, w), k) in out_atoms.into_iter().zip(out_w).zip(keep) {
            if k {
                atoms.push(a);
                weights.push(w);
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[TruncatedGaussianAtom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn support(&self) -> &crate::density::SupportBox {
        self.atoms[0].support()
    }

    pub fn active_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > ACTIVE_WEIGHT).count()
    }

    pub fn snapshot(&self) -> MixtureSnapshot {
        MixtureSnapshot {
            weights: self.weights.clone(),
            atoms: self.atoms.iter().map(|a| a.params()).collect(),
        }
    }

    /// (1 − γ) q + γ s, merging `s` into an identical active atom if present.
    pub fn convex_update(&self, gamma: f64, s: &TruncatedGaussianAtom) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("step size must lie in [0, 1], got {gamma}")));
        }
        let mut atoms = self.atoms.clone();
        let mut weights: Vec<f64> = self.weights.iter().map(|w| (1.0 - gamma) * w).collect();
        atoms.push(s.clone());
        weights.push(gamma);
        Self::from_parts(atoms, weights)
    }

    /// Same atoms with new weights (checked against the simplex, then cleaned).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.atoms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.atoms.len(),
                got: weights.len(),
            });
        }
        Self::new(self.atoms.clone(), weights.to_vec())
    }

    /// The mixture's atoms plus `s` (if new), with `s` at weight zero. Used to form the active set.
    pub fn atoms_with(&self, s: &TruncatedGaussianAtom) -> (Vec<TruncatedGaussianAtom>, Vec<f64>) {
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        if !atoms.iter().any(|a| a.same_as(s)) {
            atoms.push(s.clone());
            weights.push(0.0);
        }
        (atoms, weights)
    }

    pub fn pdf(&self, z: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(z)?.exp())
    }

    /// log Σ w_i pdf_i(z) via max-shifted log-sum-exp; `-∞` exactly outside the box.
    pub fn log_pdf(&self, z: &[f64]) -> Result<f64> {
        self.support().check_dim(z)?;
        Ok(self.log_pdf_unchecked(z))
    }

    pub fn log_pdf_unchecked(&self, z: &[f64]) -> f64 {
        if !self.support().contains(z) {
            return f64::NEG_INFINITY;
        }
        let mut max = f64::NEG_INFINITY;
        let mut terms = [0.0f64; 32];
        let mut heap = Vec::new();
        let buf: &mut [f64] = if self.atoms.len() <= terms.len() {
            &mut terms[..self.atoms.len()]
        } else {
            heap.resize(self.atoms.len(), 0.0);
            &mut heap
        };
        for (t, (a, w)) in buf.iter_mut().zip(self.atoms.iter().zip(&self.weights)) {
            *t = w.ln() + a.log_kernel(z);
            if *t > max {
                max = *t;
            }
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        let s: f64 = buf.iter().map(|t| (t - max).exp()).sum();
        max + s.ln()
    }

    /// Pick an atom by its weight, then draw from it.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        self.atoms[idx].sample_into(rng, out);
    }

    /// `n` draws from a ChaCha stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut z = vec![0.0; self.dim()];
                self.sample_into(&mut rng, &mut z);
                z
            })
            .collect()
    }
}

/// Same as [`MixtureDensity::sample`].
pub fn sample_mixture(q: &MixtureDensity, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    Ok(q.sample(n, seed))
}

/// Same as [`MixtureDensity::log_pdf`].
pub fn mixture_log_pdf(q: &MixtureDensity, z: &[f64]) -> Result<f64> {
    q.log_pdf(z)
}
