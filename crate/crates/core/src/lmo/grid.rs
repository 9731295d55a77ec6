use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prefer, LmoResult};
use crate::density::{AtomFamilyConfig, MixtureDensity, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::{atom_expectation, Estimator, McEstimate};
use crate::objective::{kl_estimate, linear_value, TargetPosterior};

/// Exhaustive oracle grid: evenly spaced means per dimension (snapped to the
/// family's quantization) times geometrically spaced σ values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub means_per_dim: usize,
    /// 1 means σ_min only.
    pub sigmas: usize,
}

/// Grid atoms in lexicographic (mean, σ) order, duplicates removed.
pub fn grid_atoms(family: &AtomFamilyConfig, spec: &GridSpec) -> Result<Vec<TruncatedGaussianAtom>> {
    if spec.means_per_dim == 0 || spec.sigmas == 0 {
        return Err(Error::invalid("grid must have at least one mean and one sigma"));
    }
    let support = &family.support;
    let d = support.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let n = spec.means_per_dim;
            let mut axis: Vec<f64> = (0..n)
                .map(|k| {
                    let x = if n == 1 {
                        0.5 * (support.lower()[i] + support.upper()[i])
                    } else {
                        support.lower()[i] + support.width(i) * k as f64 / (n - 1) as f64
                    };
                    let mut m = support.center();
                    m[i] = x;
                    family.quantize_mean(&m)[i]
                })
                .collect();
            axis.dedup();
            axis
        })
        .collect();
    let sigmas: Vec<f64> = if spec.sigmas == 1 {
        vec![family.sigma_min]
    } else {
        let ratio = (family.sigma_max / family.sigma_min).ln();
        (0..spec.sigmas)
            .map(|k| {
                if k + 1 == spec.sigmas {
                    family.sigma_max
                } else {
                    family.sigma_min * (ratio * k as f64 / (spec.sigmas - 1) as f64).exp()
                }
            })
            .collect()
    };
    let total: usize = axes.iter().map(Vec::len).product();
    let mut atoms = Vec::with_capacity(total * sigmas.len());
    for k in 0..total {
        let mut idx = k;
        let mut mean = vec![0.0; d];
        for i in (0..d).rev() {
            mean[i] = axes[i][idx % axes[i].len()];
            idx /= axes[i].len();
        }
        for &s in &sigmas {
            atoms.push(family.atom(&mean, s)?);
        }
    }
    Ok(atoms)
}

/// Exact argmin of E_s[log q − log p] over the grid.
pub fn grid_lmo(
    q: &MixtureDensity,
    target: &TargetPosterior,
    family: &AtomFamilyConfig,
    spec: &GridSpec,
    est: &Estimator,
) -> Result<LmoResult> {
    grid_lmo_with(|z: &[f64]| q.log_pdf_unchecked(z) - target.log_target(z), family, spec, est)
}

pub fn grid_lmo_with<G>(g: G, family: &AtomFamilyConfig, spec: &GridSpec, est: &Estimator) -> Result<LmoResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    grid_lmo_over(&grid_atoms(family, spec)?, g, est)
}

/// Exact argmin over an explicit atom list, ties broken toward the
/// lexicographically smallest (mean, σ).
pub fn grid_lmo_over<G>(atoms: &[TruncatedGaussianAtom], g: G, est: &Estimator) -> Result<LmoResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if atoms.is_empty() {
        return Err(Error::invalid("empty LMO grid"));
    }
    let values: Vec<Result<McEstimate>> = atoms.par_iter().map(|a| atom_expectation(a, &g, est)).collect();
    let mut best: Option<(usize, McEstimate)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if !v.value.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                point: atoms[i].mean().to_vec(),
            });
        }
        let better = match &best {
            None => true,
            Some((j, bv)) => prefer(&atoms[i], v.value, &atoms[*j], bv.value),
        };
        if better {
            best = Some((i, v));
        }
    }
    let (i, linear_value) = best.expect("non-empty grid");
    Ok(LmoResult {
        atom: atoms[i].clone(),
        linear_value,
        delta_measured: Some(1.0),
    })
}

/// Outcome of comparing an oracle answer with the exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMeasure {
    /// ⟨y, s̃ − q⟩ / ⟨y, s* − q⟩ clipped to [0, 1]; 0 when s̃ is not a descent direction.
    Delta(f64),
    /// The exact oracle finds no descent direction: q is optimal over the grid.
    Converged,
}

/// δ in ⟨y, s̃ − q⟩ ≤ δ · min_s ⟨y, s − q⟩, with y = log q − log p and all
/// inner products re-evaluated with `est`.
pub fn measure_delta(
    candidate: &LmoResult,
    exact: &LmoResult,
    q: &MixtureDensity,
    target: &TargetPosterior,
    est: &Estimator,
) -> Result<DeltaMeasure> {
    let est = est.stream(0xde17a);
    let eq = kl_estimate(q, target, &est)?.value;
    let cand = linear_value(q, &candidate.atom, target, &est)?.value - eq;
    let best = linear_value(q, &exact.atom, target, &est)?.value - eq;
    if best >= 0.0 {
        return Ok(DeltaMeasure::Converged);
    }
    Ok(DeltaMeasure::Delta((cand / best).clamp(0.0, 1.0)))
}
