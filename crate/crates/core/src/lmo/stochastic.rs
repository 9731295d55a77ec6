use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::score::score_gradient_rng;
use super::{prefer, LmoConfig, LmoResult};
use crate::density::{AtomFamilyConfig, MixtureDensity, SupportBox, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::{atom_expectation, derive_seed, Estimator, McEstimate};
use crate::objective::TargetPosterior;

const PROBE_DRAWS: usize = 256;
const STEP_DECAY: f64 = 0.99;

/// Stochastic LMO for g = log q − log p.
pub fn stochastic_lmo(
    q: &MixtureDensity,
    target: &TargetPosterior,
    cfg: &LmoConfig,
    family: &AtomFamilyConfig,
    est: &Estimator,
) -> Result<LmoResult> {
    if q.dim() != target.dim() || q.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: q.dim(),
        });
    }
    stochastic_lmo_with(|z: &[f64]| q.log_pdf_unchecked(z) - target.log_target(z), cfg, family, est)
}

/// Stochastic LMO for an arbitrary pointwise gradient g.
///
/// Each restart runs `inner_steps` projected score-gradient steps. Restart 0
/// starts at the best of a uniform probe of the box, the others at uniform
/// random means. The start and end point of every chain are scored with `est`
/// (on one shared stream) and the smallest E_s[g] wins.
pub fn stochastic_lmo_with<G>(g: G, cfg: &LmoConfig, family: &AtomFamilyConfig, est: &Estimator) -> Result<LmoResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let support = &family.support;
    let probe = probe_min(&g, support, derive_seed(cfg.seed, 0x9b0b))?;
    let eval = est.stream(derive_seed(cfg.seed, 0xe7a1));

    let chains: Vec<Result<Option<Vec<TruncatedGaussianAtom>>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let start = if r == 0 {
                probe.clone()
            } else {
                (0..support.dim())
                    .map(|i| rng.random_range(support.lower()[i]..=support.upper()[i]))
                    .collect()
            };
            let sigma = if cfg.learn_sigma { family.sigma_max } else { family.sigma_min };
            run_chain(&g, cfg, family, start, sigma, &mut rng)
        })
        .collect();

    let mut candidates = Vec::new();
    for c in chains {
        if let Some(atoms) = c? {
            candidates.extend(atoms);
        }
    }
    pick_best(candidates, &g, &eval)
}

/// One chain started at an existing atom's parameters; returns whichever of
/// the start and the end has the smaller E_s[g].
pub(crate) fn refine_atom<G>(
    g: G,
    atom: &TruncatedGaussianAtom,
    cfg: &LmoConfig,
    family: &AtomFamilyConfig,
    est: &Estimator,
) -> Result<LmoResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates = vec![atom.clone()];
    if let Some(atoms) = run_chain(&g, cfg, family, atom.mean().to_vec(), atom.sigma(), &mut rng)? {
        candidates.push(atoms[1].clone());
    }
    pick_best(candidates, &g, &est.stream(derive_seed(cfg.seed, 0xe7a1)))
}

fn pick_best<G>(mut candidates: Vec<TruncatedGaussianAtom>, g: &G, eval: &Estimator) -> Result<LmoResult>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if candidates.is_empty() {
        return Err(Error::OracleFailure("every LMO restart diverged".into()));
    }
    let values: Vec<Result<McEstimate>> = candidates.par_iter().map(|a| atom_expectation(a, g, eval)).collect();
    let mut best: Option<(usize, McEstimate)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if !v.value.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((j, bv)) => prefer(&candidates[i], v.value, &candidates[*j], bv.value),
        };
        if better {
            best = Some((i, v));
        }
    }
    let (i, linear_value) = best.ok_or_else(|| Error::OracleFailure("no LMO candidate had a finite value".into()))?;
    Ok(LmoResult {
        atom: candidates.swap_remove(i),
        linear_value,
        delta_measured: None,
    })
}

/// Mean of the best of `PROBE_DRAWS` uniform draws in the box.
fn probe_min<G>(g: &G, support: &SupportBox, seed: u64) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = support.dim();
    let mut best = support.center();
    let mut best_v = g(&best);
    let mut z = vec![0.0; d];
    for index in 0..PROBE_DRAWS {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = rng.random_range(support.lower()[i]..=support.upper()[i]);
        }
        let v = g(&z);
        if !v.is_finite() {
            return Err(Error::NonFinite { index, point: z.clone() });
        }
        if !best_v.is_finite() || v < best_v {
            best_v = v;
            best.copy_from_slice(&z);
        }
    }
    Ok(best)
}

/// One projected-gradient chain. Returns the start and end atoms, or `None` if
/// the parameters stopped being finite.
///
/// The step is taken from the clamped continuous mean; only the atom used to
/// draw samples is snapped to the quantization grid, so strides wider than a
/// single step do not freeze the chain.
fn run_chain<G, R>(
    g: &G,
    cfg: &LmoConfig,
    family: &AtomFamilyConfig,
    start: Vec<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<Option<Vec<TruncatedGaussianAtom>>>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let support = Arc::clone(&family.support);
    let d = support.dim();
    let mut mean = support.clamp(&start);
    let mut sigma = sigma;
    let first = family.atom(&mean, sigma)?;
    let mut current = first.clone();
    let mut eta = cfg.step_size;
    for _ in 0..cfg.inner_steps {
        let sg = score_gradient_rng(&current, g, cfg, rng)?;
        for i in 0..d {
            mean[i] -= eta * sg.gradient[i];
        }
        if cfg.learn_sigma {
            sigma -= eta * sg.gradient[d];
        }
        if mean.iter().any(|m| !m.is_finite()) || !sigma.is_finite() {
            return Ok(None);
        }
        mean = support.clamp(&mean);
        sigma = sigma.clamp(family.sigma_min, family.sigma_max);
        current = family.atom(&mean, sigma)?;
        eta *= STEP_DECAY;
    }
    Ok(Some(vec![first, current]))
}
