use serde::{Deserialize, Serialize};

use super::workspace::Workspace;
use crate::density::{MixtureDensity, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::Estimator;
use crate::objective::TargetPosterior;

/// γ_t = 2/(t+2).
pub fn fixed_step_size(t: usize) -> f64 {
    2.0 / (t as f64 + 2.0)
}

/// γ = clip_[0,1](gap / C_f); zero when the gap is not positive.
pub fn linesearch_step_size(gap: f64, curvature: f64) -> f64 {
    if !(gap > 0.0) {
        0.0
    } else {
        (gap / curvature).min(1.0)
    }
}

/// q ← (1 − γ)q + γs with γ = 2/(t+2). Returns the new mixture and γ.
pub fn fw_step_fixed(q: &MixtureDensity, t: usize, s: &TruncatedGaussianAtom) -> Result<(MixtureDensity, f64)> {
    let gamma = fixed_step_size(t);
    Ok((q.convex_update(gamma, s)?, gamma))
}

/// q ← (1 − γ)q + γs with γ = clip(gap / curvature). A non-positive gap leaves q unchanged.
pub fn fw_step_linesearch(
    q: &MixtureDensity,
    s: &TruncatedGaussianAtom,
    gap: f64,
    curvature: f64,
) -> Result<(MixtureDensity, f64)> {
    if !(curvature > 0.0) {
        return Err(Error::invalid("curvature must be positive"));
    }
    let gamma = linesearch_step_size(gap, curvature);
    if gamma == 0.0 {
        return Ok((q.clone(), 0.0));
    }
    Ok((q.convex_update(gamma, s)?, gamma))
}

/// Settings shared by the two corrective steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectiveSpec {
    pub l_surrogate: f64,
    pub l_relative: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub estimator: Estimator,
}

#[derive(Debug, Clone)]
pub struct CorrectiveStep {
    pub mixture: MixtureDensity,
    /// Weight of `s` in the new mixture.
    pub gamma: f64,
    /// Whether the weight sub-problem met its tolerance.
    pub converged: bool,
}

pub(crate) fn weight_of(q: &MixtureDensity, s: &TruncatedGaussianAtom) -> f64 {
    q.atoms()
        .iter()
        .zip(q.weights())
        .find(|(a, _)| a.same_as(s))
        .map(|(_, w)| *w)
        .unwrap_or(0.0)
}

/// Re-fit the weights of q's atoms plus `s` to b = q − ∇f(q)/L in L2, where
/// ⟨s_i, b⟩ = ⟨s_i, q⟩ − E_{s_i}[log q − log p]/L.
pub fn norm_corrective_step(
    q: &MixtureDensity,
    s: &TruncatedGaussianAtom,
    target: &TargetPosterior,
    spec: &CorrectiveSpec,
) -> Result<CorrectiveStep> {
    let mut ws = Workspace::new(target, spec.estimator);
    let out = ws.norm_corrective(q, s, spec.l_surrogate, spec.l_relative, spec.tol, spec.max_iter)?;
    Ok(CorrectiveStep {
        gamma: weight_of(&out.mixture, s),
        mixture: out.mixture,
        converged: out.converged,
    })
}

/// Re-fit the weights of q's atoms plus `s` to minimise the objective itself.
pub fn fully_corrective_step(
    q: &MixtureDensity,
    s: &TruncatedGaussianAtom,
    target: &TargetPosterior,
    spec: &CorrectiveSpec,
) -> Result<CorrectiveStep> {
    let mut ws = Workspace::new(target, spec.estimator);
    let out = ws.fully_corrective(q, s, spec.tol, spec.max_iter)?;
    Ok(CorrectiveStep {
        gamma: weight_of(&out.mixture, s),
        mixture: out.mixture,
        converged: out.converged,
    })
}
