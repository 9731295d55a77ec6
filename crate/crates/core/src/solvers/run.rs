use std::time::Instant;

use super::config::{Algorithm, Init, LmoChoice, SolverConfig};
use super::steps::{fixed_step_size, linesearch_step_size, weight_of};
use super::trace::{ConvergenceTrace, EventKind, IterationRecord, TraceEvent};
use super::workspace::Workspace;
use crate::density::{AtomFamilyConfig, MixtureDensity};
use crate::error::{Error, Result};
use crate::integrate::{derive_seed, Estimator, McEstimate, McSpec};
use crate::lmo::{grid_lmo, refine_atom, stochastic_lmo, LmoConfig, LmoResult};
use crate::objective::{ObjectiveConstants, TargetPosterior};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: ConvergenceTrace,
    pub mixture: MixtureDensity,
    pub constants: ObjectiveConstants,
    /// C_f used by the line search.
    pub curvature: f64,
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct SolverFailure {
    pub error: Error,
    pub trace: ConvergenceTrace,
    pub mixture: Option<MixtureDensity>,
}

/// The estimator used for all expectations of a run: quadrature for d ≤ 2,
/// otherwise seeded Monte Carlo with `mc_samples` draws per atom.
pub fn run_estimator(cfg: &SolverConfig, dim: usize) -> Estimator {
    Estimator::auto(
        dim,
        McSpec {
            n_samples: cfg.mc_samples,
            seed: derive_seed(cfg.seed, 0x0b1e),
        },
    )
}

/// Greedy outer loop: T rounds of oracle call plus the configured step.
pub fn run(
    cfg: &SolverConfig,
    family: &AtomFamilyConfig,
    target: &TargetPosterior,
) -> std::result::Result<RunOutput, SolverFailure> {
    let mut trace = ConvergenceTrace {
        objective_label: target.objective_label().to_string(),
        ..ConvergenceTrace::default()
    };
    let fail = |error: Error, trace: ConvergenceTrace, mixture: Option<MixtureDensity>| SolverFailure {
        error,
        trace,
        mixture,
    };
    if let Err(e) = check_inputs(cfg, family, target) {
        return Err(fail(e, trace, None));
    }
    let q0 = match initial_mixture(cfg, family) {
        Ok(q) => q,
        Err(e) => return Err(fail(e, trace, None)),
    };
    let constants = ObjectiveConstants::for_family(family);
    let curvature = cfg.curvature.unwrap_or(constants.curvature_bound);
    let est = run_estimator(cfg, family.dim());
    let mut ws = Workspace::new(target, est);
    let started = Instant::now();
    let elapsed = || started.elapsed().as_secs_f64() * 1e3;

    let mut q = q0;
    let mut objective = match ws.objective(&q) {
        Ok(o) => o,
        Err(e) => return Err(fail(e, trace, Some(q))),
    };
    trace.records.push(IterationRecord {
        t: 0,
        objective,
        gamma: None,
        gap: None,
        lmo_value: None,
        active_atoms: q.active_count(),
        weights: q.weights().to_vec(),
        wallclock_ms: elapsed(),
    });

    let mut stalled = 0;
    for t in 0..cfg.iterations {
        let step = iterate(cfg, family, target, &est, &mut ws, &q, objective, t, curvature, &mut trace.events);
        let (next, gamma, gap, lmo) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace, Some(q))),
        };
        q = next;
        objective = match ws.objective(&q) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, trace, Some(q))),
        };
        trace.records.push(IterationRecord {
            t: t + 1,
            objective,
            gamma: Some(gamma),
            gap: Some(gap),
            lmo_value: Some(lmo.linear_value.value),
            active_atoms: q.active_count(),
            weights: q.weights().to_vec(),
            wallclock_ms: elapsed(),
        });
        if gap.value <= 2.0 * gap.stderr + 1e-12 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= cfg.stall_patience {
            trace.converged = true;
            trace.events.push(TraceEvent {
                t: t + 1,
                kind: EventKind::Converged,
                detail: format!("gap within noise of zero for {stalled} iterations"),
            });
            break;
        }
    }
    Ok(RunOutput {
        trace,
        mixture: q,
        constants,
        curvature,
    })
}

fn check_inputs(cfg: &SolverConfig, family: &AtomFamilyConfig, target: &TargetPosterior) -> Result<()> {
    cfg.validate()?;
    if target.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: target.dim(),
        });
    }
    target.validate_on(&family.support)
}

fn initial_mixture(cfg: &SolverConfig, family: &AtomFamilyConfig) -> Result<MixtureDensity> {
    match &cfg.init {
        Init::Center => Ok(MixtureDensity::single(family.center_atom()?)),
        Init::Mixture(q) => {
            if q.support() != &*family.support {
                return Err(Error::invalid("initial mixture lives on a different box than the family"));
            }
            if !q.atoms().iter().all(|a| family.contains(a)) {
                return Err(Error::invalid("initial mixture has atoms outside the family"));
            }
            Ok(q.clone())
        }
    }
}

fn lmo_config_for(cfg: &SolverConfig, t: usize) -> LmoConfig {
    let base = match &cfg.lmo {
        LmoChoice::Stochastic(c) => c.clone(),
        LmoChoice::Grid(_) => LmoConfig {
            seed: cfg.seed,
            ..LmoConfig::default()
        },
    };
    LmoConfig {
        seed: derive_seed(base.seed, t as u64 + 1),
        ..base
    }
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    cfg: &SolverConfig,
    family: &AtomFamilyConfig,
    target: &TargetPosterior,
    est: &Estimator,
    ws: &mut Workspace<'_>,
    q: &MixtureDensity,
    objective: McEstimate,
    t: usize,
    curvature: f64,
    events: &mut Vec<TraceEvent>,
) -> Result<(MixtureDensity, f64, McEstimate, LmoResult)> {
    let lmo_cfg = lmo_config_for(cfg, t);
    let lmo = match &cfg.lmo {
        LmoChoice::Grid(spec) => grid_lmo(q, target, family, spec, est)?,
        LmoChoice::Stochastic(_) => stochastic_lmo(q, target, &lmo_cfg, family, &est.stream(t as u64 + 1))?,
    };
    let s = &lmo.atom;
    let e_s = ws.expect_g(q, s)?;
    let gap = objective.minus(&e_s);

    let linesearch = |events: &mut Vec<TraceEvent>| -> Result<(MixtureDensity, f64)> {
        let gamma = linesearch_step_size(gap.value, curvature);
        if gamma == 0.0 {
            events.push(TraceEvent {
                t: t + 1,
                kind: EventKind::Stall,
                detail: if gap.value > 0.0 {
                    format!("step gap/C_f vanishes (gap {}, C_f {curvature})", gap.value)
                } else {
                    format!("gap {} not positive", gap.value)
                },
            });
            return Ok((q.clone(), 0.0));
        }
        Ok((q.convex_update(gamma, s)?, gamma))
    };

    let (mut next, mut gamma) = match cfg.algorithm {
        Algorithm::FwFixed => {
            let gamma = fixed_step_size(t);
            (q.convex_update(gamma, s)?, gamma)
        }
        Algorithm::FwLinesearch => linesearch(events)?,
        Algorithm::NormCorrective => {
            let out = ws.norm_corrective(q, s, cfg.l_surrogate, cfg.l_relative, cfg.qp_tol, cfg.qp_max_iter)?;
            if !out.converged {
                events.push(TraceEvent {
                    t: t + 1,
                    kind: EventKind::QpFallback,
                    detail: "weight QP did not converge".into(),
                });
                linesearch(events)?
            } else {
                let (mixture, halvings) = backtrack(ws, q, &out.mixture, &objective)?;
                if halvings > 0 {
                    events.push(TraceEvent {
                        t: t + 1,
                        kind: EventKind::Safeguard,
                        detail: format!("surrogate step shortened by 2^-{halvings}"),
                    });
                }
                let g = weight_of(&mixture, s);
                (mixture, g)
            }
        }
        Algorithm::FullyCorrective => {
            let out = ws.fully_corrective(q, s, cfg.inner_tol, cfg.inner_max_iter)?;
            if !out.converged {
                events.push(TraceEvent {
                    t: t + 1,
                    kind: EventKind::InnerBudget,
                    detail: "inner weight solver hit its iteration budget".into(),
                });
            }
            let g = weight_of(&out.mixture, s);
            (out.mixture, g)
        }
    };

    if cfg.correct_atoms {
        let g = |z: &[f64]| next.log_pdf_unchecked(z) - target.log_target(z);
        let mut atoms = next.atoms().to_vec();
        let mut changed = false;
        for (i, a) in next.atoms().iter().enumerate() {
            let c = LmoConfig {
                seed: derive_seed(lmo_cfg.seed, i as u64),
                restarts: 1,
                ..lmo_cfg.clone()
            };
            let refined = refine_atom(g, a, &c, family, est)?;
            if !refined.atom.same_as(a) {
                changed = true;
                events.push(TraceEvent {
                    t: t + 1,
                    kind: EventKind::AtomCorrected,
                    detail: format!("atom {i} moved to mean {:?}, sigma {}", refined.atom.mean(), refined.atom.sigma()),
                });
                atoms[i] = refined.atom;
            }
        }
        if changed {
            next = MixtureDensity::from_parts(atoms, next.weights().to_vec())?;
            gamma = weight_of(&next, s);
        }
    }
    Ok((next, gamma, gap, lmo))
}

/// Whether `next` has a larger objective than `current`.
/// Both objectives reuse the cached nodes of the shared atoms, so the
/// comparison is between two evaluations of one deterministic function of the
/// weights and needs no noise allowance.
fn increases(ws: &mut Workspace<'_>, next: &MixtureDensity, current: &McEstimate) -> Result<bool> {
    let o = ws.objective(next)?;
    Ok(o.value > current.value + 1e-12 * (1.0 + current.value.abs()))
}

const MAX_HALVINGS: u32 = 30;

/// The point of the segment from q to `full` at τ = 2^-k for the smallest k
/// that does not increase the objective. The norm-corrective solution is a
/// descent direction, so a short enough step always qualifies; if none does
/// within `MAX_HALVINGS`, q is kept.
fn backtrack(
    ws: &mut Workspace<'_>,
    q: &MixtureDensity,
    full: &MixtureDensity,
    current: &McEstimate,
) -> Result<(MixtureDensity, u32)> {
    if !increases(ws, full, current)? {
        return Ok((full.clone(), 0));
    }
    let mut atoms = q.atoms().to_vec();
    let mut from = q.weights().to_vec();
    let mut to = vec![0.0; atoms.len()];
    for (a, w) in full.atoms().iter().zip(full.weights()) {
        match atoms.iter().position(|b| b.same_as(a)) {
            Some(i) => to[i] = *w,
            None => {
                atoms.push(a.clone());
                from.push(0.0);
                to.push(*w);
            }
        }
    }
    let mut tau = 1.0;
    for k in 1..=MAX_HALVINGS {
        tau *= 0.5;
        let w: Vec<f64> = from.iter().zip(&to).map(|(a, b)| (1.0 - tau) * a + tau * b).collect();
        let cand = MixtureDensity::from_parts(atoms.clone(), w)?;
        if !increases(ws, &cand, current)? {
            return Ok((cand, k));
        }
    }
    Ok((q.clone(), MAX_HALVINGS))
}
