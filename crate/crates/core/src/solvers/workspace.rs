use std::collections::HashMap;

use rayon::prelude::*;

use super::gram::GramCache;
use super::qp::{project_simplex, solve_simplex_qp, SimplexQpProblem};
use crate::density::{MixtureDensity, TruncatedGaussianAtom};
use crate::error::Result;
use crate::integrate::{derive_seed, Estimator, McEstimate, NodeSet};
use crate::objective::TargetPosterior;

/// Fixed integration nodes of one atom together with log p at those nodes.
struct Entry {
    nodes: NodeSet,
    log_p: Vec<f64>,
}

fn atom_key(a: &TruncatedGaussianAtom) -> Vec<u64> {
    a.mean().iter().map(|m| m.to_bits()).chain(std::iter::once(a.sigma().to_bits())).collect()
}

/// Per-run caches: every atom gets one node set (quadrature nodes, or seeded
/// draws shared across iterations) and one evaluation of log p on it.
pub(crate) struct Workspace<'a> {
    target: &'a TargetPosterior,
    est: Estimator,
    entries: HashMap<Vec<u64>, Entry>,
    gram: GramCache,
}

pub(crate) struct CorrectiveOutcome {
    pub mixture: MixtureDensity,
    pub converged: bool,
}

impl<'a> Workspace<'a> {
    pub fn new(target: &'a TargetPosterior, est: Estimator) -> Self {
        Self {
            target,
            est,
            entries: HashMap::new(),
            gram: GramCache::new(),
        }
    }

    fn ensure(&mut self, atoms: &[TruncatedGaussianAtom]) -> Result<()> {
        let missing: Vec<&TruncatedGaussianAtom> = atoms.iter().filter(|a| !self.entries.contains_key(&atom_key(a))).collect();
        let built: Vec<Result<(Vec<u64>, Entry)>> = missing
            .par_iter()
            .map(|a| {
                let key = atom_key(a);
                let tag = key.iter().fold(0x5eed_u64, |h, b| derive_seed(h, *b));
                let nodes = NodeSet::for_atom(a, &self.est.stream(tag))?;
                let log_p = (0..nodes.len()).map(|k| self.target.log_target(nodes.point(k))).collect();
                Ok((key, Entry { nodes, log_p }))
            })
            .collect();
        for b in built {
            let (k, e) = b?;
            self.entries.insert(k, e);
        }
        Ok(())
    }

    fn entry(&self, a: &TruncatedGaussianAtom) -> &Entry {
        &self.entries[&atom_key(a)]
    }

    /// E_s[log q − log p] on the cached nodes of `s`.
    pub fn expect_g(&mut self, q: &MixtureDensity, s: &TruncatedGaussianAtom) -> Result<McEstimate> {
        self.ensure(std::slice::from_ref(s))?;
        Ok(self.expect_g_cached(q, s))
    }

    fn expect_g_cached(&self, q: &MixtureDensity, s: &TruncatedGaussianAtom) -> McEstimate {
        let e = self.entry(s);
        let values: Vec<f64> = (0..e.nodes.len())
            .map(|k| q.log_pdf_unchecked(e.nodes.point(k)) - e.log_p[k])
            .collect();
        e.nodes.expect(&values)
    }

    /// E_q[log q − log p] = Σ w_i E_{s_i}[log q − log p].
    pub fn objective(&mut self, q: &MixtureDensity) -> Result<McEstimate> {
        self.ensure(q.atoms())?;
        let parts: Vec<McEstimate> = q.atoms().par_iter().map(|a| self.expect_g_cached(q, a)).collect();
        Ok(combine(q.weights(), &parts))
    }

    /// Weights over q's atoms plus `s` fitted in L2 to b = q − ∇f(q)/L.
    pub fn norm_corrective(
        &mut self,
        q: &MixtureDensity,
        s: &TruncatedGaussianAtom,
        l_surrogate: f64,
        l_relative: bool,
        tol: f64,
        max_iter: usize,
    ) -> Result<CorrectiveOutcome> {
        let (atoms, w0) = q.atoms_with(s);
        let n = atoms.len();
        self.ensure(&atoms)?;
        let log_g = self.gram.log_gram(&atoms)?;
        let log_kappa = (0..n).map(|i| log_g[i * n + i]).fold(f64::NEG_INFINITY, f64::max);
        let gram: Vec<f64> = log_g.iter().map(|v| (v - log_kappa).exp()).collect();
        let scale = if l_relative { 1.0 / l_surrogate } else { (-log_kappa).exp() / l_surrogate };
        let eg: Vec<McEstimate> = atoms.par_iter().map(|a| self.expect_g_cached(q, a)).collect();
        let linear: Vec<f64> = (0..n)
            .map(|i| {
                let gw: f64 = (0..n).map(|j| gram[i * n + j] * w0[j]).sum();
                gw - scale * eg[i].value
            })
            .collect();
        let problem = SimplexQpProblem::new(gram, linear, 0.0)?;
        let sol = solve_simplex_qp(&problem, tol, max_iter)?;
        Ok(CorrectiveOutcome {
            mixture: MixtureDensity::from_parts(atoms, sol.weights)?,
            converged: sol.converged,
        })
    }

    /// Weights over q's atoms plus `s` minimising the node-discretised objective.
    pub fn fully_corrective(
        &mut self,
        q: &MixtureDensity,
        s: &TruncatedGaussianAtom,
        tol: f64,
        max_iter: usize,
    ) -> Result<CorrectiveOutcome> {
        let (atoms, w0) = q.atoms_with(s);
        self.ensure(&atoms)?;
        let problem = DiscreteKl::new(self, &atoms);
        let (w, converged) = problem.minimize(w0, tol, max_iter);
        Ok(CorrectiveOutcome {
            mixture: MixtureDensity::from_parts(atoms, w)?,
            converged,
        })
    }
}

/// Weighted sum of estimates with independent errors.
pub(crate) fn combine(weights: &[f64], parts: &[McEstimate]) -> McEstimate {
    let value = weights.iter().zip(parts).map(|(w, p)| w * p.value).sum();
    let var: f64 = weights.iter().zip(parts).map(|(w, p)| (w * p.stderr).powi(2)).sum();
    McEstimate {
        value,
        stderr: var.sqrt(),
        n: parts.iter().map(|p| p.n).sum(),
    }
}

/// F(w) = Σ_i w_i Σ_k ν_ik [log q_w(x_ik) − log p(x_ik)] with q_w = Σ_j w_j s_j,
/// on the fixed nodes (x_ik, ν_ik) of each atom.
struct DiscreteKl {
    m: usize,
    /// Per atom i: node weights, log p at nodes, and log s_j at nodes (k-major, m per node).
    blocks: Vec<Block>,
}

struct Block {
    nu: Vec<f64>,
    log_p: Vec<f64>,
    log_s: Vec<f64>,
}

impl DiscreteKl {
    fn new(ws: &Workspace<'_>, atoms: &[TruncatedGaussianAtom]) -> Self {
        let m = atoms.len();
        let blocks = atoms
            .par_iter()
            .map(|a| {
                let e = ws.entry(a);
                let nk = e.nodes.len();
                let mut log_s = Vec::with_capacity(nk * m);
                for k in 0..nk {
                    let z = e.nodes.point(k);
                    log_s.extend(atoms.iter().map(|b| b.log_pdf_unchecked(z)));
                }
                let nu = if e.nodes.is_monte_carlo() {
                    vec![1.0 / nk as f64; nk]
                } else {
                    e.nodes.weights().to_vec()
                };
                Block {
                    nu,
                    log_p: e.log_p.clone(),
                    log_s,
                }
            })
            .collect::<Vec<_>>();
        Self { m, blocks }
    }

    /// F(w), ∇F(w) and optionally H_jl = Σ_i w_i Σ_k ν_ik s_j s_l / q_w² at the
    /// nodes, a positive semidefinite matrix equal to ∫ s_j s_l / q_w in the
    /// continuum limit (the exact Hessian of the undiscretised objective).
    fn eval(&self, w: &[f64], want_grad: bool, want_hess: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let m = self.m;
        let log_w: Vec<f64> = w.iter().map(|x| if *x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
        let gm = if want_grad { m } else { 0 };
        let hm = if want_hess { m * m } else { 0 };
        let per: Vec<(f64, Vec<f64>, Vec<f64>)> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let mut inner = 0.0;
                let mut grad = vec![0.0; gm];
                let mut hess = vec![0.0; hm];
                let mut ratio = vec![0.0; m];
                for k in 0..b.nu.len() {
                    let ls = &b.log_s[k * m..(k + 1) * m];
                    let mx = ls.iter().zip(&log_w).map(|(s, lw)| s + lw).fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = ls.iter().zip(&log_w).map(|(s, lw)| (s + lw - mx).exp()).sum();
                    let log_q = mx + sum.ln();
                    inner += b.nu[k] * (log_q - b.log_p[k]);
                    if (want_grad || want_hess) && w[i] > 0.0 {
                        for j in 0..m {
                            ratio[j] = (ls[j] - log_q).exp();
                        }
                        let c = w[i] * b.nu[k];
                        if want_grad {
                            for j in 0..m {
                                grad[j] += c * ratio[j];
                            }
                        }
                        if want_hess {
                            for j in 0..m {
                                let cj = c * ratio[j];
                                for l in j..m {
                                    hess[j * m + l] += cj * ratio[l];
                                }
                            }
                        }
                    }
                }
                (inner, grad, hess)
            })
            .collect();
        let mut f = 0.0;
        let mut grad = vec![0.0; gm];
        let mut hess = vec![0.0; hm];
        for (i, (inner, g, h)) in per.iter().enumerate() {
            f += w[i] * inner;
            if want_grad {
                grad[i] += inner;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            if want_hess {
                hess.iter_mut().zip(h).for_each(|(a, b)| *a += b);
            }
        }
        if want_hess {
            for j in 0..m {
                for l in 0..j {
                    hess[j * m + l] = hess[l * m + j];
                }
            }
        }
        (f, grad, hess)
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.eval(w, false, false).0
    }

    /// Projected Newton: each step minimises the quadratic model over the
    /// simplex, followed by an Armijo backtracking search along the segment.
    fn minimize(&self, w0: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, bool) {
        let m = self.m;
        let mut w = w0;
        for _ in 0..max_iter {
            let (f, g, h) = self.eval(&w, true, true);
            if kkt_residual(&w, &g) <= tol {
                return (w, true);
            }
            let ridge = 1e-12 * (0..m).map(|j| h[j * m + j]).fold(0.0, f64::max);
            let gram: Vec<f64> = h
                .iter()
                .enumerate()
                .map(|(k, v)| 0.5 * (v + if k / m == k % m { ridge } else { 0.0 }))
                .collect();
            let linear: Vec<f64> = (0..m)
                .map(|j| 0.5 * ((0..m).map(|l| h[j * m + l] * w[l]).sum::<f64>() - g[j]))
                .collect();
            let mut dir = match SimplexQpProblem::new(gram, linear, 0.0).and_then(|p| solve_simplex_qp(&p, 1e-13, 20_000)) {
                Ok(sol) => sol.weights.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<f64>>(),
                Err(_) => vec![0.0; m],
            };
            let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                // fall back to a projected gradient direction
                let p = project_simplex(&w.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
                dir = p.iter().zip(&w).map(|(a, b)| a - b).collect();
                slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
                if !(slope < 0.0) {
                    // no first-order descent left: w is stationary up to rounding
                    return (w, true);
                }
            }
            // the remaining decrease is below what f can resolve
            if -slope <= 1e-14 * (1.0 + f.abs()) {
                return (w, true);
            }
            let mut tau = 1.0;
            let mut accepted = None;
            while tau > 1e-12 {
                let cand: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| (a + tau * d).max(0.0)).collect();
                let f_c = self.value(&cand);
                if f_c <= f + 1e-4 * tau * slope {
                    accepted = Some(cand);
                    break;
                }
                tau *= 0.5;
            }
            match accepted {
                Some(c) => {
                    let s: f64 = c.iter().sum();
                    w = c.iter().map(|v| v / s).collect();
                }
                None => {
                    let ok = kkt_residual(&w, &g) <= tol || -slope <= 1e-12 * (1.0 + f.abs());
                    return (w, ok);
                }
            }
        }
        let (_, g, _) = self.eval(&w, true, false);
        let ok = kkt_residual(&w, &g) <= tol;
        (w, ok)
    }
}

fn kkt_residual(w: &[f64], grad: &[f64]) -> f64 {
    let p = project_simplex(&w.iter().zip(grad).map(|(a, g)| a - g).collect::<Vec<_>>());
    w.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
