use std::collections::HashMap;

use rayon::prelude::*;

use crate::density::{normal, TruncatedGaussianAtom};
use crate::error::Result;
use crate::integrate::{integrate_interval, QuadratureSpec, WINDOW_SIGMAS};

/// log ⟨s_1, s_2⟩ = log ∫_box s_1(z) s_2(z) dz.
///
/// Both atoms are isotropic truncated Gaussians on the same box, so the
/// integral factorises into one-dimensional integrals, each evaluated by
/// adaptive quadrature of the shifted log-integrand and summed in log space.
pub fn log_inner_product(a: &TruncatedGaussianAtom, b: &TruncatedGaussianAtom) -> Result<f64> {
    let support = a.support();
    let spec = QuadratureSpec {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        ..QuadratureSpec::default()
    };
    let mut total = 0.0;
    for k in 0..a.dim() {
        total += log_overlap_1d(
            a.mean()[k],
            a.sigma(),
            b.mean()[k],
            b.sigma(),
            support.lower()[k],
            support.upper()[k],
            &spec,
        )?;
    }
    Ok(total)
}

pub fn inner_product(a: &TruncatedGaussianAtom, b: &TruncatedGaussianAtom) -> Result<f64> {
    Ok(log_inner_product(a, b)?.exp())
}

fn log_overlap_1d(m1: f64, s1: f64, m2: f64, s2: f64, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    let log_norm = |m: f64, s: f64| s.ln() + normal::LN_SQRT_2PI + normal::interval_mass((lo - m) / s, (hi - m) / s).ln();
    let c0 = -log_norm(m1, s1) - log_norm(m2, s2);
    let ell = |z: f64| {
        let u = (z - m1) / s1;
        let v = (z - m2) / s2;
        c0 - 0.5 * (u * u + v * v)
    };
    let prec = 1.0 / (s1 * s1) + 1.0 / (s2 * s2);
    let center = (m1 / (s1 * s1) + m2 / (s2 * s2)) / prec;
    let sd = prec.sqrt().recip();
    let mut a = lo.max(center - WINDOW_SIGMAS * sd);
    let mut b = hi.min(center + WINDOW_SIGMAS * sd);
    if a >= b {
        if center < lo {
            a = lo;
            b = hi.min(lo + WINDOW_SIGMAS * sd);
        } else {
            b = hi;
            a = lo.max(hi - WINDOW_SIGMAS * sd);
        }
    }
    let shift = ell(center.clamp(a, b));
    let q = integrate_interval(|z| (ell(z) - shift).exp(), a, b, spec)?;
    Ok(shift + q.value.ln())
}

/// Memoised pairwise log inner products keyed by atom parameters.
#[derive(Debug, Default)]
pub struct GramCache {
    map: HashMap<(Vec<u64>, Vec<u64>), f64>,
}

fn key(a: &TruncatedGaussianAtom) -> Vec<u64> {
    a.mean().iter().map(|m| m.to_bits()).chain(std::iter::once(a.sigma().to_bits())).collect()
}

impl GramCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Row-major matrix of log ⟨s_i, s_j⟩.
    pub fn log_gram(&mut self, atoms: &[TruncatedGaussianAtom]) -> Result<Vec<f64>> {
        let n = atoms.len();
        let keys: Vec<Vec<u64>> = atoms.iter().map(key).collect();
        let pair = |i: usize, j: usize| {
            if keys[i] <= keys[j] {
                (keys[i].clone(), keys[j].clone())
            } else {
                (keys[j].clone(), keys[i].clone())
            }
        };
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.map.contains_key(&pair(i, j)))
            .collect();
        let computed: Vec<Result<f64>> = missing
            .par_iter()
            .map(|&(i, j)| log_inner_product(&atoms[i], &atoms[j]))
            .collect();
        for (&(i, j), v) in missing.iter().zip(computed) {
            self.map.insert(pair(i, j), v?);
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.map[&pair(i, j)];
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }
}
