//! Expectations under atoms and mixtures, by quadrature (d <= 2) or Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mc::{expectation_mc, McEstimate, McSpec};
use super::quadrature::{integrate_box, kronrod_nodes, pairwise_sum, QuadratureSpec};
use crate::density::{MixtureDensity, SupportBox, TruncatedGaussianAtom};
use crate::error::{Error, Result};

/// Atom expectations integrate over the box clipped to mean ± this many σ.
/// The neglected Gaussian mass is below 1e-17.
pub const WINDOW_SIGMAS: f64 = 9.0;

/// How expectations are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Quadrature(QuadratureSpec),
    MonteCarlo(McSpec),
}

impl Estimator {
    /// Quadrature for d <= 2, Monte Carlo otherwise.
    pub fn auto(dim: usize, mc: McSpec) -> Self {
        if dim <= 2 {
            Estimator::Quadrature(QuadratureSpec::default())
        } else {
            Estimator::MonteCarlo(mc)
        }
    }

    /// Independent random stream for Monte Carlo; quadrature is unchanged.
    pub fn stream(&self, tag: u64) -> Self {
        match self {
            Estimator::Quadrature(q) => Estimator::Quadrature(*q),
            Estimator::MonteCarlo(m) => Estimator::MonteCarlo(m.stream(tag)),
        }
    }

    pub fn is_quadrature(&self) -> bool {
        matches!(self, Estimator::Quadrature(_))
    }
}

/// E_{z∼s}[f(z)].
pub fn atom_expectation<F>(atom: &TruncatedGaussianAtom, f: F, est: &Estimator) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    match est {
        Estimator::Quadrature(spec) => {
            let window = atom.support().window(atom.mean(), WINDOW_SIGMAS * atom.sigma());
            let q = integrate_box(
                |z| {
                    let p = atom.log_pdf_unchecked(z).exp();
                    if p == 0.0 {
                        0.0
                    } else {
                        p * f(z)
                    }
                },
                &window,
                spec,
            )?;
            Ok(McEstimate::exact(q.value))
        }
        Estimator::MonteCarlo(spec) => expectation_mc(f, atom, spec),
    }
}

/// E_{z∼q}[f(z)]; quadrature sums weighted per-atom expectations.
pub fn mixture_expectation<F>(q: &MixtureDensity, f: F, est: &Estimator) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    match est {
        Estimator::Quadrature(_) => {
            let mut parts = Vec::with_capacity(q.len());
            for (a, w) in q.atoms().iter().zip(q.weights()) {
                parts.push(w * atom_expectation(a, &f, est)?.value);
            }
            Ok(McEstimate::exact(pairwise_sum(&parts)))
        }
        Estimator::MonteCarlo(spec) => expectation_mc(f, q, spec),
    }
}

/// A fixed set of weighted points whose weighted sum estimates E_s[h] for one atom.
///
/// Quadrature sets use a composite 15-point Kronrod rule with panels no wider
/// than σ over the atom window, with the atom density folded into the weights.
/// Monte Carlo sets are i.i.d. draws with weight 1/n. Fixed points let the
/// corrective sub-solvers re-evaluate objectives with common random numbers.
#[derive(Debug, Clone)]
pub struct NodeSet {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    monte_carlo: bool,
}

impl NodeSet {
    pub fn for_atom(atom: &TruncatedGaussianAtom, est: &Estimator) -> Result<Self> {
        let d = atom.dim();
        match est {
            Estimator::Quadrature(_) => {
                if d > 2 {
                    return Err(Error::UnsupportedDimension(d));
                }
                let window = atom.support().window(atom.mean(), WINDOW_SIGMAS * atom.sigma());
                let rule = composite_rule(&window, atom.sigma());
                let mut points = Vec::with_capacity(rule.0.len());
                let mut weights = Vec::with_capacity(rule.1.len());
                for (k, w) in rule.1.iter().enumerate() {
                    let z = &rule.0[k * d..(k + 1) * d];
                    let p = atom.log_pdf_unchecked(z).exp();
                    if p > 0.0 {
                        points.extend_from_slice(z);
                        weights.push(w * p);
                    }
                }
                Ok(Self {
                    dim: d,
                    points,
                    weights,
                    monte_carlo: false,
                })
            }
            Estimator::MonteCarlo(spec) => {
                spec.validate()?;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let mut points = vec![0.0; spec.n_samples * d];
                for k in 0..spec.n_samples {
                    atom.sample_into(&mut rng, &mut points[k * d..(k + 1) * d]);
                }
                Ok(Self {
                    dim: d,
                    points,
                    weights: vec![1.0 / spec.n_samples as f64; spec.n_samples],
                    monte_carlo: true,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.monte_carlo
    }

    /// Weighted estimate from values at the points (same order as `point(k)`).
    pub fn expect(&self, values: &[f64]) -> McEstimate {
        if self.monte_carlo {
            McEstimate::from_values(values)
        } else {
            let terms: Vec<f64> = values.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
            McEstimate::exact(pairwise_sum(&terms))
        }
    }
}

/// Composite Kronrod nodes and weights on a box of dimension 1 or 2, panel width <= `h`.
pub(crate) fn composite_rule(support: &SupportBox, h: f64) -> (Vec<f64>, Vec<f64>) {
    let d = support.dim();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|i| {
            let lo = support.lower()[i];
            let width = support.width(i);
            let n = ((width / h).ceil() as usize).max(1);
            let ph = width / n as f64;
            let mut xs = Vec::with_capacity(15 * n);
            let mut ws = Vec::with_capacity(15 * n);
            for p in 0..n {
                let c = lo + (p as f64 + 0.5) * ph;
                for (x, wk, _) in kronrod_nodes() {
                    xs.push(c + 0.5 * ph * x);
                    ws.push(0.5 * ph * wk);
                }
            }
            (xs, ws)
        })
        .collect();
    if d == 1 {
        return axes.into_iter().next().expect("one axis");
    }
    let (x0, w0) = &axes[0];
    let (x1, w1) = &axes[1];
    let mut pts = Vec::with_capacity(2 * x0.len() * x1.len());
    let mut ws = Vec::with_capacity(x0.len() * x1.len());
    for (a, wa) in x0.iter().zip(w0) {
        for (b, wb) in x1.iter().zip(w1) {
            pts.push(*a);
            pts.push(*b);
            ws.push(wa * wb);
        }
    }
    (pts, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom() -> TruncatedGaussianAtom {
        TruncatedGaussianAtom::new(vec![0.8], 0.3, SupportBox::interval(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn quadrature_node_set_integrates_atom_to_one() {
        let est = Estimator::Quadrature(QuadratureSpec::default());
        let ns = NodeSet::for_atom(&atom(), &est).unwrap();
        let ones = vec![1.0; ns.len()];
        assert!((ns.expect(&ones).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn node_set_and_adaptive_agree() {
        let est = Estimator::Quadrature(QuadratureSpec::default());
        let a = atom();
        let ns = NodeSet::for_atom(&a, &est).unwrap();
        let vals: Vec<f64> = (0..ns.len()).map(|k| ns.point(k)[0].powi(3).sin()).collect();
        let adaptive = atom_expectation(&a, |z| z[0].powi(3).sin(), &est).unwrap();
        assert!((ns.expect(&vals).value - adaptive.value).abs() < 1e-11);
    }

    #[test]
    fn mc_node_set_is_seeded() {
        let est = Estimator::MonteCarlo(McSpec::new(64, 11).unwrap());
        let a = NodeSet::for_atom(&atom(), &est).unwrap();
        let b = NodeSet::for_atom(&atom(), &est).unwrap();
        assert_eq!(a.points, b.points);
        assert!(a.is_monte_carlo());
    }

    #[test]
    fn self_kl_integrand_is_exactly_zero() {
        let a = atom();
        let q = MixtureDensity::single(a.clone());
        let est = Estimator::MonteCarlo(McSpec::new(200, 5).unwrap());
        let e = mixture_expectation(&q, |z| q.log_pdf_unchecked(z) - q.log_pdf_unchecked(z), &est).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.stderr, 0.0);
    }
}
