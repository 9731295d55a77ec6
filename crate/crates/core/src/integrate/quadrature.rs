//! Adaptive Gauss–Kronrod (7/15) cubature on boxes of dimension 1 or 2.
//!
//! Panels are refined worst-first until the summed |K15 − G7| estimate meets
//! the tolerance. The final value is a pairwise sum over panels ordered by
//! their lower corner, so the result does not depend on refinement order.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::density::SupportBox;
use crate::error::{Error, Result};

pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15 Kronrod abscissae on [-1, 1] with their Kronrod and Gauss weights (0 for Kronrod-only nodes).
pub(crate) fn kronrod_nodes() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    let mut k = 0;
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        out[k] = (-XGK[j], WGK[j], wg);
        out[k + 1] = (XGK[j], WGK[j], wg);
        k += 2;
    }
    out[14] = (0.0, WGK[7], WG[3]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    /// Integrand values that were non-finite and replaced by 0.
    pub nonfinite: usize,
    pub panels: usize,
}

#[derive(Debug, Clone)]
struct Panel {
    lower: [f64; 2],
    upper: [f64; 2],
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lower[0].total_cmp(&self.lower[0]))
            .then_with(|| other.lower[1].total_cmp(&self.lower[1]))
    }
}

struct Guarded<'a, F> {
    f: &'a F,
    evals: Cell<usize>,
    nonfinite: Cell<usize>,
}

impl<F: Fn(&[f64]) -> f64> Guarded<'_, F> {
    fn call(&self, z: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)(z);
        if v.is_finite() {
            v
        } else {
            self.nonfinite.set(self.nonfinite.get() + 1);
            0.0
        }
    }
}

fn rule_1d<F: Fn(&[f64]) -> f64>(g: &Guarded<F>, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut k, mut gs) = (0.0, 0.0);
    for (x, wk, wg) in kronrod_nodes() {
        let v = g.call(&[c + h * x]);
        k += wk * v;
        gs += wg * v;
    }
    (k * h, (k - gs).abs() * h)
}

fn rule_2d<F: Fn(&[f64]) -> f64>(g: &Guarded<F>, lo: [f64; 2], hi: [f64; 2]) -> (f64, f64) {
    let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let h = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])];
    let nodes = kronrod_nodes();
    let (mut k, mut gs) = (0.0, 0.0);
    for (x, wkx, wgx) in nodes {
        for (y, wky, wgy) in nodes {
            let v = g.call(&[c[0] + h[0] * x, c[1] + h[1] * y]);
            k += wkx * wky * v;
            gs += wgx * wgy * v;
        }
    }
    let jac = h[0] * h[1];
    (k * jac, (k - gs).abs() * jac)
}

/// Pairwise summation, used for order-independent reductions.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// ∫_box f(z) dz for `box.dim() <= 2`.
///
/// Non-finite integrand values (a truncated pdf is discontinuous on the box
/// faces) are replaced by 0 and counted in [`Quadrature::nonfinite`].
pub fn integrate_box<F>(f: F, support: &SupportBox, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let d = support.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let g = Guarded {
        f: &f,
        evals: Cell::new(0),
        nonfinite: Cell::new(0),
    };
    let eval = |lo: [f64; 2], hi: [f64; 2]| -> Panel {
        let (value, error) = if d == 1 {
            rule_1d(&g, lo[0], hi[0])
        } else {
            rule_2d(&g, lo, hi)
        };
        Panel {
            lower: lo,
            upper: hi,
            value,
            error,
        }
    };
    let lo0 = [support.lower()[0], if d == 2 { support.lower()[1] } else { 0.0 }];
    let hi0 = [support.upper()[0], if d == 2 { support.upper()[1] } else { 0.0 }];
    let mut heap = BinaryHeap::new();
    let first = eval(lo0, hi0);
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);
    let mut subdivisions = 0usize;
    loop {
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            // running sums can cancel badly after a huge first estimate; confirm from scratch
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
            if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
                break;
            }
        }
        if subdivisions >= spec.max_subdivisions {
            let values: Vec<f64> = sorted_values(heap.into_vec());
            return Err(Error::Convergence {
                estimate: pairwise_sum(&values),
                error_estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        // split the longer side (always axis 0 in 1-D)
        let axis = if d == 2 && (worst.upper[1] - worst.lower[1]) > (worst.upper[0] - worst.lower[0]) {
            1
        } else {
            0
        };
        let mid = 0.5 * (worst.lower[axis] + worst.upper[axis]);
        let mut hi_a = worst.upper;
        hi_a[axis] = mid;
        let mut lo_b = worst.lower;
        lo_b[axis] = mid;
        let a = eval(worst.lower, hi_a);
        let b = eval(lo_b, worst.upper);
        total += a.value + b.value - worst.value;
        total_err += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        subdivisions += 1;
    }
    let panels = heap.len();
    let all = heap.into_vec();
    let err: f64 = all.iter().map(|p| p.error).sum();
    let values = sorted_values(all);
    Ok(Quadrature {
        value: pairwise_sum(&values),
        error_estimate: err,
        evaluations: g.evals.get(),
        nonfinite: g.nonfinite.get(),
        panels,
    })
}

fn sorted_values(mut panels: Vec<Panel>) -> Vec<f64> {
    panels.sort_by(|a, b| {
        a.lower[0]
            .total_cmp(&b.lower[0])
            .then_with(|| a.lower[1].total_cmp(&b.lower[1]))
    });
    panels.into_iter().map(|p| p.value).collect()
}

/// ∫_a^b f(x) dx
pub fn integrate_interval<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let support = SupportBox::interval(a, b)?;
    integrate_box(|z: &[f64]| f(z[0]), &support, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_unit_interval() {
        let q = integrate_interval(|_| 1.0, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squared_standard_normal() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let q = integrate_interval(|x| phi(x).powi(2), -8.0, 8.0, &QuadratureSpec::default()).unwrap();
        assert!((q.value - 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn two_dimensional_polynomial() {
        let b = SupportBox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        // ∫∫ x² y² = (8/3)(2/3)
        let q = integrate_box(|z| z[0] * z[0] * z[1] * z[1], &b, &QuadratureSpec::default()).unwrap();
        assert!((q.value - 16.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_three_dimensions() {
        let b = SupportBox::cube(3, 0.0, 1.0).unwrap();
        assert!(matches!(
            integrate_box(|_| 1.0, &b, &QuadratureSpec::default()),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 3).unwrap();
        let r = integrate_interval(|x| (1.0 / x.abs().max(1e-300)).sqrt(), -1.0, 1.0, &spec);
        match r {
            Err(Error::Convergence { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn nonfinite_values_are_zeroed_and_counted() {
        let q = integrate_interval(|x| if x == 0.0 { f64::INFINITY } else { 1.0 }, -1.0, 1.0, &QuadratureSpec::default())
            .unwrap();
        assert!(q.nonfinite >= 1);
        assert!(q.value.is_finite());
    }
}
