use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LmoConfig, VarianceReduction};
use crate::density::TruncatedGaussianAtom;
use crate::error::{Error, Result};
use crate::integrate::McEstimate;

/// Score-function estimate of ∇_θ E_{z∼s(θ)}[g(z)] for θ = (mean, σ).
#[derive(Debug, Clone)]
pub struct ScoreGradient {
    /// Length d + 1; the last entry is the σ component.
    pub gradient: Vec<f64>,
    /// Per-component standard error of the sample average.
    pub stderr: Vec<f64>,
    /// E_s[g] from the same samples.
    pub mean_g: McEstimate,
}

/// (1/S) Σ (g(z_s) − b_s) ∇_θ log s(z_s; θ) with z_s ∼ s(θ) and b_s the
/// leave-one-out mean of g (or 0 without variance reduction).
pub fn score_gradient<G>(atom: &TruncatedGaussianAtom, g: G, cfg: &LmoConfig, seed: u64) -> Result<ScoreGradient>
where
    G: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    score_gradient_rng(atom, &g, cfg, &mut rng)
}

pub(crate) fn score_gradient_rng<G, R>(
    atom: &TruncatedGaussianAtom,
    g: &G,
    cfg: &LmoConfig,
    rng: &mut R,
) -> Result<ScoreGradient>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let n = cfg.samples;
    if n == 0 || (cfg.variance_reduction == VarianceReduction::LeaveOneOut && n < 2) {
        return Err(Error::invalid("not enough samples for the score gradient"));
    }
    let d = atom.dim();
    let mut z = vec![0.0; d];
    let mut values = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for index in 0..n {
        atom.sample_into(rng, &mut z);
        let v = g(&z);
        if !v.is_finite() {
            return Err(Error::NonFinite { index, point: z.clone() });
        }
        values.push(v);
        scores.push(atom.score(&z));
    }
    let total: f64 = values.iter().sum();
    let mut contrib = vec![vec![0.0; n]; d + 1];
    for (s, (v, sc)) in values.iter().zip(&scores).enumerate() {
        let baseline = match cfg.variance_reduction {
            VarianceReduction::None => 0.0,
            VarianceReduction::LeaveOneOut => (total - v) / (n - 1) as f64,
        };
        for k in 0..=d {
            contrib[k][s] = (v - baseline) * sc[k];
        }
    }
    let est: Vec<McEstimate> = contrib.iter().map(|c| McEstimate::from_values(c)).collect();
    Ok(ScoreGradient {
        gradient: est.iter().map(|e| e.value).collect(),
        stderr: est.iter().map(|e| e.stderr).collect(),
        mean_g: McEstimate::from_values(&values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SupportBox;

    fn cfg(samples: usize, vr: VarianceReduction) -> LmoConfig {
        LmoConfig {
            samples,
            variance_reduction: vr,
            ..LmoConfig::default()
        }
    }

    #[test]
    fn constant_g_has_zero_gradient() {
        let b = SupportBox::interval(-1.0, 1.0).unwrap();
        let atom = TruncatedGaussianAtom::new(vec![0.6], 0.4, b).unwrap();
        let sg = score_gradient(&atom, |_| 2.5, &cfg(4000, VarianceReduction::None), 1).unwrap();
        for k in 0..2 {
            assert!(sg.gradient[k].abs() <= 4.0 * sg.stderr[k], "{sg:?}");
        }
        let sg = score_gradient(&atom, |_| 2.5, &cfg(16, VarianceReduction::LeaveOneOut), 1).unwrap();
        assert!(sg.gradient.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identity_g_has_unit_mean_gradient_without_truncation() {
        let b = SupportBox::interval(-50.0, 50.0).unwrap();
        let atom = TruncatedGaussianAtom::new(vec![0.3], 1.0, b).unwrap();
        let sg = score_gradient(&atom, |z| z[0], &cfg(20000, VarianceReduction::LeaveOneOut), 7).unwrap();
        assert!((sg.gradient[0] - 1.0).abs() <= 4.0 * sg.stderr[0], "{sg:?}");
    }

    #[test]
    fn nonfinite_g_is_an_error() {
        let atom = TruncatedGaussianAtom::new(vec![0.0], 1.0, SupportBox::interval(-1.0, 1.0).unwrap()).unwrap();
        let r = score_gradient(&atom, |_| f64::NAN, &cfg(8, VarianceReduction::None), 0);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
