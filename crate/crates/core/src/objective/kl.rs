use super::target::{TargetKind, TargetPosterior};
use crate::density::{MixtureDensity, SupportBox, TruncatedGaussianAtom};
use crate::error::{Error, Result};
use crate::integrate::{atom_expectation, expectation_mc, integrate_box, mixture_expectation, Estimator, McEstimate};

/// E_q[log q(z) − log_target(z)].
///
/// A true KL for normalised analytic targets; the negative ELBO for
/// Bayesian joints and unnormalised targets.
pub fn kl_estimate(q: &MixtureDensity, target: &TargetPosterior, est: &Estimator) -> Result<McEstimate> {
    check_dims(q, target)?;
    mixture_expectation(q, |z| q.log_pdf_unchecked(z) - target.log_target(z), est)
}

/// Pointwise functional gradient of the objective: log q(z) − log_target(z).
pub fn grad_log_ratio(q: &MixtureDensity, target: &TargetPosterior, z: &[f64]) -> Result<f64> {
    q.support().check_dim(z)?;
    if !q.support().contains(z) {
        return Err(Error::OutsideSupport);
    }
    Ok(q.log_pdf_unchecked(z) - target.log_target(z))
}

/// ⟨∇f(q), s⟩ = E_s[log q − log p].
pub fn linear_value(
    q: &MixtureDensity,
    s: &TruncatedGaussianAtom,
    target: &TargetPosterior,
    est: &Estimator,
) -> Result<McEstimate> {
    check_dims(q, target)?;
    atom_expectation(s, |z| q.log_pdf_unchecked(z) - target.log_target(z), est)
}

/// ⟨∇f(q), q − s⟩ = E_q[g] − E_s[g] with g = log q − log p.
pub fn duality_gap(
    q: &MixtureDensity,
    s: &TruncatedGaussianAtom,
    target: &TargetPosterior,
    est: &Estimator,
) -> Result<McEstimate> {
    let eq = kl_estimate(q, target, &est.stream(0x9a1))?;
    let es = linear_value(q, s, target, &est.stream(0x9a2))?;
    Ok(eq.minus(&es))
}

/// −log ∫_box p(z) dz for a normalised analytic target (information lost by truncation).
pub fn truncation_loss(target: &TargetPosterior, support: &SupportBox, est: &Estimator) -> Result<f64> {
    if target.kind() != (TargetKind::AnalyticDensity { normalized: true }) {
        return Err(Error::invalid("truncation loss needs a normalised analytic target"));
    }
    if target.dim() != support.dim() {
        return Err(Error::DimensionMismatch {
            expected: support.dim(),
            got: target.dim(),
        });
    }
    let mass = match est {
        Estimator::Quadrature(spec) => integrate_box(|z| target.log_target(z).exp(), support, spec)?.value,
        Estimator::MonteCarlo(spec) => {
            let e = expectation_mc(|z| target.log_target(z).exp(), support, spec)?;
            e.value * support.lebesgue_measure()
        }
    };
    if !(mass > 0.0) {
        return Err(Error::Numeric(format!("target mass on the box is {mass}")));
    }
    Ok(-mass.min(1.0).ln())
}

fn check_dims(q: &MixtureDensity, target: &TargetPosterior) -> Result<()> {
    if q.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::McSpec;
    use std::f64::consts::PI;

    fn quad() -> Estimator {
        Estimator::Quadrature(Default::default())
    }

    fn atom(m: f64, s: f64) -> TruncatedGaussianAtom {
        TruncatedGaussianAtom::new(vec![m], s, SupportBox::interval(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn kl_of_self_is_zero() {
        let q = MixtureDensity::new(vec![atom(0.1, 0.3), atom(-0.4, 0.6)], vec![0.3, 0.7]).unwrap();
        let t = TargetPosterior::analytic(q.clone());
        assert!(kl_estimate(&q, &t, &quad()).unwrap().value.abs() < 1e-8);
    }

    #[test]
    fn kl_matches_golden_value() {
        let q = MixtureDensity::single(atom(0.2, 0.5));
        let t = TargetPosterior::analytic(MixtureDensity::single(atom(0.0, 0.5)));
        let kl = kl_estimate(&q, &t, &quad()).unwrap().value;
        assert!((kl - 0.06070944812659709).abs() < 1e-9, "{kl}");
    }

    #[test]
    fn gradient_off_support_is_an_error() {
        let q = MixtureDensity::single(atom(0.0, 0.5));
        let t = TargetPosterior::analytic(q.clone());
        assert!(matches!(grad_log_ratio(&q, &t, &[1.5]), Err(Error::OutsideSupport)));
        assert_eq!(grad_log_ratio(&q, &t, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn gap_vanishes_for_identical_atom() {
        let a = atom(0.3, 0.4);
        let q = MixtureDensity::single(a.clone());
        let t = TargetPosterior::analytic(MixtureDensity::single(atom(0.0, 0.5)));
        let g = duality_gap(&q, &a, &t, &quad()).unwrap();
        assert!(g.value.abs() < 1e-9);
        let mc = Estimator::MonteCarlo(McSpec::new(4000, 3).unwrap());
        let g = duality_gap(&q, &a, &t, &mc).unwrap();
        assert!(g.value.abs() <= 4.0 * g.stderr + 1e-12, "{g:?}");
    }

    #[test]
    fn cauchy_truncation_loss() {
        let t = TargetPosterior::from_fn(1, TargetKind::AnalyticDensity { normalized: true }, |z| {
            -(PI * (1.0 + z[0] * z[0])).ln()
        });
        let b = SupportBox::interval(-5.0, 5.0).unwrap();
        let loss = truncation_loss(&t, &b, &quad()).unwrap();
        let oracle = -((2.0 / PI) * 5f64.atan()).ln();
        assert!((loss - oracle).abs() < 1e-10);
        assert!((loss - 0.13429272965717112).abs() < 1e-10);
        let half = truncation_loss(&t, &SupportBox::interval(-2.5, 2.5).unwrap(), &quad()).unwrap();
        assert!(half > loss);
    }
}
