use crate::density::{AtomFamilyConfig, MixtureDensity};
use crate::error::Result;
use crate::integrate::Estimator;
use crate::lmo::{stochastic_lmo_with, LmoConfig};
use crate::objective::TargetPosterior;

/// Single-atom fit used to initialise boosting runs.
///
/// The oracle is run against a flat iterate (uniform q on the box), where
/// E_s[log q − log p] = const − E_s[log p]; its minimiser over the family is
/// the best one-component fit in the cross-entropy sense.
pub fn meanfield_init(
    target: &TargetPosterior,
    family: &AtomFamilyConfig,
    cfg: &LmoConfig,
    est: &Estimator,
) -> Result<MixtureDensity> {
    let r = stochastic_lmo_with(|z: &[f64]| -target.log_target(z), cfg, family, est)?;
    Ok(MixtureDensity::single(r.atom))
}
