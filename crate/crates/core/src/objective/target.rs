use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{MixtureDensity, SupportBox};
use crate::error::{Error, Result};

/// A log density (possibly unnormalised) over R^d.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, z: &[f64]) -> f64;
}

impl LogDensity for MixtureDensity {
    fn dim(&self) -> usize {
        MixtureDensity::dim(self)
    }
    fn log_density(&self, z: &[f64]) -> f64 {
        self.log_pdf_unchecked(z)
    }
}

struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> LogDensity for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    /// An explicit density; `normalized` says whether it integrates to one.
    AnalyticDensity { normalized: bool },
    /// log p(x, z) = log prior + log likelihood; the evidence is unknown.
    BayesianJoint,
}

/// The distribution being approximated, seen through its log density.
#[derive(Clone)]
pub struct TargetPosterior {
    kind: TargetKind,
    density: Arc<dyn LogDensity>,
}

impl fmt::Debug for TargetPosterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetPosterior")
            .field("kind", &self.kind)
            .field("dim", &self.density.dim())
            .finish()
    }
}

impl TargetPosterior {
    pub fn new(kind: TargetKind, density: Arc<dyn LogDensity>) -> Self {
        Self { kind, density }
    }

    /// A normalised analytic density.
    pub fn analytic(density: impl LogDensity + 'static) -> Self {
        Self::new(TargetKind::AnalyticDensity { normalized: true }, Arc::new(density))
    }

    /// An analytic density known only up to a constant.
    pub fn unnormalized(density: impl LogDensity + 'static) -> Self {
        Self::new(TargetKind::AnalyticDensity { normalized: false }, Arc::new(density))
    }

    pub fn bayesian_joint(density: impl LogDensity + 'static) -> Self {
        Self::new(TargetKind::BayesianJoint, Arc::new(density))
    }

    pub fn from_fn<F>(dim: usize, kind: TargetKind, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(kind, Arc::new(FnDensity { dim, f }))
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn log_target(&self, z: &[f64]) -> f64 {
        self.density.log_density(z)
    }

    /// True when objective values are genuine KL divergences; otherwise they
    /// are negative-ELBO values (KL shifted by an unknown log-normaliser).
    pub fn reports_kl(&self) -> bool {
        matches!(self.kind, TargetKind::AnalyticDensity { normalized: true })
    }

    pub fn objective_label(&self) -> &'static str {
        if self.reports_kl() {
            "kl"
        } else {
            "neg_elbo"
        }
    }

    /// Check that log_target is finite at the box center and on a coarse probe of the box.
    pub fn validate_on(&self, support: &SupportBox) -> Result<()> {
        if support.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: support.dim(),
                got: self.dim(),
            });
        }
        let d = support.dim();
        let mut probes = vec![support.center(), support.lower().to_vec(), support.upper().to_vec()];
        if d <= 2 {
            let n: usize = 9;
            for k in 0..n.pow(d as u32) {
                let mut idx = k;
                let z: Vec<f64> = (0..d)
                    .map(|i| {
                        let j = idx % n;
                        idx /= n;
                        support.lower()[i] + support.width(i) * j as f64 / (n - 1) as f64
                    })
                    .collect();
                probes.push(z);
            }
        }
        for z in probes {
            let v = self.log_target(&z);
            if !v.is_finite() {
                return Err(Error::invalid(format!("target log density is not finite at {z:?}")));
            }
        }
        Ok(())
    }
}
