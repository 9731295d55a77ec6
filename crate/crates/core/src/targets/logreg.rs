use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::objective::{LogDensity, TargetPosterior};

const CHUNK: usize = 256;

/// log σ(a) = −log(1 + e^{−a}), stable for both signs.
pub fn log_sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        -(-a).exp().ln_1p()
    } else {
        a - a.exp().ln_1p()
    }
}

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli likelihood with logit xᵀw and prior w ∼ N(0, prior_sigma² I).
#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    data: Arc<Dataset>,
    prior_sigma: f64,
}

impl LogisticRegressionModel {
    pub fn new(data: impl Into<Arc<Dataset>>, prior_sigma: f64) -> Result<Self> {
        if !(prior_sigma > 0.0) || !prior_sigma.is_finite() {
            return Err(Error::invalid("prior sigma must be positive"));
        }
        Ok(Self {
            data: data.into(),
            prior_sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn prior_sigma(&self) -> f64 {
        self.prior_sigma
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Σ_i [y_i log σ(x_iᵀw) + (1 − y_i) log σ(−x_iᵀw)] + log N(w; 0, prior_sigma² I).
    pub fn log_joint(&self, w: &[f64]) -> Result<f64> {
        self.check(w)?;
        Ok(self.log_joint_unchecked(w))
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        let s2 = self.prior_sigma * self.prior_sigma;
        let r2: f64 = w.iter().map(|v| v * v).sum();
        -0.5 * w.len() as f64 * (2.0 * PI * s2).ln() - 0.5 * r2 / s2
    }

    fn log_joint_unchecked(&self, w: &[f64]) -> f64 {
        let data = &*self.data;
        let n = data.len();
        // Fixed-size chunks summed in order keep the result independent of the thread count.
        let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(n))
                    .map(|i| {
                        let a = dot(data.row(i), w);
                        if data.labels()[i] == 1 {
                            log_sigmoid(a)
                        } else {
                            log_sigmoid(-a)
                        }
                    })
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum::<f64>() + self.log_prior(w)
    }

    /// ∇_w log p(y, w | X) = Σ_i (y_i − σ(x_iᵀw)) x_i − w / prior_sigma².
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let data = &*self.data;
        let n = data.len();
        let d = self.dim();
        let parts: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut g = vec![0.0; d];
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let x = data.row(i);
                    let r = f64::from(data.labels()[i]) - sigmoid(dot(x, w));
                    for (gk, xk) in g.iter_mut().zip(x) {
                        *gk += r * xk;
                    }
                }
                g
            })
            .collect();
        let s2 = self.prior_sigma * self.prior_sigma;
        let mut g: Vec<f64> = w.iter().map(|v| -v / s2).collect();
        for p in parts {
            for (gk, pk) in g.iter_mut().zip(p) {
                *gk += pk;
            }
        }
        Ok(g)
    }

    pub fn into_target(self) -> TargetPosterior {
        TargetPosterior::bayesian_joint(self)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogDensity for LogisticRegressionModel {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        self.log_joint_unchecked(z)
    }
}

/// `log_joint_logreg(model, w)`
pub fn log_joint_logreg(model: &LogisticRegressionModel, w: &[f64]) -> Result<f64> {
    model.log_joint(w)
}
