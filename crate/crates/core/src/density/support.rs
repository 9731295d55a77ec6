use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact, full-dimensional support box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("support box needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::invalid(format!("bounds of dimension {i} must be finite")));
            }
            if l >= u {
                return Err(Error::invalid(format!(
                    "dimension {i}: lower bound {l} must be below upper bound {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    /// `[lower, upper]^dim`
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn lebesgue_measure(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn log_lebesgue_measure(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).ln()).sum()
    }

    /// Squared Euclidean diameter, attained between `lower` and `upper`.
    pub fn diameter_sq(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    /// Coordinate-wise clamp into the box.
    pub fn clamp(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| x.clamp(*l, *u))
            .collect()
    }

    /// Intersection with the cube of half-width `half_width` around `center`.
    pub fn window(&self, center: &[f64], half_width: f64) -> SupportBox {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let lo = (center[i] - half_width).max(self.lower[i]);
            let hi = (center[i] + half_width).min(self.upper[i]);
            if lo < hi {
                lower.push(lo);
                upper.push(hi);
            } else {
                // center far outside: degenerate to a sliver at the nearest face
                let x = center[i].clamp(self.lower[i], self.upper[i]);
                let eps = 1e-12 * self.width(i);
                lower.push((x - eps).max(self.lower[i]));
                upper.push((x + eps).min(self.upper[i]));
            }
        }
        SupportBox { lower, upper }
    }

    pub(crate) fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }
}
