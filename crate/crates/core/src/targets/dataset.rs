use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Binary-labelled feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    labels: Vec<u8>,
    features: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, labels: Vec<u8>, features: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Self { dim, labels, features })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// First `n_train` records and the rest.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        if n_train > self.len() {
            return Err(Error::invalid(format!(
                "train count {n_train} exceeds dataset size {}",
                self.len()
            )));
        }
        let cut = n_train * self.dim;
        Ok((
            Dataset {
                dim: self.dim,
                labels: self.labels[..n_train].to_vec(),
                features: self.features[..cut].to_vec(),
            },
            Dataset {
                dim: self.dim,
                labels: self.labels[n_train..].to_vec(),
                features: self.features[cut..].to_vec(),
            },
        ))
    }

    /// Parse `label,f1,...,fd` records. A first row whose first field is not
    /// a number is treated as a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut dim = None;
        let mut labels = Vec::new();
        let mut features = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Dataset {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(index + 1);
            if record.iter().all(str::is_empty) {
                continue;
            }
            let first = record.get(0).unwrap_or("");
            if index == 0 && first.parse::<f64>().is_err() {
                continue;
            }
            if record.len() < 2 {
                return Err(Error::Dataset {
                    line,
                    message: "expected a label and at least one feature".into(),
                });
            }
            let d = record.len() - 1;
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(Error::Dataset {
                        line,
                        message: format!("expected {expected} features, found {d}"),
                    })
                }
                _ => {}
            }
            let label = match first.parse::<f64>() {
                Ok(v) if v == 0.0 => 0,
                Ok(v) if v == 1.0 => 1,
                Ok(v) => {
                    return Err(Error::Dataset {
                        line,
                        message: format!("label {v} is not 0 or 1"),
                    })
                }
                Err(_) => {
                    return Err(Error::Dataset {
                        line,
                        message: format!("label `{first}` is not a number"),
                    })
                }
            };
            labels.push(label);
            for (k, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Dataset {
                    line,
                    message: format!("feature {} `{field}` is not a number", k + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Dataset {
                        line,
                        message: format!("feature {} is not finite", k + 1),
                    });
                }
                features.push(v);
            }
        }
        let dim = dim.ok_or(Error::Dataset {
            line: 0,
            message: "no records".into(),
        })?;
        Self::new(dim, labels, features)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            out.push_str(&self.labels[i].to_string());
            for v in self.row(i) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Noisy linearly separable data of the given shape: Gaussian features,
    /// labels from a sparse hidden weight vector plus logistic noise.
    pub fn synthetic(n: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let active = dim.div_ceil(10);
        let w: Vec<f64> = (0..dim)
            .map(|k| if k < active { 1.5 * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
            .collect();
        let mut labels = Vec::with_capacity(n);
        let mut features = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let a: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let u: f64 = rng.random_range(1e-12..1.0);
            let noise = (u / (1.0 - u)).ln();
            labels.push(u8::from(a + noise > 1.0));
            features.extend(x);
        }
        Self::new(dim, labels, features)
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    Dataset::parse_csv(&text)
}
