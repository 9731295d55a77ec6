use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// min_w wᵀGw − 2cᵀw + constant over the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexQpProblem {
    /// Row-major n × n symmetric PSD matrix.
    pub gram: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// ‖w − P(w − ∇h(w))‖_∞ with P the simplex projection.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SimplexQpProblem {
    pub fn new(gram: Vec<f64>, linear: Vec<f64>, constant: f64) -> Result<Self> {
        let p = Self { gram, linear, constant };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("QP needs at least one atom"));
        }
        if self.gram.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: self.gram.len(),
            });
        }
        if self.gram.iter().chain(&self.linear).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite QP data".into()));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.gram[i * n + j], self.gram[j * n + i]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("Gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let gw = self.gram_times(w);
        dot(w, &gw) - 2.0 * dot(&self.linear, w) + self.constant
    }

    fn gram_times(&self, w: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| dot(&self.gram[i * n..(i + 1) * n], w)).collect()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.gram_times(w).iter().zip(&self.linear).map(|(g, c)| 2.0 * (g - c)).collect()
    }

    fn kkt_residual(&self, w: &[f64]) -> f64 {
        let grad = self.gradient(w);
        let shifted: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - gi).collect();
        let p = project_simplex(&shifted);
        w.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto {w ≥ 0, Σw = 1} by the sort-and-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Accelerated projected gradient (FISTA with restart), then an exact solve of
/// the KKT system on the detected support. Returns the best iterate; `converged`
/// is false when the KKT residual is still above `tol` after `max_iter` steps.
pub fn solve_simplex_qp(p: &SimplexQpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    p.validate()?;
    let n = p.len();
    if n == 1 {
        return Ok(finish(p, vec![1.0], 0));
    }
    // Gershgorin bound on λ_max(G); ∇h is 2λ_max-Lipschitz.
    let lip = 2.0
        * (0..n)
            .map(|i| p.gram[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };

    let mut w = vec![1.0 / n as f64; n];
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut f_w = p.objective(&w);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let grad = p.gradient(&y);
        let next = project_simplex(&y.iter().zip(&grad).map(|(a, g)| a - step * g).collect::<Vec<_>>());
        let f_next = p.objective(&next);
        if f_next > f_w {
            // adaptive restart
            y = w.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = next.iter().zip(&w).map(|(a, b)| a + beta * (a - b)).collect();
        w = next;
        f_w = f_next;
        t = t_next;
        if iterations % 16 == 0 && p.kkt_residual(&w) <= tol {
            break;
        }
    }
    if let Some(polished) = polish(p, &w) {
        // objectives can tie to rounding when |c| is large, so the residual decides too
        let no_worse = p.objective(&polished) <= f_w + 1e-12 * (1.0 + f_w.abs());
        if no_worse && p.kkt_residual(&polished) <= p.kkt_residual(&w) {
            w = polished;
        }
    }
    let sol = finish(p, w, iterations);
    Ok(QpSolution {
        converged: sol.kkt_residual <= tol,
        ..sol
    })
}

fn finish(p: &SimplexQpProblem, w: Vec<f64>, iterations: usize) -> QpSolution {
    QpSolution {
        objective: p.objective(&w),
        kkt_residual: p.kkt_residual(&w),
        iterations,
        converged: true,
        weights: w,
    }
}

/// Solve [2G_SS 1; 1ᵀ 0][w; λ] = [2c_S; 1] on the support of `w` and keep the
/// answer only if it is feasible.
fn polish(p: &SimplexQpProblem, w: &[f64]) -> Option<Vec<f64>> {
    let n = p.len();
    let support: Vec<usize> = (0..n).filter(|&i| w[i] > 1e-10).collect();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = 2.0 * p.gram[i * n + j];
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
        rhs[r] = 2.0 * p.linear[i];
    }
    rhs[k] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let mut out = vec![0.0; n];
    for (r, &i) in support.iter().enumerate() {
        let v = sol[r];
        if !v.is_finite() || v < -1e-12 {
            return None;
        }
        out[i] = v.max(0.0);
    }
    let s: f64 = out.iter().sum();
    Some(out.iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_on_simplex() {
        let p = project_simplex(&[0.3, -2.0, 5.0, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0]);
        let q = project_simplex(&[0.2, 0.3, 0.5]);
        assert!(q.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn single_atom() {
        let p = SimplexQpProblem::new(vec![2.0], vec![-7.0], 0.0).unwrap();
        assert_eq!(solve_simplex_qp(&p, 1e-10, 100).unwrap().weights, vec![1.0]);
    }

    #[test]
    fn identity_gram_hand_solution() {
        // min ‖w‖² − 2cᵀw: w = P(c) = (0.9, 0.1, 0) shifted by θ = 0 → (0.9, 0.1, 0)
        let gram = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let p = SimplexQpProblem::new(gram, vec![0.9, 0.1, 0.0], 0.0).unwrap();
        let s = solve_simplex_qp(&p, 1e-12, 10_000).unwrap();
        assert!(s.converged);
        for (a, b) in s.weights.iter().zip([0.9, 0.1, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_symmetric_gram_rejected() {
        assert!(SimplexQpProblem::new(vec![1.0, 0.5, 0.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn large_linear_terms_still_converge() {
        // interior optimum with |c| ~ 185: the polish step must be kept
        let gram = vec![0.16294726420309943, 0.039361914267168105, 0.039361914267168105, 1.0];
        let p = SimplexQpProblem::new(gram, vec![-184.86821370138722, -184.82756505923936], 0.0).unwrap();
        let s = solve_simplex_qp(&p, 1e-10, 50_000).unwrap();
        assert!(s.converged, "residual {}", s.kkt_residual);
        // stationarity on the edge: 2(G11 − G12) w1 − 2(G22 − G12)(1 − w1) = 2(c1 − c2)
        let (g11, g12, g22) = (0.16294726420309943, 0.039361914267168105, 1.0);
        let w1 = ((-184.86821370138722 + 184.82756505923936) + g22 - g12) / (g11 - 2.0 * g12 + g22);
        assert!((s.weights[0] - w1).abs() < 1e-12);
    }
}
