use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use super::logreg::sigmoid;
use crate::density::MixtureDensity;
use crate::error::{Error, Result};

/// Area under the ROC curve by the Mann–Whitney rank statistic, ties at midranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes in the test set"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = 0.5 * ((i + 1) + (j + 1)) as f64;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Posterior predictive P(y = 1 | x) averaged over `n_mc` draws of w from q.
pub fn predictive_probabilities(q: &MixtureDensity, test: &Dataset, n_mc: usize, seed: u64) -> Result<Vec<f64>> {
    if q.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: test.dim(),
            got: q.dim(),
        });
    }
    if n_mc == 0 {
        return Err(Error::invalid("need at least one posterior draw"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; q.dim()];
    let mut probs = vec![0.0; test.len()];
    for _ in 0..n_mc {
        q.sample_into(&mut rng, &mut w);
        for (i, p) in probs.iter_mut().enumerate() {
            let a: f64 = test.row(i).iter().zip(&w).map(|(x, y)| x * y).sum();
            *p += sigmoid(a);
        }
    }
    probs.iter_mut().for_each(|p| *p /= n_mc as f64);
    Ok(probs)
}

pub fn predictive_auc(q: &MixtureDensity, test: &Dataset, n_mc: usize, seed: u64) -> Result<f64> {
    auc(&predictive_probabilities(q, test, n_mc, seed)?, test.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn ties_and_separation() {
        assert_eq!(auc(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn five_point_example_matches_pairwise_count() {
        let s = [0.7, 0.2, 0.7, 0.4, 0.9];
        let y = [1, 0, 0, 1, 0];
        assert_eq!(auc(&s, &y).unwrap(), pairwise(&s, &y));
        assert_eq!(auc(&s, &y).unwrap(), 2.5 / 6.0);
    }
}
