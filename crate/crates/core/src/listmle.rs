//! ListMLE: the negative log Plackett-Luce likelihood of a target permutation.
//!
//! Under Plackett-Luce, a permutation is drawn by repeatedly picking the next
//! item from the remaining ones with softmax probability over their scores:
//!
//! ```text
//! P(π | s) = Π_u exp(s_π(u)) / Σ_{v ≥ u} exp(s_π(v))
//! ```
//!
//! Masked snippets never appear in the target permutation, so their scores
//! neither enter the loss nor receive gradient.

use crate::error::{Error, Result};
use crate::oracle::GroundTruthRanking;

/// Predicted scores for every snippet of one evidence set, paired with the
/// ground truth they are trained against.
#[derive(Clone, Copy, Debug)]
pub struct ScoredRanking<'a> {
    pub scores: &'a [f64],
    pub truth: &'a GroundTruthRanking,
}

/// Flattens the ground truth, ordering each tie group by snippet index.
pub fn canonical_permutation(truth: &GroundTruthRanking) -> Vec<usize> {
    truth
        .tie_groups
        .iter()
        .flat_map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g
        })
        .collect()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `lse[u] = log Σ_{v ≥ u} exp(s_π(v))`, built back to front.
fn suffix_log_sum_exp(scores: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut lse = vec![0.0; perm.len()];
    let mut acc = f64::NEG_INFINITY;
    for u in (0..perm.len()).rev() {
        acc = log_add_exp(scores[perm[u]], acc);
        lse[u] = acc;
    }
    lse
}

/// Log-probability of `perm` under the Plackett-Luce model with `scores`.
/// The empty permutation has probability 1.
pub fn permutation_log_prob(scores: &[f64], perm: &[usize]) -> f64 {
    let lse = suffix_log_sum_exp(scores, perm);
    perm.iter().zip(&lse).map(|(&j, &z)| scores[j] - z).sum()
}

fn check_finite(scores: &[f64], item: usize) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("ranking scores of item {item}")));
    }
    Ok(())
}

fn check_shape(scores: &[f64], truth: &GroundTruthRanking, item: usize) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::Invalid(format!(
            "item {item}: {} scores for {} snippets",
            scores.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Summed ListMLE loss over a batch of evidence sets.
pub fn listmle_loss(batch: &[ScoredRanking<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for (i, item) in batch.iter().enumerate() {
        check_shape(item.scores, item.truth, i)?;
        check_finite(item.scores, i)?;
        let perm = canonical_permutation(item.truth);
        total -= permutation_log_prob(item.scores, &perm);
    }
    Ok(total)
}

/// Gradient of one item's ListMLE loss with respect to every snippet score.
pub fn listmle_gradient(scores: &[f64], truth: &GroundTruthRanking) -> Result<Vec<f64>> {
    check_shape(scores, truth, 0)?;
    check_finite(scores, 0)?;
    let mut grad = vec![0.0; scores.len()];
    let perm = canonical_permutation(truth);
    if perm.len() < 2 {
        return Ok(grad);
    }
    let lse = suffix_log_sum_exp(scores, &perm);
    for (w, &j) in perm.iter().enumerate() {
        let choose: f64 = lse[..=w].iter().map(|&z| (scores[j] - z).exp()).sum();
        grad[j] = choose - 1.0;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn truth(keys: &[Option<i64>]) -> GroundTruthRanking {
        GroundTruthRanking::from_keys(keys)
    }

    #[test]
    fn canonical_breaks_ties_by_index() {
        let t = GroundTruthRanking {
            order: vec![2, 0],
            tie_groups: vec![vec![2], vec![0]],
            included: vec![true, false, true],
        };
        assert_eq!(canonical_permutation(&t), vec![2, 0]);
        let t = GroundTruthRanking {
            order: vec![1, 0, 3],
            tie_groups: vec![vec![1, 0], vec![3]],
            included: vec![true, true, false, true],
        };
        assert_eq!(canonical_permutation(&t), vec![0, 1, 3]);
        let t = GroundTruthRanking {
            order: vec![2, 1, 0],
            tie_groups: vec![vec![2, 1, 0]],
            included: vec![true; 3],
        };
        assert_eq!(canonical_permutation(&t), vec![0, 1, 2]);
    }

    #[test]
    fn log_prob_examples() {
        assert_eq!(permutation_log_prob(&[5.0], &[0]), 0.0);
        assert!((permutation_log_prob(&[0.0, 0.0], &[0, 1]) + LN2).abs() < 1e-12);
        let p = permutation_log_prob(&[3f64.ln(), 0.0], &[0, 1]);
        assert!((p - (0.75f64).ln()).abs() < 1e-12);
        assert!((p - (-0.287682)).abs() < 1e-6);
        assert_eq!(permutation_log_prob(&[1.0, 2.0], &[]), 0.0);
    }

    #[test]
    fn log_prob_is_stable_for_large_scores() {
        let p = permutation_log_prob(&[1e4, 1e4 - 1.0], &[0, 1]);
        let expected = -(1.0 + (-1.0f64).exp()).ln();
        assert!((p - expected).abs() < 1e-9);
    }

    #[test]
    fn loss_examples() {
        let single = truth(&[Some(0)]);
        assert_eq!(
            listmle_loss(&[ScoredRanking {
                scores: &[3.0],
                truth: &single
            }])
            .unwrap(),
            0.0
        );

        let pair = truth(&[Some(1), Some(0)]);
        let l = listmle_loss(&[ScoredRanking {
            scores: &[0.0, 0.0],
            truth: &pair,
        }])
        .unwrap();
        assert!((l - LN2).abs() < 1e-12);

        // snippet 2 masked, snippet 1 ranked first
        let masked = truth(&[Some(0), Some(1), None]);
        let l = listmle_loss(&[ScoredRanking {
            scores: &[1.0, 2.0, 0.5],
            truth: &masked,
        }])
        .unwrap();
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        assert!((l - (-(e2 / (e2 + e1)).ln())).abs() < 1e-12);
        assert!((l - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn loss_sums_over_batch() {
        let pair = truth(&[Some(1), Some(0)]);
        let item = ScoredRanking {
            scores: &[0.0, 0.0],
            truth: &pair,
        };
        let l = listmle_loss(&[item, item, item]).unwrap();
        assert!((l - 3.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn nan_is_reported_with_item() {
        let pair = truth(&[Some(1), Some(0)]);
        let ok = ScoredRanking {
            scores: &[0.0, 0.0],
            truth: &pair,
        };
        let bad = ScoredRanking {
            scores: &[f64::NAN, 0.0],
            truth: &pair,
        };
        let err = listmle_loss(&[ok, bad]).unwrap_err();
        assert!(err.to_string().contains("item 1"), "{err}");
        assert!(err.is_numerical());
        assert!(listmle_gradient(&[f64::NAN, 0.0], &pair).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(
            listmle_gradient(&[2.0], &truth(&[Some(0)])).unwrap(),
            vec![0.0]
        );
        let g = listmle_gradient(&[0.0, 0.0], &truth(&[Some(1), Some(0)])).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
        let g = listmle_gradient(&[0.3, 1.2, -0.4], &truth(&[Some(0), None, Some(2)])).unwrap();
        assert_eq!(g[1], 0.0);
        assert!((g[0] + g[2]).abs() < 1e-12);
    }

    #[test]
    fn singleton_mask_gives_zero_gradient() {
        let g = listmle_gradient(&[0.3, 1.2, -0.4], &truth(&[None, Some(4), None])).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }
}
