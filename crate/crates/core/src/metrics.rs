//! Classification and ranking metrics.

use crate::error::{Error, Result};
use crate::oracle::GroundTruthRanking;
use crate::temporal::DeltaSet;

fn check_pairs<T>(golds: &[T], preds: &[T]) -> Result<()> {
    if golds.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    if golds.len() != preds.len() {
        return Err(Error::Invalid(format!(
            "{} gold labels vs {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(golds: &[T], preds: &[T]) -> Result<f64> {
    check_pairs(golds, preds)?;
    let hits = golds.iter().zip(preds).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// Micro-averaged F1. With exactly one label per instance, micro precision
/// and micro recall both equal accuracy.
pub fn micro_f1<T: PartialEq>(golds: &[T], preds: &[T]) -> Result<f64> {
    check_pairs(golds, preds)?;
    let tp = golds.iter().zip(preds).filter(|(g, p)| g == p).count() as f64;
    let n = golds.len() as f64;
    // every miss is one false positive and one false negative
    let (fp, fneg) = (n - tp, n - tp);
    Ok(2.0 * tp / (2.0 * tp + fp + fneg))
}

/// Unweighted mean of per-label F1 over `labels`. A label that never
/// occurs in gold nor prediction scores 0.
pub fn macro_f1<T: PartialEq>(golds: &[T], preds: &[T], labels: &[T]) -> Result<f64> {
    check_pairs(golds, preds)?;
    if labels.is_empty() {
        return Err(Error::Empty("label set"));
    }
    let total: f64 = labels
        .iter()
        .map(|label| {
            let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
            for (g, p) in golds.iter().zip(preds) {
                match (g == label, p == label) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fneg += 1,
                    (false, false) => {}
                }
            }
            let denom = 2 * tp + fp + fneg;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / labels.len() as f64)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Kendall's tau-b between predicted scores and ground-truth relevance,
/// over included snippets only.
///
/// `None` with fewer than two included snippets, or when either side is a
/// single tie (tau-b is undefined there).
pub fn kendall_tau_b(scores: &[f64], truth: &GroundTruthRanking) -> Option<f64> {
    let grades = truth.grades();
    let items: Vec<(f64, f64)> = grades
        .iter()
        .zip(scores)
        .filter_map(|(g, &s)| g.map(|g| (s, -(g as f64))))
        .collect();
    if items.len() < 2 {
        return None;
    }
    let (mut num, mut x_pairs, mut y_pairs) = (0.0, 0.0, 0.0);
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            let sx = sign(a.0 - b.0);
            let sy = sign(a.1 - b.1);
            num += sx * sy;
            x_pairs += sx * sx;
            y_pairs += sy * sy;
        }
    }
    let denom = (x_pairs * y_pairs).sqrt();
    (denom > 0.0).then(|| num / denom)
}

/// Population standard deviation of the present day offsets.
pub fn dispersion_std(deltas: &DeltaSet) -> Option<f64> {
    let present: Vec<f64> = deltas.iter().flatten().map(|&d| d as f64).collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt())
}
