//! Correlation, classification and regression metrics.

use std::collections::BTreeSet;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn accuracy<T: PartialEq>(truth: &[T], pred: &[T]) -> Option<f64> {
    if truth.is_empty() || truth.len() != pred.len() {
        return None;
    }
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    Some(hits as f64 / truth.len() as f64)
}

/// Unweighted mean of per-class F1 over every label in `truth` or `pred`.
/// A class with no true and no predicted members cannot occur; a class with
/// zero precision and recall scores 0.
pub fn macro_f1<T: Ord + Clone>(truth: &[T], pred: &[T]) -> Option<f64> {
    if truth.is_empty() || truth.len() != pred.len() {
        return None;
    }
    let classes: BTreeSet<&T> = truth.iter().chain(pred).collect();
    let mut sum = 0.0;
    for c in &classes {
        let tp = truth.iter().zip(pred).filter(|(t, p)| t == c && p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| t != c && p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, p)| t == c && p != c).count() as f64;
        let denom = 2.0 * tp + fp + fn_;
        sum += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    Some(sum / classes.len() as f64)
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Option<f64> {
    if truth.is_empty() || truth.len() != pred.len() {
        return None;
    }
    Some(truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len() as f64)
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Option<f64> {
    if truth.is_empty() || truth.len() != pred.len() {
        return None;
    }
    Some((truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / truth.len() as f64).sqrt())
}

/// Degree of agreement: over pairs with `truth_i > truth_j`, the fraction with
/// `pred_i > pred_j`, prediction ties counting one half. `None` when every
/// true label is equal.
pub fn doa(truth: &[f64], pred: &[f64]) -> Option<f64> {
    if truth.len() != pred.len() {
        return None;
    }
    let mut pairs = 0u64;
    let mut agree = 0.0;
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            if truth[i] > truth[j] {
                pairs += 1;
                if pred[i] > pred[j] {
                    agree += 1.0;
                } else if pred[i] == pred[j] {
                    agree += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| agree / pairs as f64)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
