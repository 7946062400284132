//! Ranking and classification metrics.

use crate::error::{Error, Result};

/// Area under the ROC curve via the rank-sum (Mann-Whitney) statistic.
/// Tied scores receive their average rank, so ties between a positive and a
/// negative count as half a concordant pair.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Mismatch {
            context: "auc inputs".into(),
            expected: scores.len().to_string(),
            found: positive.len().to_string(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Invalid("auc scores must be finite".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut lo = 0;
    while lo < order.len() {
        let mut hi = lo;
        while hi + 1 < order.len() && scores[order[hi + 1]] == scores[order[lo]] {
            hi += 1;
        }
        // 1-based positions lo+1 ..= hi+1 share the average rank.
        let avg_rank = (lo + hi + 2) as f64 / 2.0;
        for &idx in &order[lo..=hi] {
            if positive[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        lo = hi + 1;
    }
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Fraction of matching predictions.
pub fn accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Mismatch {
            context: "accuracy inputs".into(),
            expected: truth.len().to_string(),
            found: pred.len().to_string(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Invalid("accuracy of an empty prediction set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Fraction of positive scores strictly greater than the k-th largest
/// negative score.
pub fn hits_at_k(pos_scores: &[f64], neg_scores: &[f64], k: usize) -> Result<f64> {
    if pos_scores.is_empty() {
        return Err(Error::Invalid("hits@k needs positive scores".into()));
    }
    if k == 0 || k > neg_scores.len() {
        return Err(Error::Invalid(format!(
            "hits@k needs 1 <= k <= {} negatives, got k = {k}",
            neg_scores.len()
        )));
    }
    let mut sorted: Vec<f64> = neg_scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = sorted[k - 1];
    let hits = pos_scores.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / pos_scores.len() as f64)
}
