use crate::error::{Error, Result};

/// Area under the ROC curve: the probability that a random anomaly (label 1)
/// outscores a random normal (label 0), ties counting one half.
///
/// Computed from mid-ranks (Mann-Whitney U) in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    if n_pos + n_neg != labels.len() {
        return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled mid-ranks of the positives keeps everything integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end; doubled mid-rank = start + 1 + end.
        let mid2 = (start + 1 + end) as u128;
        let pos_in_tie = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        pos_rank_sum2 += mid2 * pos_in_tie;
        start = end;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // 2U = 2 * rank_sum - p (p + 1)
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}
