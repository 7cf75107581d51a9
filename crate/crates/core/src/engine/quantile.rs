//! The α-quantile screening rule.
//!
//! The threshold is the smallest observed error `q` such that the fraction
//! of errors `<= q` reaches `alpha`. Equivalently, the order statistic at rank
//! `max(1, ceil(alpha * len))`. The rank is computed from the fraction
//! `r / len` directly so a product like `0.07 * 100` that lands just above an
//! integer does not bump the rank.

use super::SwagError;

/// Smallest `r` in `1..=len` with `r / len >= alpha`.
pub fn quantile_rank(len: usize, alpha: f64) -> usize {
    assert!(len > 0);
    let n = len as f64;
    let mut r = ((alpha * n).ceil() as usize).clamp(1, len);
    while r > 1 && (r - 1) as f64 / n >= alpha {
        r -= 1;
    }
    while r < len && (r as f64 / n) < alpha {
        r += 1;
    }
    r
}

pub fn alpha_quantile(errors: &[f64], alpha: f64) -> Result<f64, SwagError> {
    if errors.is_empty() {
        return Err(SwagError::EmptyInput);
    }
    let rank = quantile_rank(errors.len(), alpha);
    let mut sorted = errors.to_vec();
    let (_, q, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*q)
}
