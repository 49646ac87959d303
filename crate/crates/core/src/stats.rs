//! Small order-statistics and summation helpers.

/// Pairwise (cascade) summation; error grows as O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Order-independent sum: sorts a copy, then sums pairwise. The result is a
/// function of the multiset of values only.
pub fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    pairwise_sum(&values)
}

/// Median of a non-empty slice; even counts average the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Index of the lower-convention empirical `q`-quantile in a sorted list of
/// length `n`: `⌈q·n⌉ − 1`, clamped to `[0, n−1]`.
pub fn lower_quantile_index(q: f64, n: usize) -> usize {
    assert!(n > 0);
    let raw = q * n as f64;
    // Snap values like 949.9999999999999 back to the intended integer.
    let nearest = raw.round();
    let ceil = if (raw - nearest).abs() < 1e-9 {
        nearest
    } else {
        raw.ceil()
    };
    (ceil as i64 - 1).clamp(0, n as i64 - 1) as usize
}

/// Lower-convention empirical `q`-quantile (no interpolation).
pub fn lower_quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[lower_quantile_index(q, v.len())])
}
