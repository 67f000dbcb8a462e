use super::{mean, require, sorted, variance, StatsError};

/// Standardized mean difference `(mean_a - mean_b) / s_pooled`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    require(a, 2)?;
    require(b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

/// `(#{a > b} - #{a < b}) / (n_a n_b)` over all cross pairs, counted in
/// `O((n_a + n_b) log n_b)` by binary search in the sorted second sample.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    require(a, 1)?;
    require(b, 1)?;
    let b = sorted(b);
    let (mut gt, mut lt) = (0u64, 0u64);
    for &x in a {
        let below = b.partition_point(|&y| y < x);
        let at_or_below = b.partition_point(|&y| y <= x);
        gt += below as u64;
        lt += (b.len() - at_or_below) as u64;
    }
    Ok((gt as f64 - lt as f64) / (a.len() * b.len()) as f64)
}
