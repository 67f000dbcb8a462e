use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Share of each group below a gap threshold, with the 2x2 chi-square test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTest {
    pub threshold: f64,
    pub below_a: usize,
    pub n_a: usize,
    pub below_b: usize,
    pub n_b: usize,
    pub share_a: f64,
    pub share_b: f64,
    pub chi2: f64,
    pub p_value: f64,
}

/// Pearson chi-square (no continuity correction) on the table
/// `[[below_a, n_a - below_a], [below_b, n_b - below_b]]`, one degree of freedom.
pub fn chi_square_2x2(
    below_a: usize,
    n_a: usize,
    below_b: usize,
    n_b: usize,
) -> Result<(f64, f64), StatsError> {
    if below_a > n_a || below_b > n_b {
        return Err(StatsError::Invalid("count exceeds group size".into()));
    }
    let obs = [
        [below_a as f64, (n_a - below_a) as f64],
        [below_b as f64, (n_b - below_b) as f64],
    ];
    let rows = [n_a as f64, n_b as f64];
    let cols = [obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]];
    let total = rows[0] + rows[1];
    let mut chi2 = 0.0;
    for (i, row) in obs.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / total.max(1.0);
            if e <= 0.0 {
                return Err(StatsError::ZeroExpected);
            }
            chi2 += (o - e).powi(2) / e;
        }
    }
    Ok((chi2, erfc((chi2 / 2.0).sqrt())))
}

/// Split two samples at `threshold` (strictly below counts) and test the shares.
pub fn threshold_test(a: &[f64], b: &[f64], threshold: f64) -> Result<ThresholdTest, StatsError> {
    let below_a = a.iter().filter(|&&v| v < threshold).count();
    let below_b = b.iter().filter(|&&v| v < threshold).count();
    let (chi2, p_value) = chi_square_2x2(below_a, a.len(), below_b, b.len())?;
    Ok(ThresholdTest {
        threshold,
        below_a,
        n_a: a.len(),
        below_b,
        n_b: b.len(),
        share_a: below_a as f64 / a.len() as f64,
        share_b: below_b as f64 / b.len() as f64,
        chi2,
        p_value,
    })
}

/// `min(1, family * p)`.
pub fn bonferroni(p: f64, family: usize) -> f64 {
    (p * family as f64).min(1.0)
}
