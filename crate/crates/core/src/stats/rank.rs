use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{require, StatsError};

/// Combined sample size up to which p-values are computed exactly.
pub const EXACT_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: number of (a, b) pairs with a > b, ties counting one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: PMethod,
}

/// Average ranks (1-based) of the pooled sample, plus the tie-group sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<(f64, usize)> = a
        .iter()
        .chain(b)
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    idx.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; idx.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for item in &idx[i..=j] {
            ranks[item.1] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test.
///
/// For `n_a + n_b <= EXACT_LIMIT` the p-value is the exact permutation
/// probability `P(|U - n_a n_b / 2| >= |U_obs - n_a n_b / 2|)` over all
/// relabelings of the pooled sample (ties handled through average ranks).
/// Larger samples use the normal approximation with tie-corrected variance
/// and a 0.5 continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    require(a, 1)?;
    require(b, 1)?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let (ranks, ties) = pooled_ranks(a, b);
    let rank_sum: f64 = ranks[..na].iter().sum();
    let u = rank_sum - (na * (na + 1)) as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let observed: usize = doubled[..na].iter().sum();
        return Ok(MannWhitney {
            u,
            p: exact_p(&doubled, na, observed),
            method: PMethod::Exact,
        });
    }

    let mean = (na * nb) as f64 / 2.0;
    let nf = n as f64;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / (nf * (nf - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term);
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p,
        method: PMethod::Normal,
    })
}

/// Exact two-sided p from the distribution of the doubled rank sum of a
/// size-`na` subset, computed by dynamic programming.
fn exact_p(doubled: &[usize], na: usize, observed: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0.0f64; total + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in doubled {
        for k in (1..=na).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let (src, dst) = (&lower[k - 1], &mut upper[0]);
            for s in (r..=total).rev() {
                dst[s] += src[s - r];
            }
        }
    }
    // Mean of the doubled rank sum is na * (n + 1).
    let centre = (na * (doubled.len() + 1)) as i64;
    let dev = (observed as i64 - centre).abs();
    let (mut hit, mut all) = (0.0, 0.0);
    for (s, &c) in counts[na].iter().enumerate() {
        all += c;
        if (s as i64 - centre).abs() >= dev {
            hit += c;
        }
    }
    (hit / all).min(1.0)
}
