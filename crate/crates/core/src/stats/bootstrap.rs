use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantile_sorted, require, sorted, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 10_000,
            level: 0.95,
            seed: 20_240_601,
        }
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *m;
    if n % 2 == 1 {
        hi
    } else {
        let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

/// Percentile bootstrap interval for the median.
///
/// Resample `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so the
/// result is identical however the resamples are spread over threads.
pub fn bootstrap_median_ci(values: &[f64], config: &BootstrapConfig) -> Result<[f64; 2], StatsError> {
    require(values, 2)?;
    if !(config.level > 0.0 && config.level < 1.0) || config.resamples == 0 {
        return Err(StatsError::Invalid(format!(
            "level {} / resamples {}",
            config.level, config.resamples
        )));
    }
    let n = values.len();
    let mut medians: Vec<f64> = (0..config.resamples)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                buf.clear();
                buf.extend((0..n).map(|_| values[rng.random_range(0..n)]));
                median_in_place(buf)
            },
        )
        .collect();
    medians = sorted(&medians);
    let alpha = 1.0 - config.level;
    Ok([
        quantile_sorted(&medians, alpha / 2.0),
        quantile_sorted(&medians, 1.0 - alpha / 2.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample() {
        let ci = bootstrap_median_ci(&[7.0; 4], &BootstrapConfig::default()).unwrap();
        assert_eq!(ci, [7.0, 7.0]);
    }

    #[test]
    fn median_helper() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn independent_of_thread_count() {
        let v: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let cfg = BootstrapConfig {
            resamples: 2000,
            ..Default::default()
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bootstrap_median_ci(&v, &cfg).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| bootstrap_median_ci(&v, &cfg).unwrap());
        assert_eq!(one[0].to_bits(), four[0].to_bits());
        assert_eq!(one[1].to_bits(), four[1].to_bits());
        assert!(one[0] <= 5.0 && 5.0 <= one[1]);
    }

    #[test]
    fn rejects_tiny_or_bad_level() {
        assert!(bootstrap_median_ci(&[1.0], &BootstrapConfig::default()).is_err());
        let bad = BootstrapConfig {
            level: 1.0,
            ..Default::default()
        };
        assert!(bootstrap_median_ci(&[1.0, 2.0], &bad).is_err());
    }
}
