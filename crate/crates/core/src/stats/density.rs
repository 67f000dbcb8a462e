use serde::{Deserialize, Serialize};

use super::{quantile_sorted, require, sorted, variance, StatsError};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gauss(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, falling back to the standard
/// deviation when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64, StatsError> {
    require(values, 2)?;
    let sd = variance(values).sqrt();
    if sd <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let s = sorted(values);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

/// Gaussian kernel density on `grid`.
pub fn kde_1d(values: &[f64], grid: &[f64]) -> Result<Vec<f64>, StatsError> {
    let h = silverman_bandwidth(values)?;
    let norm = 1.0 / (values.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&g| norm * values.iter().map(|&x| gauss((g - x) / h)).sum::<f64>())
        .collect())
}

/// Fraction of values `<= g` for each grid point.
pub fn ecdf(values: &[f64], grid: &[f64]) -> Result<Vec<f64>, StatsError> {
    require(values, 1)?;
    let s = sorted(values);
    let n = s.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| s.partition_point(|&x| x <= g) as f64 / n)
        .collect())
}

/// Product-Gaussian density of (gap, ttc) pairs on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGrid {
    pub gap: Vec<f64>,
    pub ttc: Vec<f64>,
    /// Row-major, `density[i * ttc.len() + j]` at `(gap[i], ttc[j])`.
    pub density: Vec<f64>,
}

/// Bivariate KDE with per-axis bandwidth `sd * n^(-1/6)`.
pub fn risk_space_kde(
    points: &[(f64, f64)],
    gap_grid: &[f64],
    ttc_grid: &[f64],
) -> Result<RiskGrid, StatsError> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    require(&xs, 2)?;
    require(&ys, 2)?;
    let factor = (points.len() as f64).powf(-1.0 / 6.0);
    let (hx, hy) = (variance(&xs).sqrt() * factor, variance(&ys).sqrt() * factor);
    if hx <= 0.0 || hy <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let norm = 1.0 / (points.len() as f64 * hx * hy);
    let mut density = Vec::with_capacity(gap_grid.len() * ttc_grid.len());
    for &g in gap_grid {
        for &t in ttc_grid {
            let sum: f64 = points
                .iter()
                .map(|&(x, y)| gauss((g - x) / hx) * gauss((t - y) / hy))
                .sum();
            density.push(norm * sum);
        }
    }
    Ok(RiskGrid {
        gap: gap_grid.to_vec(),
        ttc: ttc_grid.to_vec(),
        density,
    })
}
