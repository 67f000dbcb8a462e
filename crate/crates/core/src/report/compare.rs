use std::path::{Path, PathBuf};

use super::{num, open, OutDir, ReportError, RunManifest, Settings};
use crate::detector::TargetKind;
use crate::metrics::{read_events_table, EventRow};
use crate::stats::{
    bonferroni, compare_metrics, ecdf, kde_1d, risk_space_kde, silverman_bandwidth,
    ComparisonReport, COMPARED_METRICS,
};

/// Grid size of the one-dimensional curves.
pub const CURVE_POINTS: usize = 256;
/// Grid size per axis of the (gap, TTC) density.
pub const RISK_GRID_POINTS: usize = 64;
const RISK_GAP_RANGE: [f64; 2] = [0.0, 25.0];
const RISK_TTC_RANGE: [f64; 2] = [0.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub n_a: usize,
    pub n_b: usize,
    /// `None` when the comparison was skipped.
    pub report: Option<ComparisonReport>,
    pub files: Vec<PathBuf>,
    pub warning: Option<String>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn metric_rows(r: &ComparisonReport) -> Vec<Vec<String>> {
    r.metrics
        .iter()
        .map(|m| {
            let t = m.result.as_ref();
            let ci = |c: Option<[f64; 2]>, i: usize| num(c.map(|v| v[i]));
            vec![
                m.metric.clone(),
                m.n_a.to_string(),
                m.n_b.to_string(),
                num(t.map(|t| t.median_a)),
                num(t.map(|t| t.median_b)),
                num(t.map(|t| t.median_b - t.median_a)),
                num(t.map(|t| t.u_statistic)),
                num(t.map(|t| t.p_value)),
                t.map(|t| format!("{:?}", t.p_method).to_lowercase()).unwrap_or_default(),
                num(t.map(|t| t.p_bonferroni)),
                num(t.and_then(|t| t.cohens_d)),
                num(t.map(|t| t.cliffs_delta)),
                ci(t.and_then(|t| t.ci_a), 0),
                ci(t.and_then(|t| t.ci_a), 1),
                ci(t.and_then(|t| t.ci_b), 0),
                ci(t.and_then(|t| t.ci_b), 1),
                m.status.clone(),
            ]
        })
        .collect()
}

/// Write ECDF and KDE curves of every compared metric. Metrics without
/// enough spread for a bandwidth get an ECDF only.
fn write_curves(
    dir: &OutDir,
    manifest: &RunManifest,
    a: &[EventRow],
    b: &[EventRow],
    notes: &mut Vec<String>,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut files = Vec::new();
    let header = ["x", "a", "b"];
    for (name, f) in COMPARED_METRICS {
        let va: Vec<f64> = a.iter().filter_map(f).collect();
        let vb: Vec<f64> = b.iter().filter_map(f).collect();
        if va.is_empty() || vb.is_empty() {
            notes.push(format!("{name}: no curves, one group has no values"));
            continue;
        }
        let all = || va.iter().chain(&vb).copied();
        let lo = all().fold(f64::INFINITY, f64::min);
        let hi = all().fold(f64::NEG_INFINITY, f64::max);
        let grid = linspace(lo, hi.max(lo + 1e-9), CURVE_POINTS);
        let (ea, eb) = (ecdf(&va, &grid)?, ecdf(&vb, &grid)?);
        let rows = (0..grid.len()).map(|i| vec![grid[i].to_string(), ea[i].to_string(), eb[i].to_string()]);
        files.push(dir.write_csv(&format!("ecdf_{name}.csv"), manifest, &header, rows)?);

        let (Ok(ha), Ok(hb)) = (silverman_bandwidth(&va), silverman_bandwidth(&vb)) else {
            notes.push(format!("{name}: no density curve, a group lacks spread"));
            continue;
        };
        let pad = 3.0 * ha.max(hb);
        let grid = linspace(lo - pad, hi + pad, CURVE_POINTS);
        let (ka, kb) = (kde_1d(&va, &grid)?, kde_1d(&vb, &grid)?);
        let rows = (0..grid.len()).map(|i| vec![grid[i].to_string(), ka[i].to_string(), kb[i].to_string()]);
        files.push(dir.write_csv(&format!("kde_{name}.csv"), manifest, &header, rows)?);
    }

    let points = |rows: &[EventRow]| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| Some((r.gap_m, r.ttc_s?))).collect()
    };
    let gx = linspace(RISK_GAP_RANGE[0], RISK_GAP_RANGE[1], RISK_GRID_POINTS);
    let gy = linspace(RISK_TTC_RANGE[0], RISK_TTC_RANGE[1], RISK_GRID_POINTS);
    match (risk_space_kde(&points(a), &gx, &gy), risk_space_kde(&points(b), &gx, &gy)) {
        (Ok(ra), Ok(rb)) => {
            let rows = (0..ra.density.len()).map(|k| {
                let (i, j) = (k / gy.len(), k % gy.len());
                vec![gx[i].to_string(), gy[j].to_string(), ra.density[k].to_string(), rb.density[k].to_string()]
            });
            files.push(dir.write_csv("risk_space.csv", manifest, &["gap_m", "ttc_s", "a", "b"], rows)?);
        }
        _ => notes.push("risk space: too few events with a defined TTC".into()),
    }
    Ok(files)
}

/// Compare AV-targeted (group a) against HDV-targeted (group b) events from
/// the table at `events`. `seed` drives the bootstrap.
pub fn cmd_compare(
    events: &Path,
    out_dir: &Path,
    settings: &Settings,
    seed: u64,
) -> Result<CompareSummary, ReportError> {
    settings.validate()?;
    let rows = read_events_table(open(events)?).map_err(|source| ReportError::Table {
        path: events.to_path_buf(),
        source,
    })?;
    let dir = OutDir::create(out_dir)?;
    let mut manifest = RunManifest::new("compare", &[events], Some(seed), settings);
    let (a, b): (Vec<EventRow>, Vec<EventRow>) =
        rows.into_iter().partition(|r| r.target_kind == TargetKind::Av);
    manifest.count("events_a", a.len());
    manifest.count("events_b", b.len());

    if a.is_empty() || b.is_empty() {
        let w = format!(
            "comparison skipped: the table holds a single population ({} AV-targeted, {} HDV-targeted)",
            a.len(),
            b.len()
        );
        manifest.notes.push(w.clone());
        let files = vec![dir.write_json("comparison.json", &manifest, &Option::<ComparisonReport>::None)?];
        dir.finish(&manifest)?;
        return Ok(CompareSummary {
            n_a: a.len(),
            n_b: b.len(),
            report: None,
            files,
            warning: Some(w),
        });
    }

    let mut report = compare_metrics(&a, &b, &settings.compare_options(seed))?;
    let mut files = write_curves(&dir, &manifest, &a, &b, &mut report.notes)?;
    manifest.notes.extend(report.notes.iter().cloned());

    files.push(dir.write_json("comparison.json", &manifest, &report)?);
    files.push(dir.write_csv(
        "comparison.csv",
        &manifest,
        &[
            "metric", "n_a", "n_b", "median_a", "median_b", "median_diff", "u", "p", "p_method",
            "p_bonferroni", "cohens_d", "cliffs_delta", "ci_a_lo", "ci_a_hi", "ci_b_lo", "ci_b_hi",
            "status",
        ],
        metric_rows(&report),
    )?);
    let sev = &report.severity;
    files.push(dir.write_csv(
        "severity.csv",
        &manifest,
        &["class", "count_a", "share_a", "count_b", "share_b"],
        (0..3).map(|i| {
            vec![
                sev.classes[i].as_str().to_string(),
                sev.counts_a[i].to_string(),
                sev.shares_a[i].to_string(),
                sev.counts_b[i].to_string(),
                sev.shares_b[i].to_string(),
            ]
        }),
    )?);
    files.push(dir.write_csv(
        "thresholds.csv",
        &manifest,
        &["threshold_m", "below_a", "n_a", "share_a", "below_b", "n_b", "share_b", "chi2", "p", "p_bonferroni"],
        report.thresholds.iter().map(|t| {
            vec![
                t.threshold.to_string(),
                t.below_a.to_string(),
                t.n_a.to_string(),
                t.share_a.to_string(),
                t.below_b.to_string(),
                t.n_b.to_string(),
                t.share_b.to_string(),
                t.chi2.to_string(),
                t.p_value.to_string(),
                bonferroni(t.p_value, settings.family).to_string(),
            ]
        }),
    )?);
    dir.finish(&manifest)?;
    Ok(CompareSummary {
        n_a: a.len(),
        n_b: b.len(),
        report: Some(report),
        files,
        warning: None,
    })
}
