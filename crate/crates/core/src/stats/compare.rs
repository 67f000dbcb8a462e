use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    bonferroni, bootstrap_median_ci, cliffs_delta, cohens_d, mann_whitney_u, median,
    shapiro_wilk, threshold_test, BootstrapConfig, PMethod, SampleSet, StatsError, ThresholdTest,
};
use crate::metrics::{EventRow, Severity, SeverityBounds};

type Extract = fn(&EventRow) -> Option<f64>;

/// The compared metrics, in report order, as events-table columns.
pub const COMPARED_METRICS: [(&str, Extract); 7] = [
    ("gap_m", |r| Some(r.gap_m)),
    ("min_dist_m", |r| Some(r.min_dist_m)),
    ("ttc_s", |r| r.ttc_s),
    ("cutin_speed_kmh", |r| Some(r.cutin_speed_kmh)),
    ("speed_diff_kmh", |r| Some(r.speed_diff_kmh)),
    ("lc_duration_s", |r| Some(r.lc_duration_s)),
    ("lead_speed_drop_kmh", |r| Some(r.lead_speed_drop_kmh)),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    pub label_a: String,
    pub label_b: String,
    /// Number of simultaneous comparisons for the Bonferroni correction.
    pub family: usize,
    pub bootstrap: BootstrapConfig,
    /// Gap thresholds for the share tests, m.
    pub thresholds: Vec<f64>,
    /// Lead-speed band for the speed-matched re-analysis, km/h, inclusive.
    pub speed_match_kmh: [f64; 2],
    pub severity: SeverityBounds,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            label_a: "HDV->AV".into(),
            label_b: "HDV->HDV".into(),
            family: 7,
            bootstrap: BootstrapConfig::default(),
            thresholds: vec![5.0, 10.0],
            speed_match_kmh: [40.0, 65.0],
            severity: SeverityBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n_a: usize,
    pub n_b: usize,
    pub median_a: f64,
    pub median_b: f64,
    pub u_statistic: f64,
    pub p_value: f64,
    pub p_method: PMethod,
    pub p_bonferroni: f64,
    /// `None` when the pooled standard deviation is zero.
    pub cohens_d: Option<f64>,
    pub cliffs_delta: f64,
    pub ci_a: Option<[f64; 2]>,
    pub ci_b: Option<[f64; 2]>,
}

impl TestResult {
    pub fn compute(
        a: &[f64],
        b: &[f64],
        family: usize,
        ci: Option<&BootstrapConfig>,
    ) -> Result<Self, StatsError> {
        let mw = mann_whitney_u(a, b)?;
        let cohens_d = match cohens_d(a, b) {
            Ok(d) => Some(d),
            Err(StatsError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        let (ci_a, ci_b) = match ci {
            Some(cfg) => (
                Some(bootstrap_median_ci(a, cfg)?),
                Some(bootstrap_median_ci(b, cfg)?),
            ),
            None => (None, None),
        };
        Ok(Self {
            n_a: a.len(),
            n_b: b.len(),
            median_a: median(a),
            median_b: median(b),
            u_statistic: mw.u,
            p_value: mw.p,
            p_method: mw.method,
            p_bonferroni: bonferroni(mw.p, family),
            cohens_d,
            cliffs_delta: cliffs_delta(a, b)?,
            ci_a,
            ci_b,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub n_a: usize,
    pub n_b: usize,
    /// Fraction of events with a defined value (below 1 only for TTC).
    pub coverage_a: f64,
    pub coverage_b: f64,
    /// `"ok"` or `"insufficient data"`.
    pub status: String,
    pub result: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityScreen {
    pub metric: String,
    pub group: String,
    pub n: usize,
    pub w: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityShares {
    pub bounds: SeverityBounds,
    pub classes: [Severity; 3],
    pub counts_a: [usize; 3],
    pub counts_b: [usize; 3],
    pub shares_a: [f64; 3],
    pub shares_b: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMatched {
    pub range_kmh: [f64; 2],
    pub n_a: usize,
    pub n_b: usize,
    /// Gap comparison on the matched subsamples.
    pub gap: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub seed: u64,
    pub family: usize,
    pub resamples: usize,
    pub level: f64,
    pub metrics: Vec<MetricReport>,
    pub thresholds: Vec<ThresholdTest>,
    pub severity: SeverityShares,
    pub speed_matched: SpeedMatched,
    pub normality: Vec<NormalityScreen>,
    /// Maneuvers (scenario, cutter, entry frame) that produced more than one event.
    pub shared_maneuvers: usize,
    pub notes: Vec<String>,
}

impl ComparisonReport {
    pub fn metric(&self, name: &str) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

fn values(rows: &[EventRow], f: Extract) -> Vec<f64> {
    rows.iter().filter_map(f).collect()
}

/// Gap samples of the events whose lead speed lies in `range_kmh` (inclusive).
pub fn speed_matched_subsample(
    a: &[EventRow],
    b: &[EventRow],
    range_kmh: [f64; 2],
) -> (SampleSet, SampleSet) {
    let pick = |rows: &[EventRow]| -> Vec<f64> {
        rows.iter()
            .filter(|r| {
                let v = r.target_speed_kmh();
                v >= range_kmh[0] && v <= range_kmh[1]
            })
            .map(|r| r.gap_m)
            .collect()
    };
    (
        SampleSet {
            label: "a".into(),
            values: pick(a),
        },
        SampleSet {
            label: "b".into(),
            values: pick(b),
        },
    )
}

fn severity_shares(a: &[EventRow], b: &[EventRow], bounds: SeverityBounds) -> SeverityShares {
    let count = |rows: &[EventRow]| {
        let mut c = [0usize; 3];
        for r in rows {
            c[bounds.classify(r.gap_m) as usize] += 1;
        }
        c
    };
    let share = |c: [usize; 3], n: usize| c.map(|k| k as f64 / n.max(1) as f64);
    let (counts_a, counts_b) = (count(a), count(b));
    SeverityShares {
        bounds,
        classes: Severity::ALL,
        counts_a,
        counts_b,
        shares_a: share(counts_a, a.len()),
        shares_b: share(counts_b, b.len()),
    }
}

fn shared_maneuvers(a: &[EventRow], b: &[EventRow]) -> usize {
    let mut seen: HashMap<(&str, &str, usize), usize> = HashMap::new();
    for r in a.iter().chain(b) {
        *seen
            .entry((&r.scenario_id, &r.cutter_id, r.entry_frame))
            .or_default() += 1;
    }
    seen.values().filter(|&&k| k > 1).count()
}

/// Full two-population comparison of event tables `a` and `b`.
pub fn compare_metrics(
    a: &[EventRow],
    b: &[EventRow],
    opts: &CompareOptions,
) -> Result<ComparisonReport, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut notes = Vec::new();
    let mut metrics = Vec::new();
    let mut normality = Vec::new();
    for (name, f) in COMPARED_METRICS {
        let (va, vb) = (values(a, f), values(b, f));
        let ci = (name == "gap_m").then_some(&opts.bootstrap);
        let result = if va.len() >= 2 && vb.len() >= 2 {
            Some(TestResult::compute(&va, &vb, opts.family, ci)?)
        } else {
            None
        };
        metrics.push(MetricReport {
            metric: name.to_string(),
            n_a: va.len(),
            n_b: vb.len(),
            coverage_a: va.len() as f64 / a.len() as f64,
            coverage_b: vb.len() as f64 / b.len() as f64,
            status: if result.is_some() { "ok" } else { "insufficient data" }.into(),
            result,
        });
        for (group, v) in [(&opts.label_a, &va), (&opts.label_b, &vb)] {
            let sw = shapiro_wilk(v, opts.bootstrap.seed).ok();
            normality.push(NormalityScreen {
                metric: name.to_string(),
                group: group.clone(),
                n: v.len(),
                w: sw.map(|s| s.w),
                p: sw.map(|s| s.p),
            });
        }
    }

    let (ga, gb) = (values(a, |r| Some(r.gap_m)), values(b, |r| Some(r.gap_m)));
    let mut thresholds = Vec::new();
    for &t in &opts.thresholds {
        match threshold_test(&ga, &gb, t) {
            Ok(tt) => thresholds.push(tt),
            Err(e) => notes.push(format!("threshold {t} m skipped: {e}")),
        }
    }

    let (ma, mb) = speed_matched_subsample(a, b, opts.speed_match_kmh);
    let matched_gap = if ma.n() >= 2 && mb.n() >= 2 {
        Some(TestResult::compute(&ma.values, &mb.values, opts.family, None)?)
    } else {
        notes.push("speed-matched comparison: insufficient data".into());
        None
    };

    let shared = shared_maneuvers(a, b);
    if shared > 0 {
        notes.push(format!(
            "{shared} maneuvers produced events against more than one target"
        ));
    }

    Ok(ComparisonReport {
        label_a: opts.label_a.clone(),
        label_b: opts.label_b.clone(),
        n_a: a.len(),
        n_b: b.len(),
        seed: opts.bootstrap.seed,
        family: opts.family,
        resamples: opts.bootstrap.resamples,
        level: opts.bootstrap.level,
        metrics,
        thresholds,
        severity: severity_shares(a, b, opts.severity),
        speed_matched: SpeedMatched {
            range_kmh: opts.speed_match_kmh,
            n_a: ma.n(),
            n_b: mb.n(),
            gap: matched_gap,
        },
        normality,
        shared_maneuvers: shared,
        notes,
    })
}
