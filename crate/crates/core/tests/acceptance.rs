//! Acceptance suite: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test -p cutin-core --test acceptance`. The process exits
//! nonzero when any criterion fails.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::time::{Duration, Instant};

use cutin_core::detector::{
    detect_cutins, diagnose_cutins, CutInEvent, DetectorConfig, TargetKind,
};
use cutin_core::metrics::compute_all;
use cutin_core::report::{cmd_compare, cmd_detect, cmd_replay, cmd_synth, Settings};
use cutin_core::stats::{
    bootstrap_median_ci, chi_square_2x2, cliffs_delta, cohens_d, ecdf, kde_1d, mann_whitney_u,
    silverman_bandwidth, BootstrapConfig,
};
use cutin_core::synth::{
    generate_corpus, CorpusConfig, KindDistribution, Preset, AV_ID, CUTTER_ID,
    REPLAY_TWIN_ID,
};
use cutin_core::trajmodel::{scenario_eligible, EligibilityRule, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn chi_square_reconstruction() -> Verdict {
    let (chi2, p) = chi_square_2x2(480, 706, 1643, 3172).map_err(|e| e.to_string())?;
    let reps = 10_000u32;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(chi_square_2x2(
            std::hint::black_box(480),
            706,
            1643,
            3172,
        ))
        .ok();
    }
    let per_call = start.elapsed() / reps;
    ensure((58.5..=62.5).contains(&chi2), || format!("chi2 {chi2} outside [58.5, 62.5]"))?;
    ensure(p < 1e-13, || format!("p {p:e} not below 1e-13"))?;
    ensure(per_call < Duration::from_millis(1), || format!("{per_call:?} per call"))?;
    Ok(format!("chi2 = {chi2:.3}, p = {p:.3e}, {per_call:?} per call"))
}

fn replay_twin_instants() -> Verdict {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let synth = cmd_synth(&Preset::ReplayTwin.config(1), &tmp.path().join("synth")).map_err(|e| e.to_string())?;
    let s = cmd_replay(
        &synth.corpus_path,
        REPLAY_TWIN_ID,
        CUTTER_ID,
        AV_ID,
        &tmp.path().join("replay"),
        &Settings::default(),
    )
    .map_err(|e| e.to_string())?;
    let k = &s.key_instants;
    ensure(k.len() == 4, || format!("{} key instants", k.len()))?;
    for (inst, want) in k.iter().zip([12.0, 7.6, 5.0]) {
        ensure((inst.gap - want).abs() <= 0.2, || format!("{}: gap {} vs {want}", inst.name, inst.gap))?;
    }
    for (inst, want) in k[1..3].iter().zip([2.5, 1.1]) {
        let ttc = inst.ttc.ok_or_else(|| format!("{}: no TTC", inst.name))?;
        ensure((ttc - want).abs() <= 0.1, || format!("{}: ttc {ttc} vs {want}", inst.name))?;
    }
    let empty_ok = s.frames.iter().all(|f| f.dv_app > 0.0 || f.ttc.is_none())
        && k.iter().all(|i| i.dv_app > 0.0 || (i.ttc.is_none() && i.note.contains("CI faster")));
    ensure(empty_ok, || "TTC present where the cutter is faster".into())?;
    let text = std::fs::read_to_string(&s.files[0]).map_err(|e| e.to_string())?;
    let cells_ok = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .all(|l| {
            let c: Vec<&str> = l.split(',').collect();
            c[3].parse::<f64>().map_or(false, |dv| dv > 0.0 || c[4].is_empty())
        });
    ensure(cells_ok, || "time-series file has a TTC cell where dv <= 0".into())?;
    let gaps: Vec<String> = k.iter().map(|i| format!("{:.2}", i.gap)).collect();
    Ok(format!(
        "gaps {} m, TTC {:.2}/{:.2} s",
        gaps.join("/"),
        k[1].ttc.unwrap_or(f64::NAN),
        k[2].ttc.unwrap_or(f64::NAN)
    ))
}

fn event_key(e: &CutInEvent) -> (String, String, String, TargetKind, usize, usize, usize) {
    (
        e.scenario_id.clone(),
        e.cutter_id.clone(),
        e.target_id.clone(),
        e.target_kind,
        e.onset_frame,
        e.entry_frame,
        e.completion_frame,
    )
}

fn detector_oracle() -> Verdict {
    let config = CorpusConfig {
        n_scenarios: 500,
        negative_fraction: 0.18,
        seed: 4242,
        ..CorpusConfig::default()
    };
    let start = Instant::now();
    let (corpus, detected, diagnostics) = single_thread(|| {
        let corpus = generate_corpus(&config).map_err(|e| e.to_string())?;
        let det = DetectorConfig::default();
        let rule = EligibilityRule::default();
        let detected: Vec<CutInEvent> = corpus
            .scenarios
            .iter()
            .filter(|s| scenario_eligible(s, &rule))
            .flat_map(|s| detect_cutins(s, &det).into_iter().map(|(e, _)| e))
            .collect();
        let diagnostics: HashMap<String, _> = corpus
            .scenarios
            .iter()
            .zip(&corpus.labels)
            .filter(|(_, l)| l.expected_event.is_none())
            .map(|(s, _)| (s.scenario_id.clone(), diagnose_cutins(s, &det)))
            .collect();
        Ok::<_, String>((corpus, detected, diagnostics))
    })?;
    let elapsed = start.elapsed();

    let expected: Vec<CutInEvent> = corpus
        .labels
        .iter()
        .filter_map(|l| Some(l.expected_event.as_ref()?.to_event(&l.scenario_id)))
        .collect();
    let want: HashMap<_, _> = expected.iter().map(|e| (event_key(e), e)).collect();
    let got: HashMap<_, _> = detected.iter().map(|e| (event_key(e), e)).collect();
    let tp = got.keys().filter(|k| want.contains_key(*k)).count();
    let recall = tp as f64 / want.len() as f64;
    let precision = tp as f64 / got.len().max(1) as f64;
    ensure(recall == 1.0 && precision == 1.0, || {
        format!("recall {recall}, precision {precision} ({tp} of {} planted, {} detected)", want.len(), got.len())
    })?;

    let mut per_criterion = [0usize; 8];
    let mut lane_keep = 0;
    for label in corpus.labels.iter().filter(|l| l.expected_event.is_none()) {
        let rows: Vec<_> = diagnostics[&label.scenario_id]
            .iter()
            .filter(|r| r.cutter_id == CUTTER_ID && r.target_id == AV_ID)
            .collect();
        match label.violated_criterion {
            Some(c) => {
                ensure(rows.len() == 1 && rows[0].verdict.failed() == vec![c], || {
                    let failed: Vec<_> = rows.iter().map(|r| r.verdict.failed()).collect();
                    format!("{}: planted {c:?}, failed {failed:?}", label.scenario_id)
                })?;
                per_criterion[c.index()] += 1;
            }
            None => {
                ensure(rows.is_empty(), || format!("{}: lane keeping produced a candidate", label.scenario_id))?;
                lane_keep += 1;
            }
        }
    }
    ensure(per_criterion.iter().all(|&n| n > 0), || format!("criteria without a negative: {per_criterion:?}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("{elapsed:?} single-threaded"))?;
    Ok(format!(
        "{tp}/{} events recovered, 0 spurious; negatives per c1..c8 {per_criterion:?} + {lane_keep} lane-keep, each failing only its criterion; {elapsed:.2?} single-threaded",
        want.len()
    ))
}

/// Two-sided exact p by enumerating every relabeling of the pooled sample.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let u = |mask: u32| {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                u += if pooled[i] > pooled[j] {
                    1.0
                } else if pooled[i] == pooled[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        u
    };
    let mean = (na * (n - na)) as f64 / 2.0;
    let observed = (u((1 << na) - 1) - mean).abs();
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in (0u32..1 << n).filter(|m| m.count_ones() as usize == na) {
        total += 1;
        if (u(mask) - mean).abs() >= observed - 1e-9 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

fn statistics_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for n in 2..=10 {
        for na in 1..n {
            for rep in 0..30 {
                let draw = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> {
                    if rep % 2 == 0 {
                        (0..k).map(|_| rng.random_range(0..4) as f64).collect()
                    } else {
                        (0..k).map(|_| rng.random::<f64>()).collect()
                    }
                };
                let (a, b) = (draw(&mut rng, na), draw(&mut rng, n - na));
                let got = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?.p;
                let diff = (got - brute_force_p(&a, &b)).abs();
                worst = worst.max(diff);
                ensure(diff <= 1e-12, || format!("MWU p off by {diff:e} for {a:?} vs {b:?}"))?;
                pairs += 1;
            }
        }
    }

    for _ in 0..100 {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..50).map(|_| (rng.random::<f64>() * 20.0).round() / 2.0).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let mut s = 0i64;
        for x in &a {
            for y in &b {
                s += i64::from(x > y) - i64::from(x < y);
            }
        }
        let brute = s as f64 / 2500.0;
        let got = cliffs_delta(&a, &b).map_err(|e| e.to_string())?;
        ensure(got == brute, || format!("delta {got} vs brute force {brute}"))?;
    }

    let d = cohens_d(&[0.0, 2.0], &[2.0, 4.0]).map_err(|e| e.to_string())?;
    ensure((d + 1.4142).abs() <= 1e-4 && (d + SQRT_2).abs() <= 1e-9, || format!("d = {d}"))?;
    Ok(format!(
        "MWU exact on {pairs} pairs (max error {worst:.1e}); delta exact on 100 50x50 pairs; d = {d:.6}"
    ))
}

fn planted_recovery() -> Verdict {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let config = Preset::PaperMimic.config(20240601);
    let synth = cmd_synth(&config, &tmp.path().join("synth")).map_err(|e| e.to_string())?;
    let settings = Settings::default();
    let det = cmd_detect(&synth.corpus_path, &tmp.path().join("detect"), &settings).map_err(|e| e.to_string())?;
    let cmp = cmd_compare(&det.events_path, &tmp.path().join("compare"), &settings, 20240601)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let report = cmp.report.ok_or("comparison skipped")?;
    ensure(report.n_a == 700 && report.n_b == 3000, || format!("sizes {}/{}", report.n_a, report.n_b))?;
    let gap = report
        .metric("gap_m")
        .and_then(|m| m.result.as_ref())
        .ok_or("no gap result")?;
    let diff = gap.median_b - gap.median_a;
    let d = gap.cohens_d.ok_or("no Cohen's d")?;
    ensure((diff - 1.99).abs() <= 0.3, || format!("median difference {diff}"))?;
    ensure(d < 0.0, || format!("d = {d}"))?;
    ensure(gap.p_bonferroni < 0.007, || format!("p_bonferroni = {}", gap.p_bonferroni))?;

    let planted = |k: &KindDistribution| {
        let (crit, moder) = (k.gap_m.cdf_below(5.0), k.gap_m.cdf_below(10.0));
        [crit, moder - crit, 1.0 - moder]
    };
    let d_cfg = &config.distributions;
    let (pa, pb) = (planted(&d_cfg.av), planted(&d_cfg.hdv));
    let sev = &report.severity;
    let worst = (0..3)
        .flat_map(|i| [(sev.shares_a[i] - pa[i]).abs(), (sev.shares_b[i] - pb[i]).abs()])
        .fold(0.0, f64::max);
    ensure(worst <= 0.05, || {
        format!("severity shares {:?}/{:?} vs planted {pa:?}/{pb:?}", sev.shares_a, sev.shares_b)
    })?;
    ensure(elapsed < Duration::from_secs(120), || format!("{elapsed:?}"))?;
    Ok(format!(
        "median diff {diff:.3} m, d = {d:.3}, p_bonf = {:.2e}, moderate {:.1}%/{:.1}% (planted {:.1}%/{:.1}%), worst share error {:.1} pp, {elapsed:.2?}",
        gap.p_bonferroni,
        100.0 * sev.shares_a[1],
        100.0 * sev.shares_b[1],
        100.0 * pa[1],
        100.0 * pb[1],
        100.0 * worst
    ))
}

fn bootstrap_determinism_and_coverage() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = Normal::new(10.0, 2.0).expect("valid");
    let sample: Vec<f64> = (0..300).map(|_| normal.sample(&mut rng)).collect();
    let config = BootstrapConfig::default();
    let bits = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool")
            .install(|| bootstrap_median_ci(&sample, &config))
            .map(|ci| ci.map(f64::to_bits))
    };
    let runs: Vec<_> = [1, 1, 3, 8].into_iter().map(bits).collect();
    ensure(runs.iter().all(|r| r.is_ok() && *r == runs[0]), || "CI differs across runs or thread counts".into())?;

    let trials = 500;
    let mut covered = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + t);
        let x: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_median_ci(&x, &BootstrapConfig { seed: t, ..config }).map_err(|e| e.to_string())?;
        covered += usize::from(ci[0] <= 10.0 && 10.0 <= ci[1]);
    }
    let coverage = covered as f64 / trials as f64;
    ensure(coverage >= 0.93, || format!("coverage {coverage}"))?;
    Ok(format!("bit-identical over 1/3/8 threads; coverage {covered}/{trials} = {:.1}%", 100.0 * coverage))
}

fn kde_and_ecdf() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = 20 + 40 * k;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    rng.random::<f64>() * 3.0
                } else {
                    5.0 + 4.0 * rng.random::<f64>().powi(2)
                }
            })
            .collect();
        let h = silverman_bandwidth(&x).map_err(|e| e.to_string())?;
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let m = 8001;
        let step = (hi - lo + 16.0 * h) / (m - 1) as f64;
        let grid: Vec<f64> = (0..m).map(|i| lo - 8.0 * h + step * i as f64).collect();
        let dens = kde_1d(&x, &grid).map_err(|e| e.to_string())?;
        let integral = step * (dens.iter().sum::<f64>() - (dens[0] + dens[m - 1]) / 2.0);
        worst = worst.max((integral - 1.0).abs());
        ensure((integral - 1.0).abs() <= 1e-3, || format!("density integrates to {integral}"))?;

        let e = ecdf(&x, &grid).map_err(|e| e.to_string())?;
        ensure(e.windows(2).all(|w| w[0] <= w[1]), || "ECDF decreases".into())?;
        ensure(e[0] == 0.0 && e[m - 1] == 1.0, || format!("ECDF endpoints {} {}", e[0], e[m - 1]))?;
    }
    Ok(format!("20 samples: max |integral - 1| = {worst:.1e}; ECDF monotone from 0 to 1"))
}

fn metrics_close(a: &Scenario, b: &Scenario, ea: &CutInEvent, eb: &CutInEvent) -> Result<f64, String> {
    let ma = compute_all(ea, a).map_err(|e| e.to_string())?;
    let mb = compute_all(eb, b).map_err(|e| e.to_string())?;
    ensure(ma.severity == mb.severity && ma.ttc.is_some() == mb.ttc.is_some(), || {
        format!("{}: severity or TTC presence changed", a.scenario_id)
    })?;
    let fields = [
        (ma.gap_entry, mb.gap_entry),
        (ma.ttc.unwrap_or(0.0), mb.ttc.unwrap_or(0.0)),
        (ma.min_distance, mb.min_distance),
        (ma.cutin_speed, mb.cutin_speed),
        (ma.target_speed, mb.target_speed),
        (ma.speed_diff, mb.speed_diff),
        (ma.lc_duration, mb.lc_duration),
        (ma.lead_speed_drop, mb.lead_speed_drop),
    ];
    Ok(fields.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn frame_invariance() -> Verdict {
    let corpus = generate_corpus(&CorpusConfig {
        n_scenarios: 60,
        negative_fraction: 0.3,
        noise_std: 0.02,
        seed: 31,
        ..CorpusConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let det = DetectorConfig::default();
    let rule = EligibilityRule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut transforms, mut events, mut worst) = (0, 0, 0.0f64);
    for s in &corpus.scenarios {
        let base = detect_cutins(s, &det);
        for _ in 0..4 {
            let angle = rng.random_range(0.0..2.0 * PI);
            let (tx, ty) = (rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0));
            let moved = s.transformed(angle, tx, ty);
            transforms += 1;
            ensure(scenario_eligible(s, &rule) == scenario_eligible(&moved, &rule), || {
                format!("{}: eligibility changed", s.scenario_id)
            })?;
            let after = detect_cutins(&moved, &det);
            let same = base.len() == after.len()
                && base.iter().zip(&after).all(|((a, va), (b, vb))| event_key(a) == event_key(b) && a.side == b.side && va == vb);
            ensure(same, || format!("{}: events changed under rotation {angle:.3}", s.scenario_id))?;
            for ((a, _), (b, _)) in base.iter().zip(&after) {
                let err = metrics_close(s, &moved, a, b)?;
                worst = worst.max(err);
                ensure(err <= 1e-6, || format!("{}: metric moved by {err:e}", s.scenario_id))?;
                events += 1;
            }
        }
    }
    Ok(format!("{transforms} transforms, {events} event comparisons, max metric change {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("chi-square reconstruction", chi_square_reconstruction),
        ("replay twin", replay_twin_instants),
        ("detector oracle", detector_oracle),
        ("statistics oracles", statistics_oracles),
        ("planted-distribution recovery", planted_recovery),
        ("bootstrap determinism and coverage", bootstrap_determinism_and_coverage),
        ("KDE and ECDF", kde_and_ecdf),
        ("frame invariance", frame_invariance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.2?}]", start.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
