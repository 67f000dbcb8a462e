use cutin_core::metrics::{time_to_collision, SeverityBounds};
use cutin_core::stats::{
    bonferroni, bootstrap_median_ci, chi_square_2x2, cliffs_delta, cohens_d, ecdf, kde_1d,
    mann_whitney_u, median, BootstrapConfig,
};
use proptest::prelude::*;

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..max)
}

/// Samples drawn from a small grid, so ties are common.
fn tied_sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0..6i32).prop_map(f64::from), 1..max)
}

proptest! {
    #[test]
    fn mann_whitney_is_label_symmetric(a in tied_sample(30), b in sample(40)) {
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn mann_whitney_of_identical_samples_is_null(a in tied_sample(40)) {
        let r = mann_whitney_u(&a, &a).unwrap();
        prop_assert!((r.u - (a.len() * a.len()) as f64 / 2.0).abs() < 1e-9);
        prop_assert!(r.p > 0.99);
    }

    #[test]
    fn cliffs_delta_is_antisymmetric_and_bounded(a in tied_sample(60), b in sample(60)) {
        let d = cliffs_delta(&a, &b).unwrap();
        prop_assert_eq!(d, -cliffs_delta(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&d));
        prop_assert_eq!(cliffs_delta(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn cliffs_delta_tracks_mann_whitney_u(a in tied_sample(30), b in tied_sample(30)) {
        let u = mann_whitney_u(&a, &b).unwrap().u;
        let d = cliffs_delta(&a, &b).unwrap();
        let nn = (a.len() * b.len()) as f64;
        prop_assert!((d - (2.0 * u / nn - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_flips_sign_and_ignores_shift(
        a in prop::collection::vec(-50.0..50.0f64, 2..40),
        b in prop::collection::vec(-50.0..50.0f64, 2..40),
        shift in -100.0..100.0f64,
    ) {
        if let (Ok(d), Ok(r)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
            prop_assert!((d + r).abs() < 1e-9);
            let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
            prop_assert!((cohens_d(&sa, &sb).unwrap() - d).abs() < 1e-6);
        }
    }

    #[test]
    fn chi_square_is_group_symmetric(na in 1usize..500, nb in 1usize..500, fa in 0.0..1.0f64, fb in 0.0..1.0f64) {
        let (ka, kb) = ((fa * na as f64) as usize, (fb * nb as f64) as usize);
        if let Ok((c, p)) = chi_square_2x2(ka, na, kb, nb) {
            let (c2, p2) = chi_square_2x2(kb, nb, ka, na).unwrap();
            prop_assert!((c - c2).abs() < 1e-9 * c.max(1.0));
            prop_assert!((p - p2).abs() < 1e-12);
            prop_assert!(c >= 0.0 && (0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn bonferroni_is_capped_and_monotone(p in 0.0..1.0f64, q in 0.0..1.0f64, m in 1usize..20) {
        let (bp, bq) = (bonferroni(p, m), bonferroni(q, m));
        prop_assert!(bp >= p && bp <= 1.0);
        if p <= q {
            prop_assert!(bp <= bq);
        }
    }

    #[test]
    fn ecdf_is_a_distribution_function(x in sample(80), grid in prop::collection::vec(-60.0..60.0f64, 2..50)) {
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        let e = ecdf(&x, &grid).unwrap();
        prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.iter().all(|v| (0.0..=1.0).contains(v)));
        let ends = ecdf(&x, &[-1e9, 1e9]).unwrap();
        prop_assert_eq!(ends, vec![0.0, 1.0]);
    }

    #[test]
    fn kde_is_nonnegative(x in prop::collection::vec(-50.0..50.0f64, 3..60), g in prop::collection::vec(-80.0..80.0f64, 1..20)) {
        if let Ok(d) = kde_1d(&x, &g) {
            prop_assert!(d.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn bootstrap_interval_is_ordered_and_within_range(x in prop::collection::vec(0.0..30.0f64, 2..60), seed in any::<u64>()) {
        let cfg = BootstrapConfig { resamples: 300, seed, ..BootstrapConfig::default() };
        let [lo, hi] = bootstrap_median_ci(&x, &cfg).unwrap();
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= lo && lo <= hi && hi <= max);
        prop_assert_eq!(bootstrap_median_ci(&x, &cfg).unwrap(), [lo, hi]);
        let m = median(&x);
        prop_assert!(min <= m && m <= max);
    }

    #[test]
    fn ttc_exists_only_while_closing(gap in 0.0..50.0f64, closing in -10.0..10.0f64) {
        let t = time_to_collision(gap, closing);
        prop_assert_eq!(t.is_some(), closing > 0.0);
        if let Some(t) = t {
            prop_assert!((t * closing - gap).abs() < 1e-9);
        }
    }

    #[test]
    fn severity_is_monotone_in_gap(g in 0.0..40.0f64, h in 0.0..40.0f64) {
        let b = SeverityBounds::default();
        let (lo, hi) = if g <= h { (g, h) } else { (h, g) };
        prop_assert!(b.classify(lo) <= b.classify(hi));
    }
}
