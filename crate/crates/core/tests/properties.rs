use proptest::prelude::*;
use watchlab_core::correction::{label_d2co_affine, label_d2co_sensitivity, CorrectionParams, Method};
use watchlab_core::data::{
    compute_stats, derive_interest_label, read_csv, split_chronological, write_csv, IngestOptions,
};
use watchlab_core::estimator::{fit_group_gmm, smooth_curves, GroupEstimate};
use watchlab_core::eval::{dcg_at_k, duration_breakdown, gauc, ndcg_at_k};
use watchlab_core::{apply_method, BiasNoiseCurves, Dataset, FeatureSchema, GmmOptions, GroupFits, Interaction};

fn estimate(d: u32, count: usize, w_plus: f64, w_minus: f64) -> GroupEstimate {
    GroupEstimate {
        d,
        w_plus_hat: w_plus,
        w_minus_hat: w_minus,
        var_plus: 1.0,
        var_minus: 1.0,
        weight_plus: 0.5,
        count,
        converged: true,
        loglik: 0.0,
        iterations: 1,
    }
}

fn arb_rows() -> impl Strategy<Value = Vec<(u8, u32, f64, i64)>> {
    prop::collection::vec((0u8..6, 1u32..40, 0.0f64..80.0, 0i64..1_000), 5..60)
}

fn dataset(rows: &[(u8, u32, f64, i64)]) -> Dataset {
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, &(u, d, w, ts))| Interaction::new(format!("u{u}"), format!("i{i}"), w, d).with_timestamp(ts))
        .collect();
    Dataset::new(FeatureSchema::default(), rows)
}

fn curves_for(ds: &Dataset) -> BiasNoiseCurves {
    let fits = GroupFits::from_estimates(
        ds.duration_groups()
            .into_iter()
            .map(|(d, idx)| estimate(d, idx.len(), 3.0 + 0.8 * d as f64, 0.5 + 0.05 * d as f64)),
    );
    smooth_curves(&fits, 2).unwrap()
}

proptest! {
    #[test]
    fn interest_label_monotone_in_watch_time(d in 1u32..300, a in 0.0f64..400.0, b in 0.0f64..400.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let l = derive_interest_label(&Interaction::new("u", "i", lo, d));
        let h = derive_interest_label(&Interaction::new("u", "i", hi, d));
        prop_assert!(!l || h);
    }

    #[test]
    fn csv_round_trip_keeps_stats(rows in arb_rows()) {
        let ds = dataset(&rows);
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &FeatureSchema::default(), IngestOptions::default()).unwrap();
        prop_assert_eq!(compute_stats(&back).unwrap(), compute_stats(&ds).unwrap());
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_is_deterministic_and_covers_rows(rows in arb_rows()) {
        let ds = dataset(&rows);
        let a = split_chronological(&ds, (0.6, 0.2, 0.2)).unwrap();
        let b = split_chronological(&ds, (0.6, 0.2, 0.2)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.0.len() + a.1.len() + a.2.len(), ds.len());
    }

    #[test]
    fn clipped_labels_stay_in_unit_interval(rows in arb_rows(), alpha in prop_oneof![-0.1f64..-1e-4, 1e-4f64..0.1]) {
        let ds = dataset(&rows);
        let curves = curves_for(&ds);
        for m in Method::ALL {
            let params = CorrectionParams::new(m)
                .with_curves(curves.clone())
                .with_alpha(alpha);
            let params = CorrectionParams { bins: 3.min(ds.len()), ..params };
            let labels = apply_method(&ds, &params).unwrap().labels;
            prop_assert!(labels.iter().all(|l| (0.0..=1.0).contains(l)), "{}: {:?}", m, labels);
        }
    }

    #[test]
    fn labels_monotone_within_duration(
        ws in prop::collection::vec(0.0f64..120.0, 8..40),
        d in 5u32..60,
        alpha in prop_oneof![-0.1f64..-1e-4, 1e-4f64..0.1],
    ) {
        // one duration, so every method compares like with like
        let rows: Vec<_> = ws.iter().enumerate().map(|(i, &w)| (0u8, d, w, i as i64)).collect();
        let ds = dataset(&rows);
        let curves = curves_for(&ds);
        let mut order: Vec<usize> = (0..ws.len()).collect();
        order.sort_by(|&a, &b| ws[a].total_cmp(&ws[b]));
        for m in Method::ALL {
            if m == Method::Oracle {
                continue;
            }
            let params = CorrectionParams { bins: 2, ..CorrectionParams::new(m).with_curves(curves.clone()).with_alpha(alpha) };
            let labels = apply_method(&ds, &params).unwrap().labels;
            for pair in order.windows(2) {
                prop_assert!(labels[pair[0]] <= labels[pair[1]] + 1e-12, "{} not monotone", m);
            }
        }
    }

    #[test]
    fn affine_recovers_interest_exactly(p in 0.0f64..=1.0, w_minus in 0.0f64..50.0, gap in 0.1f64..200.0) {
        let w_plus = w_minus + gap;
        let w = p * w_plus + (1.0 - p) * w_minus;
        let r = label_d2co_affine(w, w_plus, w_minus, true).unwrap();
        prop_assert!((r - p).abs() < 1e-9);
    }

    #[test]
    fn exponential_label_monotone_for_either_sign(
        a in 0.0f64..100.0, b in 0.0f64..100.0,
        alpha in prop_oneof![-0.2f64..-1e-6, 1e-6f64..0.2],
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let l = label_d2co_sensitivity(lo, 80.0, 5.0, alpha, false).unwrap();
        let h = label_d2co_sensitivity(hi, 80.0, 5.0, alpha, false).unwrap();
        prop_assert!(l <= h + 1e-12);
    }

    #[test]
    fn ranking_metrics_ignore_monotone_transforms(
        rows in prop::collection::vec((0u8..5, -5.0f64..5.0, any::<bool>()), 4..80),
    ) {
        let users: Vec<String> = rows.iter().map(|r| format!("u{}", r.0)).collect();
        let users: Vec<&str> = users.iter().map(String::as_str).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let moved: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        match (gauc(&scores, &labels, &users), gauc(&moved, &labels, &users)) {
            (Ok(a), Ok(b)) => prop_assert!((a.value - b.value).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
        for k in [1, 3, 5] {
            match (ndcg_at_k(&scores, &labels, &users, k), ndcg_at_k(&moved, &labels, &users, k)) {
                (Ok(a), Ok(b)) => prop_assert!((a.value - b.value).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn dcg_non_decreasing_in_k(rows in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 1..30)) {
        let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        for k in 1..rows.len() {
            prop_assert!(dcg_at_k(&scores, &labels, k) <= dcg_at_k(&scores, &labels, k + 1));
        }
    }

    #[test]
    fn breakdown_partitions_rows(
        rows in prop::collection::vec((0u8..4, 1u32..240, -3.0f64..3.0, any::<bool>()), 1..100),
        n_ranges in 1usize..6,
    ) {
        let users: Vec<String> = rows.iter().map(|r| format!("u{}", r.0)).collect();
        let users: Vec<&str> = users.iter().map(String::as_str).collect();
        let durations: Vec<u32> = rows.iter().map(|r| r.1).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.3).collect();
        let ranges = duration_breakdown(&scores, &labels, &users, &durations, n_ranges, &[1, 3]).unwrap();
        prop_assert_eq!(ranges.len(), n_ranges);
        prop_assert_eq!(ranges.iter().map(|r| r.n_rows).sum::<usize>(), rows.len());
        for d in &durations {
            let hits = ranges.iter().filter(|r| r.n_rows > 0 && r.lo < *d && *d <= r.hi).count();
            prop_assert_eq!(hits, 1);
        }
    }

    #[test]
    fn smoothing_limits(
        groups in prop::collection::btree_map(1u32..200, (1usize..500, 5.0f64..100.0, 0.0f64..4.0), 1..25),
    ) {
        let fits = GroupFits::from_estimates(groups.iter().map(|(&d, &(n, p, m))| estimate(d, n, p, m)));
        let identity = smooth_curves(&fits, 0).unwrap();
        for pt in &identity.points {
            prop_assert_eq!(pt.w_plus_smooth, pt.w_plus_raw);
            prop_assert_eq!(pt.w_minus_smooth, pt.w_minus_raw);
        }
        let total: usize = groups.values().map(|g| g.0).sum();
        let mean_plus = groups.values().map(|g| g.0 as f64 * g.1).sum::<f64>() / total as f64;
        let full = smooth_curves(&fits, groups.len()).unwrap();
        for pt in &full.points {
            prop_assert!((pt.w_plus_smooth - mean_plus).abs() < 1e-9 * mean_plus);
            prop_assert!(pt.w_minus_smooth < pt.w_plus_smooth);
        }
    }

    #[test]
    fn gmm_components_ordered_and_order_free(
        mut values in prop::collection::vec(0.0f64..100.0, 50..200),
        rot in 0usize..50,
    ) {
        let opts = GmmOptions::default();
        match fit_group_gmm(9, &values, &opts) {
            Ok(a) => {
                prop_assert!(a.w_minus_hat <= a.w_plus_hat);
                let shift = rot % values.len();
                values.rotate_left(shift);
                let b = fit_group_gmm(9, &values, &opts).unwrap();
                prop_assert_eq!(a, b);
            }
            Err(e) => {
                let degenerate = matches!(e, watchlab_core::Error::DegenerateGroup { .. });
                prop_assert!(degenerate);
            }
        }
    }
}
