use netquality_core::clustering::kmeans;
use netquality_core::matching::{
    balance, standardized_biases, CovariateVector, Instance, COVARIATE_COUNT, SB_THRESHOLD,
};
use netquality_core::metrics::{correlation_spectrum, gini, gini_from_lorenz, lorenz_curve};
use netquality_core::recommend::candidates;
use netquality_core::scoring::{beauty_score, cronbach_alpha, QualityTriple, RatingMatrix};
use netquality_core::stats::spearman_rho;
use netquality_core::synth::{oracle_candidates, oracle_gini, oracle_spectrum, random_graph, random_profiles};
use netquality_core::{Error, FollowEvent, GraphBuilder, PhotoEvent, PhotoId, UserId, Week};
use proptest::prelude::*;

fn triple() -> impl Strategy<Value = QualityTriple> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (p_low, p_medium) = (lo, hi - lo);
        QualityTriple::new(p_low, p_medium, 1.0 - p_low - p_medium).unwrap()
    })
}

proptest! {
    #[test]
    fn beauty_score_swap_symmetry(q in triple()) {
        let s = beauty_score(&q).value();
        let t = beauty_score(&q.swapped()).value();
        prop_assert!((s + t - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn cronbach_alpha_at_most_one(rows in prop::collection::vec(prop::collection::vec(1u8..=5, 4), 3..20)) {
        let m = RatingMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect()).unwrap();
        match cronbach_alpha(&m) {
            Ok(a) => prop_assert!(a <= 1.0 + 1e-12),
            Err(Error::ZeroVariance(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn gini_is_scale_invariant(values in prop::collection::vec(0.0..100.0f64, 2..50), c in 0.01..100.0f64) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let g = gini(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        prop_assert!((g - gini(&scaled).unwrap()).abs() < 1e-9);
        prop_assert!((0.0..1.0).contains(&g));
    }

    #[test]
    fn gini_matches_lorenz_area(values in prop::collection::vec(0.0..100.0f64, 2..50)) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let g = gini(&values).unwrap();
        prop_assert!((g - gini_from_lorenz(&lorenz_curve(&values).unwrap())).abs() < 1e-9);
        prop_assert!((g - oracle_gini(&values).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Ok(r) = spearman_rho(&x, &y) else { return Ok(()) };
        let x2: Vec<f64> = x.iter().map(|v| (3.0 * v).exp() + 1.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        prop_assert!((r - spearman_rho(&x2, &y2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn fast_paths_match_oracles(n in 2usize..60, p in 0.0..0.3f64, seed in any::<u64>()) {
        let s = random_graph(n, p, seed);
        let profiles = random_profiles(n, 0.2, seed);
        prop_assert_eq!(correlation_spectrum(&s, &profiles, 10), oracle_spectrum(&s, &profiles, 10));
        for u in 0..n {
            prop_assert_eq!(candidates(&s, u), oracle_candidates(&s, u));
        }
    }

    #[test]
    fn kmeans_is_a_voronoi_partition(
        points in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 8..60),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let pts: Vec<[f64; 2]> = points.into_iter().map(|(a, b)| [a, b]).collect();
        let km = kmeans(&pts, k, seed).unwrap();
        let d2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        for (x, &c) in pts.iter().zip(&km.assignments) {
            let own = d2(x, &km.centroids[c]);
            for other in &km.centroids {
                prop_assert!(own <= d2(x, other) + 1e-12);
            }
        }
        for pair in km.trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-9);
        }
    }

    #[test]
    fn ingest_is_order_independent(
        follows in prop::collection::vec((0u64..8, 0u64..8, 0i64..2_000_000), 0..30),
        photos in prop::collection::vec((0u64..8, 0i64..2_000_000, 0.0..1.0f64), 0..30),
        rotation in 0usize..30,
    ) {
        let follows: Vec<FollowEvent> = follows
            .into_iter()
            .filter(|(a, b, _)| a != b)
            .map(|(a, b, t)| FollowEvent { src: UserId(a), dst: UserId(b), t })
            .collect();
        let photos: Vec<PhotoEvent> = photos
            .into_iter()
            .enumerate()
            .map(|(i, (owner, t, beauty))| PhotoEvent { owner: UserId(owner), photo: PhotoId(i as u64), t, beauty })
            .collect();
        let build = |f: &[FollowEvent], p: &[PhotoEvent]| {
            let mut b = GraphBuilder::new();
            for e in f {
                b.add_follow(*e).unwrap();
            }
            for e in p {
                b.add_photo(*e).unwrap();
            }
            b.build().unwrap().0
        };
        let mut f2 = follows.clone();
        let mut p2 = photos.clone();
        f2.reverse();
        if !p2.is_empty() {
            let r = rotation % p2.len();
            p2.rotate_left(r);
        }
        let a = build(&follows, &photos);
        let b = build(&f2, &p2);
        prop_assert_eq!(&a, &b);

        // Edges only accumulate as the snapshot week advances.
        let last = a.last_week().map_or(0, |w| w.0);
        let mut prev = 0;
        for w in 0..=last + 1 {
            let e = a.snapshot_at(Week(w)).edge_count();
            prop_assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn balance_contract(
        treated in prop::collection::vec(prop::array::uniform11(0.0..10.0f64), 2..15),
        control in prop::collection::vec(prop::array::uniform11(0.0..20.0f64), 30..120),
    ) {
        let inst = |(i, c): (usize, [f64; COVARIATE_COUNT])| Instance {
            user: UserId(i as u64),
            week: Week(0),
            covariates: CovariateVector(c),
        };
        let t: Vec<Instance> = treated.into_iter().enumerate().map(inst).collect();
        let c: Vec<Instance> = control.into_iter().enumerate().map(|(i, x)| inst((i + 1000, x))).collect();
        prop_assume!(c.len() >= 2 * t.len());
        match balance(&t, c.clone()) {
            Ok(m) => {
                prop_assert_eq!(&m.treated, &t);
                prop_assert!(m.control.len() >= t.len());
                prop_assert!(m.control.iter().all(|x| c.contains(x)));
                let sb = standardized_biases(&m.treated, &m.control).unwrap();
                prop_assert!(sb.iter().all(|v| v.abs() <= SB_THRESHOLD));
            }
            Err(Error::BalanceRestart { .. } | Error::Unbalanceable(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
