use proptest::prelude::*;
use tailgini::estimators::{
    empirical_var, gmd, std_dev, tail_gini, tail_sd, tail_subset, tail_variance, tce, PrudenceLevel,
};

fn pairwise_gmd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (n * (n - 1.0))
}

fn series(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..=max)
}

fn level() -> impl Strategy<Value = PrudenceLevel> {
    (0.05f64..0.95).prop_map(|p| PrudenceLevel::new(p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gmd_matches_pairwise(x in series(50)) {
        let fast = gmd(&x);
        let slow = pairwise_gmd(&x);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1e-300), "{fast} vs {slow}");
    }

    #[test]
    fn tail_gini_is_gmd_of_tail(x in series(80), p in level()) {
        if let Ok(tail) = tail_subset(&x, p) {
            prop_assert_eq!(tail_gini(&x, p).unwrap(), gmd(&tail.values));
        }
    }

    #[test]
    fn translation_invariance(x in series(60), c in -100.0f64..100.0, p in level()) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let g = gmd(&x);
        prop_assert!((gmd(&shifted) - g).abs() <= 1e-9 * (1.0 + g));
        if let (Ok(a), Ok(b)) = (tail_gini(&x, p), tail_gini(&shifted, p)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn scale_equivariance(x in series(60), b in 0.01f64..100.0, p in level()) {
        let scaled: Vec<f64> = x.iter().map(|v| v * b).collect();
        prop_assert!((gmd(&scaled) - b * gmd(&x)).abs() <= 1e-10 * b * (1.0 + gmd(&x)));
        if let (Ok(t0), Ok(t1)) = (tail_gini(&x, p), tail_gini(&scaled, p)) {
            prop_assert!((t1 - b * t0).abs() <= 1e-10 * b * (1.0 + t0));
            let (s0, s1) = (tail_sd(&x, p).unwrap(), tail_sd(&scaled, p).unwrap());
            prop_assert!((s1 - b * s0).abs() <= 1e-10 * b * (1.0 + s0));
        }
    }

    #[test]
    fn permutation_invariance(x in series(60), p in level(), seed in any::<u64>()) {
        let mut y = x.clone();
        let n = y.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            y.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(gmd(&x), gmd(&y));
        prop_assert_eq!(empirical_var(&x, p), empirical_var(&y, p));
        prop_assert!((std_dev(&x) - std_dev(&y)).abs() <= 1e-12 * (1.0 + std_dev(&x)));
        if tail_subset(&x, p).is_ok() {
            prop_assert_eq!(tail_gini(&x, p).unwrap(), tail_gini(&y, p).unwrap());
            let (a, b) = (tce(&x, p).unwrap(), tce(&y, p).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            let (a, b) = (tail_variance(&x, p).unwrap(), tail_variance(&y, p).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        }
    }

    #[test]
    fn tce_below_var(x in series(80), p in level()) {
        if tail_subset(&x, p).is_ok() {
            prop_assert!(tce(&x, p).unwrap() < empirical_var(&x, p));
        }
    }
}
