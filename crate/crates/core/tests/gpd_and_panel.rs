use proptest::prelude::*;
use tailgini::gpd::{gpd_fit_mle, shape_grid};
use tailgini::panel::{align, read_returns, LoadOptions, ReturnPanel};
use tailgini::synth::gpd_sample;

#[test]
fn fit_is_scale_equivariant() {
    let y = gpd_sample(0.4, 1.3, 800, 21).unwrap();
    let base = gpd_fit_mle(&y).unwrap();
    for b in [0.01, 3.0, 250.0] {
        let scaled: Vec<f64> = y.iter().map(|v| v * b).collect();
        let fit = gpd_fit_mle(&scaled).unwrap();
        assert!((fit.shape - base.shape).abs() < 1e-6);
        assert!((fit.scale - b * base.scale).abs() < 1e-6 * b);
    }
}

#[test]
fn fit_dominates_every_grid_point() {
    for (xi, seed) in [(0.1, 1), (0.6, 2), (1.1, 3)] {
        let y = gpd_sample(xi, 2.0, 500, seed).unwrap();
        let fit = gpd_fit_mle(&y).unwrap();
        for gp in shape_grid(&y) {
            assert!(fit.loglik >= gp.loglik, "{xi}: {} < {}", fit.loglik, gp.loglik);
        }
        assert_eq!(fit.variance_finite, fit.shape < 0.5);
    }
}

#[test]
fn exponential_recovers_zero_shape() {
    let y = gpd_sample(0.0, 1.0, 2000, 5).unwrap();
    let fit = gpd_fit_mle(&y).unwrap();
    assert!(fit.shape.abs() < 0.05);
    assert!(fit.variance_finite);
}

fn panel_strategy() -> impl Strategy<Value = ReturnPanel> {
    (2usize..12, 1usize..4).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), d).prop_map(move |cols| {
            let dates = (0..n).map(|i| format!("2024-01-{:02}", i + 1)).collect();
            let names = (0..d).map(|j| format!("s{j}")).collect();
            ReturnPanel::new(dates, names, cols).unwrap()
        })
    })
}

fn subpanel(dates: &[usize], tag: &str, seed: f64) -> ReturnPanel {
    let d: Vec<String> = dates.iter().map(|i| format!("d{i:03}")).collect();
    let col = dates.iter().map(|&i| i as f64 * seed).collect();
    ReturnPanel::new(d, vec![tag.into()], vec![col]).unwrap()
}

proptest! {
    #[test]
    fn csv_round_trip_is_lossless(panel in panel_strategy()) {
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let back = read_returns(buf.as_slice(), &LoadOptions::default()).unwrap();
        prop_assert_eq!(&back.panel, &panel);
        let mut again = Vec::new();
        back.panel.write_csv(&mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn align_is_associative(
        a in prop::collection::btree_set(0usize..30, 2..25),
        b in prop::collection::btree_set(0usize..30, 2..25),
        c in prop::collection::btree_set(0usize..30, 2..25),
    ) {
        let (a, b, c): (Vec<_>, Vec<_>, Vec<_>) =
            (a.into_iter().collect(), b.into_iter().collect(), c.into_iter().collect());
        let (pa, pb, pc) = (subpanel(&a, "a", 1.0), subpanel(&b, "b", 2.0), subpanel(&c, "c", 3.0));
        let left = align(&[pa.clone(), pb.clone()]).and_then(|ab| align(&[ab, pc.clone()]));
        let right = align(&[pb, pc]).and_then(|bc| align(&[pa, bc]));
        match (left, right) {
            (Ok(l), Ok(r)) => {
                prop_assert_eq!(l.dates(), r.dates());
                for name in ["a", "b", "c"] {
                    let i = l.assets().iter().position(|x| x == name).unwrap();
                    let j = r.assets().iter().position(|x| x == name).unwrap();
                    prop_assert_eq!(l.column(i), r.column(j));
                }
            }
            (Err(_), Err(_)) => {}
            (l, r) => prop_assert!(false, "{:?} vs {:?}", l.is_ok(), r.is_ok()),
        }
    }
}
