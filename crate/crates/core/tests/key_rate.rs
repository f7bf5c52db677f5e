mod common;

use common::Big;
use proptest::prelude::*;
use tfqkd::key_rate::{binary_entropy, plob_bound, rate_formula};

#[test]
fn entropy_matches_extended_precision() {
    let got = binary_entropy(0.11).unwrap();
    let want = common::entropy_oracle(&Big::from_f64(0.11));
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    for x in [1e-9, 1e-3, 0.015, 0.25, 0.499] {
        let got = binary_entropy(x).unwrap();
        let want = common::entropy_oracle(&Big::from_f64(x));
        assert!((got - want).abs() < 1e-13 * want, "x={x}: {got} vs {want}");
    }
}

#[test]
fn plob_matches_extended_precision() {
    let got = plob_bound(30.0);
    assert!((got - common::plob_oracle(3)).abs() < 1e-15);
    assert!((got - 0.001443).abs() < 1e-6);
    for d in 1..=6 {
        let got = plob_bound(10.0 * d as f64);
        let want = common::plob_oracle(d);
        assert!((got - want).abs() < 1e-14 * want, "{d}");
    }
}

#[test]
fn plob_follows_small_eta_asymptote() {
    for loss in (30..=120).step_by(5) {
        let eta = 10f64.powf(-(loss as f64) / 10.0);
        let linear = eta / std::f64::consts::LN_2;
        assert!((plob_bound(loss as f64) / linear - 1.0).abs() < 0.01);
    }
}

#[test]
fn plob_decreases_with_loss() {
    let mut prev = f64::INFINITY;
    for i in 1..=200 {
        let v = plob_bound(0.5 * i as f64);
        assert!(v < prev && v > 0.0);
        prev = v;
    }
}

proptest! {
    #[test]
    fn entropy_is_symmetric(x in 0.0f64..=1.0) {
        let a = binary_entropy(x).unwrap();
        let b = binary_entropy(1.0 - x).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn rate_falls_as_leakage_grows(q in 1e-9f64..1.0, e in 0.0f64..0.2, i in 0.0f64..0.99, di in 1e-6f64..0.01, half in 1usize..=8) {
        let m = 2 * half;
        let r1 = rate_formula(m, q, e, i, 1.1).unwrap();
        let r2 = rate_formula(m, q, e, i + di, 1.1).unwrap();
        prop_assert!(r2 < r1);
    }
}

#[test]
fn entropy_grid_symmetry() {
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        assert!((binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap()).abs() < 1e-14);
    }
}
