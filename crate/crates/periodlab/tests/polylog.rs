use std::f64::consts::PI;

use periodlab::numerics::{c, integrate_interval, make_loop, ComplexValue, Path, QuadratureConfig};
use periodlab::polylog::*;
use periodlab::PeriodError;
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn word(a: &[ComplexValue]) -> HyperlogWord {
    HyperlogWord::new(a.to_vec()).unwrap()
}

#[test]
fn integral_matches_series_inside_the_disc() {
    let cases: Vec<(Vec<u32>, Vec<ComplexValue>)> = vec![
        (vec![1, 1], vec![c(2.0 / 3.0, 0.0), c(0.5, 0.0)]),
        (vec![2, 1], vec![c(0.3, 0.2), c(-0.5, 0.1)]),
        (vec![3], vec![c(0.7, 0.0)]),
        (vec![1, 2], vec![c(-0.4, 0.4), c(0.6, -0.3)]),
        (vec![1, 1, 1], vec![c(0.5, 0.0), c(0.5, 0.1), c(0.5, -0.2)]),
    ];
    for (m, x) in cases {
        let idx = IndexWord::new(m.clone()).unwrap();
        let s = li_series(&idx, &x, 1e-15).unwrap();
        let i = li_principal(&idx, &x, &cfg()).unwrap();
        assert!((s - i).norm() < 1e-11, "{m:?}: series {s} integral {i}");
    }
}

#[test]
fn li11_on_the_boundary_matches_direct_quadrature() {
    // Li₁,₁(2, 1/2) = I₂(1, 2) = ∫₀¹ ln(1-t)/(t-2) dt
    let v = li11(c(2.0, 0.0), c(0.5, 0.0), &BranchSpec::straight(), &cfg()).unwrap();
    let oracle = integrate_interval(|t| c((1.0 - t).ln() / (t - 2.0), 0.0), 0.0, 1.0, &cfg()).unwrap();
    assert!((v - oracle).norm() < 1e-11, "{v} vs {oracle}");
}

#[test]
fn li2_monodromy_around_one() {
    let eps = 0.1;
    let lp = make_loop(c(1.0, 0.0), eps, true).unwrap();
    let d = monodromy_increment(PolylogFunction::Li2, &lp, &[], &cfg()).unwrap();
    let expected = c(0.0, -2.0 * PI) * (1.0 + eps).ln();
    assert!((d - expected).norm() < 1e-10, "{d} vs {expected}");
}

#[test]
fn li1_inverse_monodromy_around_zero_is_plus_two_pi_i() {
    // Li₁(1/a) = ln a - ln(a - 1) near a = 1/2, so a loop around 0 adds 2πi.
    let lp = make_loop(c(0.0, 0.0), 0.5, true).unwrap();
    let d = monodromy_increment(PolylogFunction::Li1Inverse, &lp, &[], &cfg()).unwrap();
    assert!((d - c(0.0, 2.0 * PI)).norm() < 1e-10, "{d}");
}

#[test]
fn li1_inverse_monodromy_clockwise_and_double() {
    let cw = make_loop(c(1.0, 0.0), 0.2, false).unwrap();
    let d = monodromy_increment(PolylogFunction::Li1Inverse, &cw, &[], &cfg()).unwrap();
    assert!((d - c(0.0, 2.0 * PI)).norm() < 1e-10, "{d}");
    let ccw = make_loop(c(1.0, 0.0), 0.2, true).unwrap();
    let d2 = monodromy_increment_loops(PolylogFunction::Li1Inverse, &[ccw.clone(), ccw], &[], &cfg()).unwrap();
    assert!((d2 - c(0.0, -4.0 * PI)).norm() < 1e-9, "{d2}");
}

#[test]
fn zero_argument_is_zero() {
    let idx = IndexWord::new(vec![2, 1]).unwrap();
    let v = li_principal(&idx, &[c(0.0, 0.0), c(0.5, 0.0)], &cfg()).unwrap();
    assert_eq!(v, c(0.0, 0.0));
}

#[test]
fn divergent_series_are_rejected() {
    let idx = IndexWord::new(vec![1, 1]).unwrap();
    assert!(matches!(li_series(&idx, &[c(0.5, 0.0), c(1.0, 0.0)], 1e-10), Err(PeriodError::Divergent(_))));
    assert!(matches!(li_series(&idx, &[c(1.5, 0.0), c(0.5, 0.0)], 1e-10), Err(PeriodError::Divergent(_))));
}

#[test]
fn bad_branch_is_rejected() {
    let p = Path::segment(c(0.0, 0.0), c(2.0, 0.0));
    assert!(BranchSpec::new(p, vec![]).is_err());
}

fn letter() -> impl Strategy<Value = ComplexValue> {
    (-3.0f64..3.0, 0.2f64..3.0).prop_map(|(x, y)| c(x, -y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shuffle_product_of_depth_one(a in letter(), b in letter()) {
        let s = BranchSpec::straight();
        let ia = hyperlog(&word(&[a]), &s, &cfg()).unwrap();
        let ib = hyperlog(&word(&[b]), &s, &cfg()).unwrap();
        let iab = hyperlog(&word(&[a, b]), &s, &cfg()).unwrap();
        let iba = hyperlog(&word(&[b, a]), &s, &cfg()).unwrap();
        prop_assert!((ia * ib - iab - iba).norm() < 1e-10);
    }

    #[test]
    fn homotopic_paths_agree(a in letter(), b in letter(), h in 0.1f64..2.0) {
        // letters below the real axis; both paths stay in the closed upper half plane
        let detour = Path::polyline(&[c(0.0, 0.0), c(0.5, h), c(1.0, 0.0)]).unwrap();
        let s = BranchSpec::straight();
        let d = BranchSpec::new(detour, vec![]).unwrap();
        let w = word(&[a, b, c(0.0, 0.0)]);
        let v1 = hyperlog(&w, &s, &cfg()).unwrap();
        let v2 = hyperlog(&w, &d, &cfg()).unwrap();
        prop_assert!((v1 - v2).norm() < 1e-10, "{} vs {}", v1, v2);
    }

    #[test]
    fn contractible_loops_change_nothing(r in 0.05f64..0.4, x in 1.6f64..3.0) {
        let lp = make_loop(c(x, 0.5), r, true).unwrap();
        let d = monodromy_increment(PolylogFunction::Li1Inverse, &lp, &[], &cfg()).unwrap();
        prop_assert!(d.norm() < 1e-10);
    }
}
