use std::f64::consts::PI;

use num_traits::One;
use periodlab::derham::*;
use periodlab::exact::{q, qi, QI};
use periodlab::numerics::{c, ComplexValue, QuadratureConfig, TWO_PI_I};
use periodlab::periods::*;
use periodlab::polylog::{li_series, IndexWord};
use periodlab::PeriodError;
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn close(a: ComplexValue, b: ComplexValue, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn two_point_matrix() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2)]).unwrap();
    let p = period_matrix_punctured_line(&pair, &cfg()).unwrap();
    assert_eq!(p.row_labels, vec!["dt/(2-1)", "dt/t"]);
    assert_eq!(p.col_labels, vec!["[1,2]", "sigma"]);
    let expected = [[c(1.0, 0.0), c(0.0, 0.0)], [c(2f64.ln(), 0.0), TWO_PI_I]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(close(p.get(i, j), expected[i][j], 1e-10), "({i},{j}) {}", p.get(i, j));
        }
    }
}

#[test]
fn degenerate_matrix() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(1)]).unwrap();
    let p = period_matrix_punctured_line(&pair, &cfg()).unwrap();
    let expected = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), TWO_PI_I]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(close(p.get(i, j), expected[i][j], 1e-10));
        }
    }
}

#[test]
fn three_point_matrix_and_determinant() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2), qi(3)]).unwrap();
    let p = period_matrix_punctured_line(&pair, &cfg()).unwrap();
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    // rows dt/t, dt, 2t dt; columns sigma, [1,2], [2,3]
    let expected = [
        [TWO_PI_I, c(l2, 0.0), c(l3 - l2, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        [c(0.0, 0.0), c(3.0, 0.0), c(5.0, 0.0)],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!(close(p.get(i, j), expected[i][j], 1e-10), "({i},{j})");
        }
    }
    let d = p.det().unwrap();
    assert!(close(d, c(0.0, 4.0 * PI), 1e-8), "{d}");
    let shape = det_shape_check(&p, 1).unwrap();
    assert_eq!(shape.candidate, qi(4));
}

#[test]
fn segment_through_the_puncture_is_rejected() {
    let pair = PuncturedLinePair::standard(vec![qi(-1), qi(2)]).unwrap();
    assert!(matches!(
        period_matrix_punctured_line(&pair, &cfg()),
        Err(PeriodError::UnsupportedConfiguration(_))
    ));
}

#[test]
fn quadric_periods() {
    for (a, b) in [(1, 1), (2, 3), (4, 1)] {
        let ring = QuadricRing::new(qi(a), qi(b)).unwrap();
        let v = period_quadric(&ring, &cfg()).unwrap();
        let oracle = PI / ((a * b) as f64).sqrt();
        assert!(close(v, c(oracle, 0.0), 1e-10), "{v}");
        let m = PeriodMatrix {
            row_labels: vec!["y dx".into()],
            col_labels: vec!["ellipse".into()],
            entries: vec![vec![v]],
            tolerance: 1e-12,
            branch: None,
        };
        assert_eq!(det_shape_check(&m, 1).unwrap().candidate, q(-1, 4 * a * b));
    }
    assert!(period_quadric(&QuadricRing::new(qi(-1), qi(1)).unwrap(), &cfg()).is_err());
}

#[test]
fn quadric_pairing_through_reduction() {
    // ∫ x²y dx = (1/(4a)) ∫ y dx on the ellipse
    let ring = QuadricRing::new(qi(2), qi(3)).unwrap();
    let coord = reduce_quadric(
        &ring,
        &QuadricForm {
            dx: Poly2::from_terms(&[((2, 1), QI::one())]),
            dy: Poly2::zero(),
        },
    )
    .unwrap();
    let period = period_quadric(&ring, &cfg()).unwrap();
    let (sa, sb) = (2f64.sqrt(), 3f64.sqrt());
    let direct = periodlab::numerics::integrate_path(
        |u: ComplexValue| {
            let x = (u + u.inv()) / (2.0 * sa);
            let y = (u.inv() - u) / (c(0.0, 2.0) * sb);
            let dx = (c(1.0, 0.0) - (u * u).inv()) / (2.0 * sa);
            x * x * y * dx
        },
        &periodlab::numerics::make_loop(c(0.0, 0.0), 1.0, true).unwrap(),
        &cfg(),
    )
    .unwrap();
    assert!(close(coord.coordinates[0].to_complex() * period, direct, 1e-10));
}

#[test]
fn dlog_matrix_entries() {
    let (a, b) = (c(3.0, 0.0), c(2.0, 0.0));
    let br = dlog_principal_branch(a, b).unwrap();
    let p = period_matrix_dlog(a, b, &br, &cfg()).unwrap();
    assert!(close(p.get(3, 1), -TWO_PI_I * (1.0f64 / 3.0).ln(), 1e-10));
    let series = li_series(&IndexWord::new(vec![1, 1]).unwrap(), &[c(2.0 / 3.0, 0.0), c(0.5, 0.0)], 1e-15).unwrap();
    assert!(close(p.get(3, 0), series, 1e-7));
    assert!(close(p.get(1, 0), c(2f64.ln(), 0.0), 1e-10)); // Li₁(1/2)
    assert!(close(p.get(2, 0), c(1.5f64.ln(), 0.0), 1e-10)); // Li₁(1/3) = -ln(2/3)
    // letter (b-1)/(a-1) = 1/2 lies on [0,1]; the upper detour gives I₁ = -iπ
    assert!(close(p.get(3, 2), c(2.0 * PI * PI, 0.0), 1e-10), "{}", p.get(3, 2));
    assert!(close(p.get(3, 3), TWO_PI_I * TWO_PI_I, 1e-8));
    let shape = det_shape_check(&p, 4).unwrap();
    assert_eq!(shape.candidate, qi(1));
}

#[test]
fn dlog_rejects_singular_parameters() {
    for (a, b) in [(1.0, 2.0), (2.0, 0.0), (2.0, 2.0)] {
        let r = dlog_principal_branch(c(a, 0.0), c(b, 0.0));
        assert!(matches!(r, Err(PeriodError::OnSingularDivisor(_))));
    }
}

#[test]
fn loop_radius_does_not_matter() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2), qi(3)]).unwrap();
    let basis = basis_punctured_line(&pair).unwrap();
    let p1 = pairing_matrix(&basis, &homology_cycles_with_radius(&pair, 0.25).unwrap(), &cfg()).unwrap();
    let p2 = pairing_matrix(&basis, &homology_cycles_with_radius(&pair, 0.125).unwrap(), &cfg()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(close(p1.get(i, j), p2.get(i, j), 2e-12));
        }
    }
}

fn small_q() -> impl Strategy<Value = periodlab::exact::Q> {
    (-6i64..=6, 1i64..=3).prop_map(|(n, d)| q(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pairing_commutes_with_reduction(
        terms in prop::collection::vec((-4i32..=4, small_q()), 1..5),
        consts in prop::collection::vec(small_q(), 3),
    ) {
        let pair = PuncturedLinePair::standard(vec![qi(1), qi(2), qi(3)]).unwrap();
        let form = LaurentPoly::from_terms(&terms.iter().map(|(n, x)| (*n, QI::real(x.clone()))).collect::<Vec<_>>());
        let e = RelativeElement { form, constants: consts.into_iter().map(QI::real).collect() };
        let red = reduce_punctured_line(&pair, &e).unwrap();
        let p = period_matrix_punctured_line(&pair, &cfg()).unwrap();
        let cycles = homology_cycles_punctured_line(&pair).unwrap();
        for (j, g) in cycles.iter().enumerate() {
            let direct = pair_cycle(g, &e, &cfg()).unwrap();
            let via = pair_via_reduction(&red.coordinates, &p, j);
            prop_assert!((direct - via).norm() < 1e-9 * (1.0 + direct.norm()), "{} vs {}", direct, via);
        }
    }

    #[test]
    fn matrices_are_square_and_nondegenerate(points in prop::collection::vec(1i64..=7, 1..4)) {
        let mut pts = points.clone();
        pts.sort();
        let pair = PuncturedLinePair::standard(pts.into_iter().map(qi).collect()).unwrap();
        let p = period_matrix_punctured_line(&pair, &cfg()).unwrap();
        prop_assert!(p.is_square());
        prop_assert!(p.det().unwrap().norm() > 10.0 * cfg().abs_tol);
    }
}
