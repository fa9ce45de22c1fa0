use std::f64::consts::PI;

use periodlab::derham::PuncturedLinePair;
use periodlab::exact::{q, qi, Q};
use periodlab::hodge::*;
use periodlab::numerics::{c, make_loop, ComplexValue, QuadratureConfig, TWO_PI_I};
use periodlab::periods::dlog_principal_branch;
use periodlab::polylog::{li_series, IndexWord, ParamLoop};
use periodlab::PeriodError;
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn ln_a() -> Monomial {
    Monomial::atom("ln α", 1)
}

fn tpi(e: i32) -> Monomial {
    Monomial::atom(TWO_PI_I_LABEL, e)
}

/// ln α ⊗ (2πi)⁻¹ ⊗ 2πi − 1 ⊗ ln α·(2πi)⁻¹ ⊗ 2πi + 1 ⊗ 1 ⊗ ln α
fn expected_ln_tensor() -> TripleTensor {
    TripleTensor::term(qi(1), ln_a(), tpi(-1), tpi(1))
        .add(&TripleTensor::term(qi(-1), Monomial::one(), ln_a().mul(&tpi(-1)), tpi(1)))
        .add(&TripleTensor::term(qi(1), Monomial::one(), Monomial::one(), ln_a()))
}

#[test]
fn coproduct_of_ln_alpha_two_by_two() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2)]).unwrap();
    let (basis, p) = exact_matrix_punctured_line(&pair, &cfg()).unwrap();
    assert_eq!(basis.labels(), vec!["2πi", "ln α"]);
    assert_eq!(p[0][1], AtomExpr::atom("ln α"));
    let t = triple_coproduct(&p, 0, 1, 0).unwrap();
    assert_eq!(t, expected_ln_tensor());
    // multiplication recovers the entry
    assert!((t.contract(&basis).unwrap() - c(2f64.ln(), 0.0)).norm() < 1e-12);
}

#[test]
fn coproduct_of_ln_alpha_three_by_three() {
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2), qi(3)]).unwrap();
    let (basis, p) = exact_matrix_punctured_line(&pair, &cfg()).unwrap();
    assert_eq!(basis.labels(), vec!["2πi", "ln α", "ln β"]);
    // rows sigma, [1,2], [2,3]; columns dt/t, dt, 2t dt
    assert_eq!(p[1][0], AtomExpr::atom("ln α"));
    assert_eq!(p[2][0], AtomExpr::atom("ln β").sub(&AtomExpr::atom("ln α")));
    assert_eq!(p[2][2], AtomExpr::int(5));
    let t = triple_coproduct(&p, 1, 0, 0).unwrap();
    assert_eq!(t, expected_ln_tensor());
}

#[test]
fn coproduct_of_identity() {
    let id: Vec<Vec<AtomExpr>> = (0..3)
        .map(|i| (0..3).map(|j| if i == j { AtomExpr::int(1) } else { AtomExpr::zero() }).collect())
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            let t = triple_coproduct(&id, i, j, 0).unwrap();
            if i == j {
                assert_eq!(t, TripleTensor::term(qi(1), Monomial::one(), Monomial::one(), Monomial::one()));
            } else {
                assert!(t.is_zero());
            }
        }
    }
}

#[test]
fn coproduct_convention_for_two_pi_i() {
    // Δ(2πi/(2πi)) on the 2×2 matrix is 1 ⊗ 1 ⊗ 1
    let pair = PuncturedLinePair::standard(vec![qi(1), qi(2)]).unwrap();
    let (_, p) = exact_matrix_punctured_line(&pair, &cfg()).unwrap();
    let t = triple_coproduct(&p, 1, 1, 1).unwrap();
    assert_eq!(t, TripleTensor::term(qi(1), Monomial::one(), Monomial::one(), Monomial::one()));
}

#[test]
fn wrong_atom_value_is_detected() {
    let basis = AtomBasis::new(vec![("2πi".into(), TWO_PI_I), ("ln α".into(), c(0.7, 0.0))]).unwrap();
    let p = vec![
        vec![AtomExpr::int(1), AtomExpr::atom("ln α")],
        vec![AtomExpr::zero(), AtomExpr::two_pi_i()],
    ];
    let numeric = vec![vec![c(1.0, 0.0), c(2f64.ln(), 0.0)], vec![c(0.0, 0.0), TWO_PI_I]];
    assert!(matches!(
        verify_exact_matrix(&p, &basis, Some(&numeric)),
        Err(PeriodError::AtomMismatch { .. })
    ));
}

#[test]
fn singular_matrix_is_rejected() {
    let p = vec![vec![AtomExpr::int(1), AtomExpr::int(2)], vec![AtomExpr::int(2), AtomExpr::int(4)]];
    assert!(matches!(exact_inverse(&p), Err(PeriodError::NonInvertible)));
}

#[test]
fn monodromy_logarithms() {
    let n = monodromy_logarithm(&t_a1()).unwrap();
    let nc = n.to_complex();
    assert!((nc[2][0] - c(-1.0, 0.0) / TWO_PI_I).norm() < 1e-15);
    let n0 = monodromy_logarithm(&t_origin()).unwrap();
    assert!((n0.to_complex()[1][0] - c(1.0, 0.0) / TWO_PI_I).norm() < 1e-15);
    let id = MonodromyMatrix::new(rat_identity(4), "trivial").unwrap();
    assert_eq!(monodromy_logarithm(&id).unwrap(), MonodromyLog::zero(4));
    let mut bad = rat_identity(2);
    bad[0][0] = qi(2);
    assert!(matches!(
        monodromy_logarithm(&MonodromyMatrix::new(bad, "x").unwrap()),
        Err(PeriodError::NotUnipotent)
    ));
}

#[test]
fn continuation_around_a_equals_one_gives_t_a1() {
    let lp = ParamLoop {
        param: 0,
        path: make_loop(c(1.0, 0.0), 0.5, true).unwrap(),
    };
    let chk = monodromy_from_continuation(c(1.5, 0.0), c(-2.0, 0.0), &lp, &cfg()).unwrap();
    assert_eq!(chk.monodromy.entries, t_a1().entries);
    assert!(chk.residual < 1e-6, "residual {}", chk.residual);
}

fn li2(x: f64) -> ComplexValue {
    li_series(&IndexWord::new(vec![2]).unwrap(), &[c(x, 0.0)], 1e-15).unwrap()
}

#[test]
fn first_limit_step() {
    let b = c(-2.0, 0.0);
    let r = limit_a1(b, &default_t_sequence(), &cfg()).unwrap();
    let p = &r.matrix;
    assert!(p.get(2, 0).norm() < 1e-4, "{}", p.get(2, 0));
    assert!((p.get(3, 0) + li2(1.0 / 3.0)).norm() < 1e-4, "{}", p.get(3, 0));
    assert!((p.get(3, 1) - TWO_PI_I * c(-(3f64.ln()), 0.0)).norm() < 1e-4);
    assert!(p.get(3, 2).norm() < 1e-4);
    assert!((p.get(1, 0) + c(1.5f64.ln(), 0.0)).norm() < 1e-4); // Li₁(-1/2)
    // raw values approach the limit linearly in t (up to a logarithm)
    for w in r.differences.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.0 && ratio < 30.0, "{:?}", r.differences);
    }
}

#[test]
fn second_limit_step_gives_minus_zeta_two() {
    let b0 = c(-2.0, 0.0);
    let br = dlog_principal_branch(c(3.0, 0.0), b0).unwrap();
    let v = build_vmhs(c(3.0, 0.0), b0, &br, &cfg()).unwrap();
    let lim = limit_mhs(&v, &[LimitStep::A1, LimitStep::Origin], &default_t_sequence(), &cfg()).unwrap();
    let s0 = &lim.lattice[0];
    let expected = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-PI * PI / 6.0, 0.0)];
    for k in 0..4 {
        assert!((s0[k] - expected[k]).norm() < 1e-4, "s0[{k}] = {}", s0[k]);
    }
    assert!(lim.filtrations_nested());
}

#[test]
fn vmhs_filtrations() {
    let (a, b) = (c(3.0, 0.0), c(2.0, 0.0));
    let v = build_vmhs(a, b, &dlog_principal_branch(a, b).unwrap(), &cfg()).unwrap();
    assert_eq!(v.weight[&-4], vec![3]);
    assert_eq!(v.hodge[&0], vec![0]);
    assert_eq!(v.weight[&0], vec![0, 1, 2, 3]);
    assert_eq!(v.hodge[&-2], vec![0, 1, 2, 3]);
    assert!(v.filtrations_nested());
    assert!((v.lattice[3][3] - TWO_PI_I * TWO_PI_I).norm() < 1e-8);
}

#[test]
fn limit_with_trivial_monodromy_is_the_value() {
    let n = MonodromyLog::zero(1);
    let f = |t: f64| {
        Ok(periodlab::periods::PeriodMatrix {
            row_labels: vec!["w".into()],
            col_labels: vec!["g".into()],
            entries: vec![vec![c(2.0 + t, 0.0)]],
            tolerance: 0.0,
            branch: None,
        })
    };
    let r = limit_period_matrix(&f, &n, &[1e-1, 1e-2, 1e-3]).unwrap();
    assert!((r.matrix.get(0, 0) - c(2.0, 0.0)).norm() < 1e-12);
    assert!(limit_period_matrix(&f, &n, &[1e-1, 1e-2]).is_err());
}

#[test]
fn growing_differences_are_rejected() {
    let n = MonodromyLog::zero(1);
    let f = |t: f64| {
        Ok(periodlab::periods::PeriodMatrix {
            row_labels: vec!["w".into()],
            col_labels: vec!["g".into()],
            entries: vec![vec![c(t.ln(), 0.0)]],
            tolerance: 0.0,
            branch: None,
        })
    };
    assert!(matches!(
        limit_period_matrix(&f, &n, &[1e-1, 1e-3, 1e-7]),
        Err(PeriodError::NonConvergent { .. })
    ));
}

fn unipotent(n: usize) -> impl Strategy<Value = RatMatrix> {
    prop::collection::vec((-3i64..=3, 1i64..=3), n * n).prop_map(move |v| {
        let mut m = rat_identity(n);
        for i in 0..n {
            for j in 0..i {
                let (a, d) = v[i * n + j];
                m[i][j] = q(a, d);
            }
        }
        m
    })
}

fn permuted_basis(b: &AtomBasis, rot: usize) -> AtomBasis {
    let mut atoms = b.atoms.clone();
    let k = rot % atoms.len();
    atoms.rotate_left(k);
    AtomBasis::new(atoms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exp_log_round_trip(m in (1usize..=5).prop_flat_map(unipotent)) {
        let t = MonodromyMatrix::new(m.clone(), "random").unwrap();
        let log = monodromy_logarithm(&t).unwrap();
        prop_assert_eq!(exp_two_pi_i(&log).unwrap(), m);
    }

    #[test]
    fn coproduct_is_invariant_under_atom_order(rot in 0usize..3, points in prop::sample::select(vec![vec![1i64, 2], vec![1, 2, 3], vec![1, 3, 4]])) {
        let pair = PuncturedLinePair::standard(points.into_iter().map(qi).collect()).unwrap();
        let (basis, p) = exact_matrix_punctured_line(&pair, &cfg()).unwrap();
        let other = permuted_basis(&basis, rot);
        prop_assert!(verify_exact_matrix(&p, &other, None).is_ok());
        let t1 = triple_coproduct(&p, 1, 0, 0).unwrap();
        let t2 = triple_coproduct(&p, 1, 0, 0).unwrap();
        prop_assert_eq!(&t1, &t2);
        let v1 = t1.contract(&basis).unwrap();
        let v2 = t2.contract(&other).unwrap();
        prop_assert!((v1 - v2).norm() < 1e-12);
    }
}
