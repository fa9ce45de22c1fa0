use std::f64::consts::PI;
use std::time::Instant;

use num_traits::One;
use periodlab::exact::{q, Q};
use periodlab::numerics::{c, integrate_interval, QuadratureConfig};
use periodlab::semialg::*;
use periodlab::PeriodError;
use proptest::prelude::*;

fn poly(n: usize, terms: &[(&[u32], i64)]) -> PolynomialQ {
    PolynomialQ::new(n, terms.iter().map(|(e, a)| (e.to_vec(), q(*a, 1))).collect()).unwrap()
}

fn leaf(p: PolynomialQ, r: Relation) -> SemiAlgebraicSet {
    SemiAlgebraicSet::leaf(p, r).unwrap()
}

fn unit_disc() -> IntegrationRegion {
    let set = leaf(poly(2, &[(&[0, 0], 1), (&[2, 0], -1), (&[0, 2], -1)]), Relation::Ge);
    IntegrationRegion::new(set, vec![(q(-1, 1), q(1, 1)), (q(-1, 1), q(1, 1))], 1).unwrap()
}

/// [lo, hi] on the line as {(x - lo)(hi - x) ≥ 0}.
fn interval(lo: Q, hi: Q) -> IntegrationRegion {
    let x = PolynomialQ::var(1, 0);
    let p = x
        .sub(&PolynomialQ::constant(1, lo.clone()))
        .mul(&PolynomialQ::constant(1, hi.clone()).sub(&x));
    IntegrationRegion::new(leaf(p, Relation::Ge), vec![(lo, hi)], 1).unwrap()
}

fn dt_over_t() -> RationalForm {
    RationalForm::new(PolynomialQ::constant(1, Q::one()), PolynomialQ::var(1, 0)).unwrap()
}

fn zeta_triangle() -> (IntegrationRegion, RationalForm) {
    // 0 ≤ t1, t1 ≤ t2, t2 ≤ 1
    let set = SemiAlgebraicSet::intersection(&[
        leaf(poly(2, &[(&[1, 0], 1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 1], 1), (&[1, 0], -1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 0], 1), (&[0, 1], -1)]), Relation::Ge),
    ])
    .unwrap();
    let region = IntegrationRegion::new(set, vec![(q(0, 1), q(1, 1)), (q(0, 1), q(1, 1))], 1).unwrap();
    // (1 - t1) t2
    let den = poly(2, &[(&[0, 1], 1), (&[1, 1], -1)]);
    (region, RationalForm::new(PolynomialQ::constant(2, Q::one()), den).unwrap())
}

#[test]
fn membership_examples() {
    let disc = unit_disc().set;
    assert!(disc.contains(&[0.0, 0.0]).unwrap());
    assert!(!disc.contains(&[1.0, 1.0]).unwrap());
    assert!(disc.contains_exact(&[q(3, 5), q(4, 5)]).unwrap());
    assert!(!disc.contains_exact(&[q(3, 5), q(5, 6)]).unwrap());
    assert!(matches!(disc.contains(&[0.0]), Err(PeriodError::DimensionMismatch { .. })));

    // {1 ≤ t ≤ 2, 0 ≤ s, s² = t³ + 1} in variables (t, s)
    let curve = SemiAlgebraicSet::intersection(&[
        leaf(poly(2, &[(&[1, 0], 1), (&[0, 0], -1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 0], 2), (&[1, 0], -1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 1], 1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 2], 1), (&[3, 0], -1), (&[0, 0], -1)]), Relation::Eq),
    ])
    .unwrap();
    assert!(curve.contains(&[1.0, 2f64.sqrt()]).unwrap());
    assert!(!curve.contains(&[1.0, 1.4142]).unwrap());
    assert!(curve.contains(&[2.0, 3.0]).unwrap());
    assert!(curve.contains_exact(&[q(2, 1), q(3, 1)]).unwrap());
}

#[test]
fn disc_area_is_pi() {
    let v = naive_period(&unit_disc(), &RationalForm::volume(2), &QuadratureConfig::default()).unwrap();
    assert!((v - c(PI, 0.0)).norm() < 1e-6, "{v}");
}

#[test]
fn log_two_on_the_line() {
    let v = naive_period(&interval(q(1, 1), q(2, 1)), &dt_over_t(), &QuadratureConfig::default()).unwrap();
    assert!((v - c(2f64.ln(), 0.0)).norm() < 1e-10, "{v}");
    let mut rev = interval(q(1, 1), q(2, 1));
    rev.orientation = -1;
    let v = naive_period(&rev, &dt_over_t(), &QuadratureConfig::default()).unwrap();
    assert!((v + c(2f64.ln(), 0.0)).norm() < 1e-10);
}

#[test]
fn zeta_two_needs_improper_mode() {
    let (region, form) = zeta_triangle();
    let r = naive_period(&region, &form, &QuadratureConfig::default());
    assert!(matches!(r, Err(PeriodError::PoleOnRegion(_))), "{r:?}");
}

#[test]
fn zeta_two_by_shrinking() {
    let (region, form) = zeta_triangle();
    let cfg = QuadratureConfig::default().with_tol(1e-11).with_shrink_levels(6);
    let start = Instant::now();
    let rep = naive_period_report(&region, &form, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let zeta2 = PI * PI / 6.0;
    assert!((rep.value - c(zeta2, 0.0)).norm() < 1e-4, "{} {:?}", rep.value, rep.residuals);
    assert!(elapsed < 60.0, "{elapsed}s");
    // raw values increase towards ζ(2) as the excised neighbourhood shrinks
    assert!(rep.levels.windows(2).all(|w| w[1].1.re > w[0].1.re));
    assert!(rep.residuals.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.residuals);
}

#[test]
fn blown_up_chart_cross_check() {
    // x = λy turns the triangle integral into ∫∫ dλ dy/(1 - λy) over the unit square
    let set = SemiAlgebraicSet::intersection(&[
        leaf(poly(2, &[(&[1, 0], 1), (&[2, 0], -1)]), Relation::Ge),
        leaf(poly(2, &[(&[0, 1], 1), (&[0, 2], -1)]), Relation::Ge),
    ])
    .unwrap();
    let region = IntegrationRegion::new(set, vec![(q(0, 1), q(1, 1)), (q(0, 1), q(1, 1))], 1).unwrap();
    let form = RationalForm::new(PolynomialQ::constant(2, Q::one()), poly(2, &[(&[0, 0], 1), (&[1, 1], -1)])).unwrap();
    assert!(matches!(
        naive_period(&region, &form, &QuadratureConfig::default()),
        Err(PeriodError::PoleOnRegion(_))
    ));
    let cfg = QuadratureConfig::default().with_tol(1e-11).with_shrink_levels(6);
    let v = naive_period(&region, &form, &cfg).unwrap();
    assert!((v - c(PI * PI / 6.0, 0.0)).norm() < 1e-4, "{v}");
}

#[test]
fn fubini_examples() {
    let cfg = QuadratureConfig::default();
    let line = interval(q(1, 1), q(2, 1));
    let (g, w) = product_region(&line, &dt_over_t(), &unit_disc(), &RationalForm::volume(2)).unwrap();
    assert_eq!(g.dimension, 3);
    let v = naive_period(&g, &w, &cfg.with_tol(1e-9)).unwrap();
    let want = PI * 2f64.ln();
    assert!((v.re - want).abs() < 1e-5 * want, "{v}");

    // (ln 2)² against a direct double quadrature of 1/(st)
    let (g, w) = product_region(&line, &dt_over_t(), &line, &dt_over_t()).unwrap();
    let v = naive_period(&g, &w, &cfg).unwrap();
    let direct = integrate_interval(
        |s| integrate_interval(|t| c(1.0 / (s * t), 0.0), 1.0, 2.0, &cfg).unwrap(),
        1.0,
        2.0,
        &cfg,
    )
    .unwrap();
    assert!((v - direct).norm() < 1e-10, "{v} {direct}");

    // G × point
    let (g, w) = product_region(&line, &dt_over_t(), &IntegrationRegion::point(), &RationalForm::volume(0)).unwrap();
    let v = naive_period(&g, &w, &cfg).unwrap();
    assert!((v - c(2f64.ln(), 0.0)).norm() < 1e-10);
}

#[test]
fn additivity_over_disjoint_union() {
    let cfg = QuadratureConfig::default();
    let x = PolynomialQ::var(1, 0);
    let shift = |a: i64| x.sub(&PolynomialQ::constant(1, q(a, 1)));
    // A = [1,2], B = [3,5] inside the box [1,5]
    let a = leaf(shift(1).mul(&PolynomialQ::constant(1, q(2, 1)).sub(&x)), Relation::Ge);
    let b = leaf(shift(3).mul(&PolynomialQ::constant(1, q(5, 1)).sub(&x)), Relation::Ge);
    let bx = vec![(q(1, 1), q(5, 1))];
    let region = |s: SemiAlgebraicSet| IntegrationRegion::new(s, bx.clone(), 1).unwrap();
    let union = SemiAlgebraicSet::union(&[a.clone(), b.clone()]).unwrap();
    let f = dt_over_t();
    let va = naive_period(&region(a), &f, &cfg).unwrap();
    let vb = naive_period(&region(b), &f, &cfg).unwrap();
    let vu = naive_period(&region(union), &f, &cfg).unwrap();
    assert!((vu - va - vb).norm() <= 2.0 * cfg.abs_tol.max(cfg.rel_tol * vu.norm()));
    assert!((vu.re - (2f64.ln() + (5.0f64 / 3.0).ln())).abs() < 1e-10);
}

#[test]
fn pole_inside_is_reported() {
    // dt/t over [-1, 1]
    let r = naive_period(&interval(q(-1, 1), q(1, 1)), &dt_over_t(), &QuadratureConfig::default());
    assert!(matches!(r, Err(PeriodError::PoleOnRegion(_))));
}

#[test]
fn lower_dimensional_region_is_unsupported() {
    let mut g = unit_disc();
    g.dimension = 1;
    let r = naive_period(&g, &RationalForm::volume(1), &QuadratureConfig::default());
    assert!(r.is_err());
}

#[test]
fn json_round_trip() {
    let (region, form) = zeta_triangle();
    let vars = vec!["t1".to_string(), "t2".to_string()];
    let rj = RegionJson::from_region(&region, &vars);
    let fj = FormJson::from_form(&form, &vars);
    let rs = serde_json::to_string(&rj).unwrap();
    let fs = serde_json::to_string(&fj).unwrap();
    let r2: RegionJson = serde_json::from_str(&rs).unwrap();
    let f2: FormJson = serde_json::from_str(&fs).unwrap();
    assert_eq!(r2.to_region().unwrap(), region);
    assert_eq!(f2.to_form().unwrap(), form);

    let text = r#"{"vars":["x","y"],"tree":{"leaf":{"poly":{"0,0":"1","2,0":"-1","0,2":"-1"},"rel":">="}},
                   "box":[["-1","1"],["-1","1"]],"orientation":1}"#;
    let r3: RegionJson = serde_json::from_str(text).unwrap();
    assert_eq!(r3.to_region().unwrap(), unit_disc());
}

fn rand_poly() -> impl Strategy<Value = PolynomialQ> {
    prop::collection::vec(((0u32..3, 0u32..3), -4i64..=4, 1i64..=3), 1..4).prop_map(|ts| {
        PolynomialQ::new(2, ts.into_iter().map(|((a, b), n, d)| (vec![a, b], q(n, d))).collect()).unwrap()
    })
}

fn rand_set() -> impl Strategy<Value = SemiAlgebraicSet> {
    let rel = prop_oneof![Just(Relation::Ge), Just(Relation::Gt), Just(Relation::Eq)];
    let leaf_s = (rand_poly(), rel).prop_map(|(p, r)| SemiAlgebraicSet::leaf(p, r).unwrap());
    leaf_s.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|s| s.complement()),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|v| SemiAlgebraicSet::intersection(&v).unwrap()),
            prop::collection::vec(inner, 1..3).prop_map(|v| SemiAlgebraicSet::union(&v).unwrap()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn de_morgan(a in rand_set(), b in rand_set(), x in -8i64..=8, y in -8i64..=8) {
        let lhs = SemiAlgebraicSet::union(&[a.clone(), b.clone()]).unwrap().complement();
        let rhs = SemiAlgebraicSet::intersection(&[a.complement(), b.complement()]).unwrap();
        let pf = [x as f64 / 4.0, y as f64 / 4.0];
        let pq = [q(x, 4), q(y, 4)];
        prop_assert_eq!(lhs.contains(&pf).unwrap(), rhs.contains(&pf).unwrap());
        prop_assert_eq!(lhs.contains_exact(&pq).unwrap(), rhs.contains_exact(&pq).unwrap());
        // dyadic points evaluate exactly in floating point as well
        prop_assert_eq!(lhs.contains(&pf).unwrap(), lhs.contains_exact(&pq).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fubini_product_property(
        a in 1i64..=3, b in 1i64..=3, n1 in 1i64..=4, d1 in 1i64..=3,
        r in 1i64..=3, k in 0u32..=2, n2 in -3i64..=3,
    ) {
        let cfg = QuadratureConfig::default().with_tol(1e-9);
        // G1 = [a, a+b] with (n1/d1)·dt/t ; G2 = disc of radius r with (1 + n2/4·x^k) dx∧dy
        let g1 = interval(q(a, 1), q(a + b, 1));
        let w1 = RationalForm::new(PolynomialQ::constant(1, q(n1, d1)), PolynomialQ::var(1, 0)).unwrap();
        let rr = q(r, 1);
        let set = leaf(poly(2, &[(&[0, 0], r * r), (&[2, 0], -1), (&[0, 2], -1)]), Relation::Ge);
        let g2 = IntegrationRegion::new(set, vec![(-rr.clone(), rr.clone()), (-rr.clone(), rr)], 1).unwrap();
        let mut e = vec![0, 0];
        e[0] = k;
        let num = PolynomialQ::constant(2, Q::one()).add(&PolynomialQ::new(2, vec![(e, q(n2, 4))]).unwrap());
        let w2 = RationalForm::new(num, PolynomialQ::constant(2, Q::one())).unwrap();
        let v1 = naive_period(&g1, &w1, &cfg).unwrap();
        let v2 = naive_period(&g2, &w2, &cfg).unwrap();
        let (g, w) = product_region(&g1, &w1, &g2, &w2).unwrap();
        let v = naive_period(&g, &w, &cfg).unwrap();
        let want = v1 * v2;
        prop_assert!((v - want).norm() <= 1e-5 * want.norm().max(1e-300), "{} vs {}", v, want);
    }
}
