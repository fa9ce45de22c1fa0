use std::f64::consts::PI;

use periodlab::elliptic::*;
use periodlab::numerics::{c, ComplexValue, QuadratureConfig};
use periodlab::PeriodError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lat(w1: ComplexValue, w2: ComplexValue) -> Lattice {
    Lattice::new(w1, w2).unwrap()
}

fn square() -> Lattice {
    lat(c(1.0, 0.0), c(0.0, 1.0))
}

fn hexagonal() -> Lattice {
    lat(c(1.0, 0.0), c(-0.5, 3f64.sqrt() / 2.0))
}

fn sigma(n: u64, k: u32) -> f64 {
    (1..=n).filter(|d| n % d == 0).map(|d| (d as f64).powi(k as i32)).sum()
}

/// G₄ and G₆ of Λ_{1,τ} from their q-expansions.
fn q_expansion(tau: ComplexValue) -> (ComplexValue, ComplexValue) {
    let q = (c(0.0, 2.0 * PI) * tau).exp();
    let (mut s3, mut s5) = (c(0.0, 0.0), c(0.0, 0.0));
    let mut qn = c(1.0, 0.0);
    for n in 1..200u64 {
        qn *= q;
        s3 += qn * sigma(n, 3);
        s5 += qn * sigma(n, 5);
    }
    let g4 = (c(1.0, 0.0) + s3 * 240.0) * (PI.powi(4) / 45.0);
    let g6 = (c(1.0, 0.0) - s5 * 504.0) * (2.0 * PI.powi(6) / 945.0);
    (g4, g6)
}

/// Plain box sum with compensated accumulation.
fn kahan_box_sum(l: &Lattice, p: i32, n: i64) -> ComplexValue {
    let (mut s, mut comp) = (c(0.0, 0.0), c(0.0, 0.0));
    for a in -n..=n {
        for b in -n..=n {
            if a == 0 && b == 0 {
                continue;
            }
            let t = (l.omega1 * a as f64 + l.omega2 * b as f64).powi(-p) - comp;
            let u = s + t;
            comp = (u - s) - t;
            s = u;
        }
    }
    s
}

#[test]
fn symmetric_lattices_kill_eisenstein_series() {
    let g6 = eisenstein(&square(), 3, DEFAULT_CUTOFF).unwrap();
    assert!(g6.value.norm() < 1e-10, "{}", g6.value);
    let g4 = eisenstein(&hexagonal(), 2, DEFAULT_CUTOFF).unwrap();
    assert!(g4.value.norm() < 1e-10, "{}", g4.value);
}

#[test]
fn g4_of_rectangular_lattice_matches_independent_sums() {
    let l = lat(c(1.0, 0.0), c(0.0, 2.0));
    let v = eisenstein(&l, 2, DEFAULT_CUTOFF).unwrap();
    // the box-sum error is ~ M⁻²; two cutoffs remove the leading term
    let (s1, s2) = (kahan_box_sum(&l, 4, 1000), kahan_box_sum(&l, 4, 2000));
    let (m1, m2) = (1000.5f64, 2000.5f64);
    let oracle = (s2 * m2 * m2 - s1 * m1 * m1) / (m2 * m2 - m1 * m1);
    assert!((v.value - oracle).norm() < 1e-9, "{} vs {}", v.value, oracle);
    let (g4, g6) = q_expansion(c(0.0, 2.0));
    assert!((v.value - g4).norm() < 1e-12, "{} vs {}", v.value, g4);
    let v6 = eisenstein(&l, 3, DEFAULT_CUTOFF).unwrap();
    assert!((v6.value - g6).norm() < 1e-12);
}

#[test]
fn eisenstein_against_q_expansion() {
    for tau in [c(0.3, 1.1), c(-0.5, 0.9), c(0.1, 2.5)] {
        let l = lat(c(1.0, 0.0), tau);
        let (g4, g6) = q_expansion(tau);
        let a = eisenstein(&l, 2, 100).unwrap();
        let b = eisenstein(&l, 3, 100).unwrap();
        assert!((a.value - g4).norm() < 1e-10, "{tau}: {} vs {}", a.value, g4);
        assert!((b.value - g6).norm() < 1e-10, "{tau}: {} vs {}", b.value, g6);
    }
}

#[test]
fn doubling_cutoff_stays_within_tail() {
    for l in [square(), hexagonal(), lat(c(1.0, 0.0), c(0.3, 1.1)), lat(c(2.0, 1.0), c(0.5, 3.0))] {
        for k in [2, 3] {
            let a = eisenstein(&l, k, 20).unwrap();
            let b = eisenstein(&l, k, 40).unwrap();
            assert!((a.value - b.value).norm() <= a.tail, "k={k}: {} > {}", (a.value - b.value).norm(), a.tail);
        }
    }
}

#[test]
fn cutoff_below_minimum_is_rejected() {
    assert!(eisenstein(&square(), 2, 5).is_err());
}

#[test]
fn homogeneity() {
    let l = lat(c(1.0, 0.0), c(0.3, 1.1));
    for s in [2.0, 0.5, 1.5] {
        let ls = l.scaled(c(s, 0.0)).unwrap();
        for k in [2u32, 3] {
            let a = eisenstein(&l, k, 100).unwrap();
            let b = eisenstein(&ls, k, 100).unwrap();
            let f = s.powi(-2 * k as i32);
            assert!((b.value - a.value * f).norm() <= b.tail + a.tail * f + 1e-14);
        }
    }
}

#[test]
fn wp_parity_and_periodicity() {
    let l = lat(c(1.0, 0.0), c(0.3, 1.1));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let z = l.omega1 * rng.gen_range(0.15..0.85) + l.omega2 * rng.gen_range(0.15..0.85) - l.omega1 * 0.5 - l.omega2 * 0.5;
        let a = wp(&l, z, 100).unwrap();
        let b = wp(&l, -z, 100).unwrap();
        assert!((a.value - b.value).norm() < 1e-10);
        let pa = wp_prime(&l, z, 100).unwrap();
        let pb = wp_prime(&l, -z, 100).unwrap();
        assert!((pa.value + pb.value).norm() < 1e-10);
        for w in [l.omega1, l.omega2] {
            let s = wp(&l, z + w, 100).unwrap();
            assert!((s.value - a.value).norm() <= 2.0 * (a.tail + s.tail), "{} vs {}", s.value, a.value);
        }
    }
}

#[test]
fn wp_on_lattice_is_an_error() {
    let l = square();
    assert!(matches!(wp(&l, c(0.0, 0.0), 50), Err(PeriodError::OnLattice(_))));
    assert!(matches!(wp_prime(&l, c(1.0, 1.0), 50), Err(PeriodError::OnLattice(_))));
}

fn ode_residual(l: &Lattice, z: ComplexValue, cutoff: usize) -> f64 {
    let curve = EllipticCurveQ::from_lattice(l, cutoff).unwrap();
    let (g2, g3) = curve.g2_g3();
    let p = wp(l, z, cutoff).unwrap().value;
    let dp = wp_prime(l, z, cutoff).unwrap().value;
    (dp * dp - (p * p * p * 4.0 - g2 * p - g3)).norm()
}

#[test]
fn weierstrass_equation_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for l in [square(), lat(c(1.0, 0.0), c(0.3, 1.1))] {
        for _ in 0..10 {
            let z = l.omega1 * rng.gen_range(0.2..0.8) + l.omega2 * rng.gen_range(0.2..0.8);
            let r = ode_residual(&l, z, DEFAULT_CUTOFF);
            assert!(r < 1e-8, "residual {r:e} at {z}");
        }
    }
}

#[test]
fn tau_examples() {
    let t = tau_invariant(c(1.0, 0.0), c(0.0, 1.0)).unwrap();
    assert!((t - c(0.0, 1.0)).norm() < 1e-15);
    let t = tau_invariant(c(2.0, 0.0), c(0.0, 2.0)).unwrap();
    assert!((t - c(0.0, 1.0)).norm() < 1e-15);
    let t = tau_invariant(c(1.0, 0.0), c(0.3, 1.1)).unwrap();
    assert!((t - c(0.3, 1.1)).norm() < 1e-15);
    let t = tau_invariant(c(1.0, 0.0), c(0.0, -1.0)).unwrap();
    assert!(t.im > 0.0);
    assert!(matches!(tau_invariant(c(1.0, 0.0), c(2.0, 0.0)), Err(PeriodError::DegenerateLattice(_))));
}

#[test]
fn singular_cubic_is_rejected() {
    // g₂ = 3, g₃ = 1 gives g₂³ = 27g₃²
    let r = EllipticCurveQ::new(c(3.0 / 60.0, 0.0), c(1.0 / 140.0, 0.0));
    assert!(matches!(r, Err(PeriodError::SingularCurve(_))));
}

#[test]
fn lattice_round_trip() {
    let cfg = QuadratureConfig::default();
    for l in [
        lat(c(1.0, 0.0), c(0.0, 1.5)),
        lat(c(1.0, 0.0), c(0.0, 2.0)),
        lat(c(1.0, 0.0), c(0.3, 1.1)),
        hexagonal(),
        lat(c(0.7, 0.2), c(-0.1, 1.3)),
    ] {
        let rt = round_trip(&l, DEFAULT_CUTOFF, &cfg, 1e-6).unwrap();
        assert!(rt.change.is_some(), "{:?} -> {:?}", l, rt.recovered);
        assert!((rt.tau_source - rt.tau_recovered).norm() < 1e-6, "{} vs {}", rt.tau_source, rt.tau_recovered);
    }
}

#[test]
fn rescaling_law() {
    let cfg = QuadratureConfig::default();
    let curve = EllipticCurveQ::from_lattice(&lat(c(1.0, 0.0), c(0.0, 1.5)), DEFAULT_CUTOFF).unwrap();
    let base = periods_from_curve(&curve, &cfg).unwrap();
    let (t0, _) = reduce_tau(tau_invariant(base.omega1, base.omega2).unwrap()).unwrap();
    for u in [c(2.0, 0.0), c(0.5, 0.0), c(-1.5, 0.0), c(2.0 / 3.0, 0.0), c(0.0, 1.0)] {
        let scaled = periods_from_curve(&curve.rescaled(u).unwrap(), &cfg).unwrap();
        let back = lat(scaled.omega1 * u, scaled.omega2 * u);
        assert!(unimodular_change(&base, &back, 1e-8).is_some(), "u = {u}");
        let (t1, _) = reduce_tau(tau_invariant(scaled.omega1, scaled.omega2).unwrap()).unwrap();
        assert!((t1 - t0).norm() < 1e-10, "u = {u}: {t1} vs {t0}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn round_trip_random_lattices(re in -0.5f64..0.5, im in 0.87f64..2.5, rot in 0.0f64..(2.0 * PI), scale in 0.5f64..2.0) {
        let w1 = c(scale * rot.cos(), scale * rot.sin());
        let l = lat(w1, w1 * c(re, im));
        let rt = round_trip(&l, 100, &QuadratureConfig::default(), 1e-6).unwrap();
        prop_assert!(rt.change.is_some());
    }
}
