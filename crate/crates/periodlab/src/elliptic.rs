//! Lattices, Eisenstein series, the Weierstrass ℘-function and the periods of
//! the invariant differential dx/y on y² = 4x³ − 60G₄x − 140G₆.
//!
//! Lattice sums run over the box max(|m|,|n|) ≤ N. The part outside the box
//! is replaced by its Euler–Maclaurin expansion over the unit cells: integrals
//! of z^(-p) outside the square [-M, M]², M = N + ½, which are homogeneous and
//! have a closed form through the boundary of the square.

use std::f64::consts::PI;

use serde_json::{json, Value};

use crate::error::{PeriodError, Result};
use crate::numerics::{c, fmt_c, integrate_interval, ComplexValue, QuadratureConfig};

pub const MIN_CUTOFF: usize = 10;
pub const DEFAULT_CUTOFF: usize = 200;

/// Λ = ω₁ℤ ⊕ ω₂ℤ with Im(ω₂/ω₁) > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub omega1: ComplexValue,
    pub omega2: ComplexValue,
}

impl Lattice {
    /// Flips the sign of ω₂ when needed so that Im(ω₂/ω₁) > 0.
    pub fn new(omega1: ComplexValue, omega2: ComplexValue) -> Result<Self> {
        if !(omega1.re.is_finite() && omega1.im.is_finite() && omega2.re.is_finite() && omega2.im.is_finite())
            || omega1.norm() == 0.0
        {
            return Err(PeriodError::DegenerateLattice("non-finite or zero period".into()));
        }
        let t = omega2 / omega1;
        if t.im.abs() <= 1e-12 {
            return Err(PeriodError::DegenerateLattice(format!(
                "periods {} and {} are dependent over R",
                fmt_c(omega1),
                fmt_c(omega2)
            )));
        }
        let omega2 = if t.im > 0.0 { omega2 } else { -omega2 };
        Ok(Lattice { omega1, omega2 })
    }

    /// Signed covolume Im(conj(ω₁)ω₂) > 0.
    pub fn covolume(&self) -> f64 {
        (self.omega1.conj() * self.omega2).im
    }

    pub fn point(&self, m: i64, n: i64) -> ComplexValue {
        self.omega1 * m as f64 + self.omega2 * n as f64
    }

    /// Real coordinates (x, y) with z = xω₁ + yω₂.
    pub fn coordinates(&self, z: ComplexValue) -> (f64, f64) {
        let (a, b) = (self.omega1, self.omega2);
        let det = a.re * b.im - a.im * b.re;
        ((z.re * b.im - z.im * b.re) / det, (a.re * z.im - a.im * z.re) / det)
    }

    pub fn scaled(&self, s: ComplexValue) -> Result<Lattice> {
        Lattice::new(self.omega1 * s, self.omega2 * s)
    }
}

/// Value of a lattice sum and the size of what it neglects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub value: ComplexValue,
    pub tail: f64,
    /// Euler–Maclaurin correction added to the box sum
    pub correction: ComplexValue,
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < MIN_CUTOFF {
        return Err(PeriodError::InvalidConfig(format!("cutoff {cutoff} below {MIN_CUTOFF}")));
    }
    Ok(())
}

fn powi(z: ComplexValue, n: i32) -> ComplexValue {
    z.powi(n)
}

/// ∫∫ over max(|s|,|t|) > 1 of (sω₁ + tω₂)^(-p), p even ≥ 4.
fn exterior_unit(lat: &Lattice, p: i32) -> ComplexValue {
    let side = |a: ComplexValue, b: ComplexValue| (powi(a + b, 1 - p) - powi(a - b, 1 - p)) / (b * (1 - p) as f64);
    (side(lat.omega1, lat.omega2) + side(lat.omega2, lat.omega1)) * (2.0 / (p - 2) as f64)
}

/// Σ ω^(-p) over lattice points outside the box of half-width N, from the
/// cell expansion up to fourth derivatives. Returns (value, last term).
fn exterior_sum(lat: &Lattice, p: i32, cutoff: usize) -> (ComplexValue, f64) {
    let m = cutoff as f64 + 0.5;
    let j = |q: i32| exterior_unit(lat, q) * m.powi(2 - q);
    let (w1, w2) = (lat.omega1 * lat.omega1, lat.omega2 * lat.omega2);
    let a = (w1 + w2) / 24.0;
    let b = (w1 + w2) * (w1 + w2) / 576.0 - (w1 * w1 + w2 * w2) / 1920.0 - w1 * w2 / 576.0;
    let pf = p as f64;
    let second = a * (pf * (pf + 1.0)) * j(p + 2);
    let fourth = b * (pf * (pf + 1.0) * (pf + 2.0) * (pf + 3.0)) * j(p + 4);
    (j(p) - second + fourth, fourth.norm())
}

fn box_points(cutoff: usize) -> impl Iterator<Item = (i64, i64)> {
    let n = cutoff as i64;
    // outermost shells first so the small terms accumulate before the large ones
    (1..=n).rev().flat_map(move |r| {
        (-r..=r).flat_map(move |a| {
            let mut v = vec![(a, r), (a, -r)];
            if a.abs() != r {
                v.push((r, a));
                v.push((-r, a));
            }
            v
        })
    })
}

/// G_{2k}(Λ) = Σ_{ω≠0} ω^(-2k).
pub fn eisenstein(lat: &Lattice, k: u32, cutoff: usize) -> Result<LatticeSum> {
    check_cutoff(cutoff)?;
    if k < 2 {
        return Err(PeriodError::InvalidConfig(format!("G_{} is not absolutely convergent", 2 * k)));
    }
    let p = 2 * k as i32;
    let mut sum = c(0.0, 0.0);
    let mut mag = 0.0;
    for (m, n) in box_points(cutoff) {
        let t = powi(lat.point(m, n), -p);
        sum += t;
        mag += t.norm();
    }
    let (corr, last) = exterior_sum(lat, p, cutoff);
    Ok(LatticeSum {
        value: sum + corr,
        tail: last + 64.0 * f64::EPSILON * mag,
        correction: corr,
    })
}

/// Nearest lattice point to z.
fn nearest(lat: &Lattice, z: ComplexValue) -> (i64, i64) {
    let (x, y) = lat.coordinates(z);
    (x.round() as i64, y.round() as i64)
}

fn check_off_lattice(lat: &Lattice, z: ComplexValue) -> Result<()> {
    let (x, y) = lat.coordinates(z);
    if (x - x.round()).abs() <= 1e-12 * (1.0 + x.abs()) && (y - y.round()).abs() <= 1e-12 * (1.0 + y.abs()) {
        return Err(PeriodError::OnLattice(format!("{} is a lattice point", fmt_c(z))));
    }
    Ok(())
}

/// ℘ and ℘′ from the same box sum; `deriv` selects which.
fn wp_impl(lat: &Lattice, z: ComplexValue, cutoff: usize, deriv: bool) -> Result<LatticeSum> {
    check_cutoff(cutoff)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(PeriodError::InvalidConfig("non-finite argument".into()));
    }
    check_off_lattice(lat, z)?;
    let m = cutoff as f64 + 0.5;
    let rmin = (lat.covolume() / lat.omega1.norm().max(lat.omega2.norm())).min(lat.omega1.norm());
    if z.norm() > 0.25 * m * rmin {
        return Err(PeriodError::InvalidConfig(format!(
            "argument {} too large for cutoff {cutoff}; reduce it modulo the lattice",
            fmt_c(z)
        )));
    }
    let mut sum = if deriv { -2.0 * powi(z, -3) } else { powi(z, -2) };
    let mut mag = sum.norm();
    for (a, b) in box_points(cutoff) {
        let w = lat.point(a, b);
        let t = if deriv {
            -2.0 * powi(z - w, -3)
        } else {
            powi(z - w, -2) - powi(w, -2)
        };
        sum += t;
        mag += t.norm();
    }
    // exterior: Σ_k (2k-1) z^(2k-2) ω^(-2k), or its z-derivative
    let mut corr = c(0.0, 0.0);
    let mut tail = 0.0;
    for k in 2..60 {
        let (t, last) = exterior_sum(lat, 2 * k, cutoff);
        let kf = k as f64;
        let (coef, zp) = if deriv {
            ((2.0 * kf - 1.0) * (2.0 * kf - 2.0), powi(z, 2 * k - 3))
        } else {
            (2.0 * kf - 1.0, powi(z, 2 * k - 2))
        };
        let term = t * zp * coef;
        corr += term;
        tail += last * zp.norm() * coef;
        if term.norm() <= 1e-18 * sum.norm() && k > 3 {
            break;
        }
    }
    Ok(LatticeSum {
        value: sum + corr,
        tail: tail + 64.0 * f64::EPSILON * mag,
        correction: corr,
    })
}

/// ℘(z) = 1/z² + Σ_{ω≠0} (1/(z−ω)² − 1/ω²).
pub fn wp(lat: &Lattice, z: ComplexValue, cutoff: usize) -> Result<LatticeSum> {
    wp_impl(lat, z, cutoff, false)
}

/// ℘′(z) = −2 Σ_ω 1/(z−ω)³.
pub fn wp_prime(lat: &Lattice, z: ComplexValue, cutoff: usize) -> Result<LatticeSum> {
    wp_impl(lat, z, cutoff, true)
}

/// Representative of z modulo Λ in the parallelogram centered at 0.
pub fn reduce_mod_lattice(lat: &Lattice, z: ComplexValue) -> ComplexValue {
    let (m, n) = nearest(lat, z);
    z - lat.point(m, n)
}

/// y² = 4x³ − 60G₄x − 140G₆.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticCurveQ {
    /// G₄
    pub g4: ComplexValue,
    /// G₆
    pub g6: ComplexValue,
}

impl EllipticCurveQ {
    pub fn new(g4: ComplexValue, g6: ComplexValue) -> Result<Self> {
        let curve = EllipticCurveQ { g4, g6 };
        let (g2, g3) = curve.g2_g3();
        let disc = g2 * g2 * g2 - 27.0 * g3 * g3;
        let scale = (g2.norm().powi(3) + 27.0 * g3.norm_sqr()).max(f64::MIN_POSITIVE);
        if !(disc.re.is_finite() && disc.im.is_finite()) || disc.norm() <= 1e-12 * scale {
            return Err(PeriodError::SingularCurve(format!("discriminant {} vanishes", fmt_c(disc))));
        }
        Ok(curve)
    }

    pub fn from_lattice(lat: &Lattice, cutoff: usize) -> Result<Self> {
        let g4 = eisenstein(lat, 2, cutoff)?.value;
        let g6 = eisenstein(lat, 3, cutoff)?.value;
        EllipticCurveQ::new(g4, g6)
    }

    /// (g₂, g₃) = (60G₄, 140G₆).
    pub fn g2_g3(&self) -> (ComplexValue, ComplexValue) {
        (self.g4 * 60.0, self.g6 * 140.0)
    }

    pub fn discriminant(&self) -> ComplexValue {
        let (g2, g3) = self.g2_g3();
        g2 * g2 * g2 - 27.0 * g3 * g3
    }

    /// (u⁴G₄, u⁶G₆).
    pub fn rescaled(&self, u: ComplexValue) -> Result<Self> {
        EllipticCurveQ::new(self.g4 * u.powi(4), self.g6 * u.powi(6))
    }

    /// Roots of 4x³ − g₂x − g₃ by Cardano, polished by Newton.
    pub fn roots(&self) -> [ComplexValue; 3] {
        let (g2, g3) = self.g2_g3();
        // x³ + px + q
        let p = -g2 / 4.0;
        let q = -g3 / 4.0;
        let disc = (q / 2.0) * (q / 2.0) + (p / 3.0).powi(3);
        let s = disc.sqrt();
        let a = -q / 2.0 + s;
        let b = -q / 2.0 - s;
        let u = if a.norm() >= b.norm() { a } else { b }.powf(1.0 / 3.0);
        let v = if u.norm() == 0.0 { c(0.0, 0.0) } else { -p / (u * 3.0) };
        let w = c(-0.5, 3f64.sqrt() / 2.0);
        let mut r = [u + v, w * u + w * w * v, w * w * u + w * v];
        for x in r.iter_mut() {
            for _ in 0..3 {
                let f = *x * *x * *x + p * *x + q;
                let df = *x * *x * 3.0 + p;
                if df.norm() == 0.0 {
                    break;
                }
                *x -= f / df;
            }
        }
        r
    }
}

/// 2∫_{e_i}^{e_j} dx/y with x = m − d·cos φ, which removes both endpoint
/// singularities; the branch cut of √(x − e_k) points away from the segment.
fn pair_period(ei: ComplexValue, ej: ComplexValue, ek: ComplexValue, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    let m = (ei + ej) / 2.0;
    let d = (ej - ei) / 2.0;
    let dir = ek - m;
    let v = -dir / dir.norm();
    let sv = v.sqrt();
    let f = |phi: f64| {
        let x = m - d * phi.cos();
        c(0.0, 1.0) / (sv * ((x - ek) / v).sqrt())
    };
    let val = integrate_interval(f, 0.0, PI, cfg)?;
    if !(val.re.is_finite() && val.im.is_finite()) {
        return Err(PeriodError::NonConvergent {
            estimate: fmt_c(val),
            error: f64::INFINITY,
        });
    }
    Ok(val)
}

fn dist_to_segment(p: ComplexValue, a: ComplexValue, b: ComplexValue) -> f64 {
    let ab = b - a;
    let t = ((p - a) * ab.conj()).re / ab.norm_sqr();
    (p - (a + ab * t.clamp(0.0, 1.0))).norm()
}

/// Periods of dx/y over cycles around two root pairs of the cubic, as a
/// lattice basis with Im(ω₂/ω₁) > 0.
pub fn periods_from_curve(curve: &EllipticCurveQ, cfg: &QuadratureConfig) -> Result<Lattice> {
    let e = curve.roots();
    // the two pairs whose segment stays farthest from the third root
    let mut pairs = [(0, 1, 2), (1, 2, 0), (0, 2, 1)];
    pairs.sort_by(|x, y| {
        let dx = dist_to_segment(e[x.2], e[x.0], e[x.1]);
        let dy = dist_to_segment(e[y.2], e[y.0], e[y.1]);
        dy.total_cmp(&dx)
    });
    let mut om = Vec::new();
    for &(i, j, k) in &pairs[..2] {
        om.push(pair_period(e[i], e[j], e[k], cfg)?);
    }
    Lattice::new(om[0], om[1])
}

/// τ = ω₂/ω₁ taken in the upper half-plane.
pub fn tau_invariant(omega1: ComplexValue, omega2: ComplexValue) -> Result<ComplexValue> {
    Ok(Lattice::new(omega1, omega2)?.omega2 / omega1)
}

/// Moves τ into |Re τ| ≤ ½, |τ| ≥ 1. Returns τ and the SL₂(ℤ) matrix
/// [[a,b],[c,d]] with τ_reduced = (aτ + b)/(cτ + d).
pub fn reduce_tau(tau: ComplexValue) -> Result<(ComplexValue, [[i64; 2]; 2])> {
    if !(tau.im > 0.0) {
        return Err(PeriodError::DegenerateLattice(format!("τ = {} not in the upper half-plane", fmt_c(tau))));
    }
    let mut t = tau;
    let mut g = [[1i64, 0], [0, 1]];
    for _ in 0..10_000 {
        let n = t.re.round();
        if n != 0.0 {
            t -= n;
            let n = n as i64;
            g = [[g[0][0] - n * g[1][0], g[0][1] - n * g[1][1]], g[1]];
        }
        if t.norm_sqr() < 1.0 - 1e-15 {
            t = -t.inv();
            g = [[-g[1][0], -g[1][1]], g[0]];
        } else {
            return Ok((t, g));
        }
    }
    Err(PeriodError::NonConvergent {
        estimate: fmt_c(t),
        error: f64::INFINITY,
    })
}

/// Unimodular U with (ω₁', ω₂')ᵀ = U (ω₁, ω₂)ᵀ when both bases span the same
/// lattice with entries within tol.
pub fn unimodular_change(from: &Lattice, to: &Lattice, tol: f64) -> Option<[[i64; 2]; 2]> {
    let (a, b) = from.coordinates(to.omega1);
    let (cc, d) = from.coordinates(to.omega2);
    let u = [[a.round() as i64, b.round() as i64], [cc.round() as i64, d.round() as i64]];
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    if det.abs() != 1 {
        return None;
    }
    let r1 = (from.point(u[0][0], u[0][1]) - to.omega1).norm();
    let r2 = (from.point(u[1][0], u[1][1]) - to.omega2).norm();
    (r1 <= tol && r2 <= tol).then_some(u)
}

/// Lattice → curve → periods, compared after reducing τ.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub source: Lattice,
    pub curve: EllipticCurveQ,
    pub recovered: Lattice,
    pub tau_source: ComplexValue,
    pub tau_recovered: ComplexValue,
    pub change: Option<[[i64; 2]; 2]>,
}

pub fn round_trip(lat: &Lattice, cutoff: usize, cfg: &QuadratureConfig, tol: f64) -> Result<RoundTrip> {
    let curve = EllipticCurveQ::from_lattice(lat, cutoff)?;
    let recovered = periods_from_curve(&curve, cfg)?;
    let (ts, _) = reduce_tau(tau_invariant(lat.omega1, lat.omega2)?)?;
    let (tr, _) = reduce_tau(tau_invariant(recovered.omega1, recovered.omega2)?)?;
    Ok(RoundTrip {
        source: *lat,
        curve,
        recovered,
        tau_source: ts,
        tau_recovered: tr,
        change: unimodular_change(lat, &recovered, tol),
    })
}

pub fn lattice_json(lat: &Lattice) -> Value {
    json!({
        "omega1": [lat.omega1.re, lat.omega1.im],
        "omega2": [lat.omega2.re, lat.omega2.im],
    })
}
