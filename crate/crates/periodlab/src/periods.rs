//! Period matrices: explicit homology cycles paired with de Rham bases.
//!
//! Entries are stored as P[i][j] = ⟨γ_j, ω_i⟩, rows indexed by forms and
//! columns by cycles.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_traits::{Signed, ToPrimitive, Zero};
use serde_json::json;

use crate::derham::{basis_punctured_line, CohomologyBasis, PuncturedLinePair, QuadricRing, RelativeElement};
use crate::error::{PeriodError, Result};
use crate::exact::{q_to_f64, Q};
use crate::numerics::{c, fmt_c, integrate_interval, integrate_path, make_loop, ComplexValue, Path, QuadratureConfig, TWO_PI_I};
use crate::polylog::{evaluate_family, principal_path, BranchSpec};

/// Component a cycle piece lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Ambient,
    /// Divisor component D_j (0-based).
    D(usize),
    /// Intersection D_i ∩ D_j.
    DD(usize, usize),
}

impl Component {
    pub fn tag(&self) -> String {
        match self {
            Component::Ambient => "ambient".into(),
            Component::D(j) => format!("D{}", j + 1),
            Component::DD(i, j) => format!("D{}{}", i + 1, j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Path(Path),
    Point(ComplexValue),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePiece {
    pub component: Component,
    pub support: Support,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub label: String,
    pub pieces: Vec<CyclePiece>,
}

impl Cycle {
    /// Check that point pieces on divisor components sit on their points.
    pub fn validate(&self, pair: &PuncturedLinePair) -> Result<()> {
        for p in &self.pieces {
            if let (Component::D(j), Support::Point(z)) = (&p.component, &p.support) {
                let pt = pair
                    .divisor_points
                    .get(*j)
                    .ok_or_else(|| PeriodError::InvalidElement(format!("no component D{}", j + 1)))?;
                if (z - c(q_to_f64(pt), 0.0)).norm() > 1e-10 {
                    return Err(PeriodError::InvalidElement(format!(
                        "point {} does not lie on D{}",
                        fmt_c(*z),
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Labeled complex matrix with P[i][j] = ⟨γ_j, ω_i⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub entries: Vec<Vec<ComplexValue>>,
    pub tolerance: f64,
    pub branch: Option<String>,
}

impl PeriodMatrix {
    pub fn is_square(&self) -> bool {
        self.row_labels.len() == self.col_labels.len() && self.entries.iter().all(|r| r.len() == self.col_labels.len())
    }

    pub fn det(&self) -> Result<ComplexValue> {
        if !self.is_square() {
            return Err(PeriodError::DimensionMismatch {
                expected: self.row_labels.len(),
                got: self.col_labels.len(),
            });
        }
        let n = self.row_labels.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.entries[i][j]);
        Ok(m.determinant())
    }

    /// Layout with cycles as rows and forms as columns.
    pub fn transposed(&self) -> PeriodMatrix {
        let n = self.row_labels.len();
        let m = self.col_labels.len();
        PeriodMatrix {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            entries: (0..m).map(|j| (0..n).map(|i| self.entries[i][j]).collect()).collect(),
            tolerance: self.tolerance,
            branch: self.branch.clone(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> ComplexValue {
        self.entries[i][j]
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rows": self.row_labels,
            "cols": self.col_labels,
            "re": self.entries.iter().map(|r| r.iter().map(|z| z.re).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "im": self.entries.iter().map(|r| r.iter().map(|z| z.im).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "tolerance": self.tolerance,
            "branch": self.branch.clone().unwrap_or_else(|| "principal".into()),
        })
    }
}

fn sigma_radius(pair: &PuncturedLinePair) -> f64 {
    let dmin = pair
        .divisor_points
        .iter()
        .map(|p| q_to_f64(p).abs())
        .fold(f64::INFINITY, f64::min);
    0.25 * dmin
}

fn sigma(radius: f64) -> Result<Cycle> {
    Ok(Cycle {
        label: "sigma".into(),
        pieces: vec![CyclePiece {
            component: Component::Ambient,
            support: Support::Path(make_loop(c(0.0, 0.0), radius, true)?),
            weight: 1.0,
        }],
    })
}

fn interval(pair: &PuncturedLinePair, j: usize, k: usize) -> Result<Cycle> {
    let (p, q) = (&pair.divisor_points[j], &pair.divisor_points[k]);
    if (p.is_negative() && q.is_positive()) || (p.is_positive() && q.is_negative()) {
        return Err(PeriodError::UnsupportedConfiguration(format!(
            "segment [{p}, {q}] passes through the puncture 0"
        )));
    }
    let (zp, zq) = (c(q_to_f64(p), 0.0), c(q_to_f64(q), 0.0));
    Ok(Cycle {
        label: format!("[{p},{q}]"),
        pieces: vec![
            CyclePiece {
                component: Component::Ambient,
                support: Support::Path(Path::segment(zp, zq)),
                weight: 1.0,
            },
            CyclePiece {
                component: Component::D(j),
                support: Support::Point(zp),
                weight: 1.0,
            },
            CyclePiece {
                component: Component::D(k),
                support: Support::Point(zq),
                weight: -1.0,
            },
        ],
    })
}

fn zero_cycle(pair: &PuncturedLinePair, j: usize, k: usize) -> Cycle {
    let z = c(q_to_f64(&pair.divisor_points[j]), 0.0);
    Cycle {
        label: format!("D{}-D{}", j + 1, k + 1),
        pieces: vec![
            CyclePiece {
                component: Component::D(j),
                support: Support::Point(z),
                weight: 1.0,
            },
            CyclePiece {
                component: Component::D(k),
                support: Support::Point(z),
                weight: -1.0,
            },
        ],
    }
}

/// Homology generators of (G_m, D) with loop radius ¼ of the distance from 0
/// to the divisor.
pub fn homology_cycles_punctured_line(pair: &PuncturedLinePair) -> Result<Vec<Cycle>> {
    homology_cycles_with_radius(pair, sigma_radius(pair))
}

pub fn homology_cycles_with_radius(pair: &PuncturedLinePair, radius: f64) -> Result<Vec<Cycle>> {
    let m = pair.m();
    if pair.is_two_point() {
        return Ok(vec![interval(pair, 0, 1)?, sigma(radius)?]);
    }
    // first occurrence of each point, in order
    let mut firsts: Vec<usize> = Vec::new();
    let mut repeats: Vec<(usize, usize)> = Vec::new();
    for j in 0..m {
        match firsts.iter().find(|&&f| pair.divisor_points[f] == pair.divisor_points[j]) {
            Some(&f) => repeats.push((f, j)),
            None => firsts.push(j),
        }
    }
    let zero_cycles: Vec<Cycle> = repeats.iter().map(|&(f, j)| zero_cycle(pair, f, j)).collect();
    if m == 2 && firsts.len() == 1 {
        return Ok(vec![zero_cycles[0].clone(), sigma(radius)?]);
    }
    let mut out = vec![sigma(radius)?];
    for w in firsts.windows(2) {
        out.push(interval(pair, w[0], w[1])?);
    }
    out.extend(zero_cycles);
    Ok(out)
}

/// ⟨γ, (f dt, c)⟩ = ∫_γ f dt + Σ weight·c_j over point pieces on D_j.
pub fn pair_cycle(cycle: &Cycle, element: &RelativeElement, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    let coeffs: Vec<(i32, ComplexValue)> = element.form.coeffs.iter().map(|(n, q)| (*n, q.to_complex())).collect();
    let f = |z: ComplexValue| -> ComplexValue { coeffs.iter().map(|(n, a)| a * z.powi(*n)).sum() };
    let mut acc = c(0.0, 0.0);
    for p in &cycle.pieces {
        match (&p.component, &p.support) {
            (Component::Ambient, Support::Path(path)) => {
                if !coeffs.is_empty() {
                    acc += integrate_path(f, path, cfg)? * p.weight;
                }
            }
            (Component::D(j), Support::Point(_)) => {
                let cj = element
                    .constants
                    .get(*j)
                    .ok_or_else(|| PeriodError::InvalidElement(format!("no constant for D{}", j + 1)))?;
                acc += cj.to_complex() * p.weight;
            }
            // a point on the ambient space or a path inside a point carries no degree-one pairing
            _ => {}
        }
    }
    Ok(acc)
}

/// Matrix of pairings between a basis and cycles.
pub fn pairing_matrix(basis: &CohomologyBasis, cycles: &[Cycle], cfg: &QuadratureConfig) -> Result<PeriodMatrix> {
    let entries = basis
        .elements
        .iter()
        .map(|e| cycles.iter().map(|g| pair_cycle(g, e, cfg)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(PeriodMatrix {
        row_labels: basis.labels.clone(),
        col_labels: cycles.iter().map(|g| g.label.clone()).collect(),
        entries,
        tolerance: cfg.abs_tol,
        branch: None,
    })
}

pub fn period_matrix_punctured_line(pair: &PuncturedLinePair, cfg: &QuadratureConfig) -> Result<PeriodMatrix> {
    let basis = basis_punctured_line(pair)?;
    let cycles = homology_cycles_punctured_line(pair)?;
    for g in &cycles {
        g.validate(pair)?;
    }
    pairing_matrix(&basis, &cycles, cfg)
}

/// ∫ y dx over the real ellipse ax² + by² = 1, pulled back from |u| = 1 by
/// x = (u + 1/u)/(2√a), y = (1/u - u)/(2i√b).
pub fn period_quadric(ring: &QuadricRing, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    if !ring.a.is_positive() || !ring.b.is_positive() {
        return Err(PeriodError::UnsupportedConfiguration(
            "quadric period needs a, b > 0 (real ellipse)".into(),
        ));
    }
    let sa = q_to_f64(&ring.a).sqrt();
    let sb = q_to_f64(&ring.b).sqrt();
    let circle = make_loop(c(0.0, 0.0), 1.0, true)?;
    let g = |u: ComplexValue| {
        let y = (u.inv() - u) / (c(0.0, 2.0) * sb);
        let dx = (c(1.0, 0.0) - (u * u).inv()) / (2.0 * sa);
        y * dx
    };
    integrate_path(g, &circle, cfg)
}

/// Entries of the dlog matrix as parametric words in (a, b).
#[derive(Debug, Clone, Copy)]
enum DlogEntry {
    P10,
    P20,
    P30,
    P31,
    P32,
}

impl DlogEntry {
    fn letters(&self, p: &[ComplexValue]) -> Vec<ComplexValue> {
        let (a, b) = (p[0], p[1]);
        match self {
            DlogEntry::P10 => vec![b],
            DlogEntry::P20 => vec![a],
            DlogEntry::P30 => vec![a, b],
            DlogEntry::P31 => vec![a / b],
            DlogEntry::P32 => vec![(b - 1.0) / (a - 1.0)],
        }
    }

    fn factor(&self) -> ComplexValue {
        match self {
            DlogEntry::P10 | DlogEntry::P20 => c(-1.0, 0.0),
            DlogEntry::P30 => c(1.0, 0.0),
            DlogEntry::P31 => -TWO_PI_I,
            DlogEntry::P32 => TWO_PI_I,
        }
    }
}

fn check_dlog_params(a: ComplexValue, b: ComplexValue) -> Result<()> {
    let tiny = 1e-14;
    for (name, v) in [("a", a), ("b", b)] {
        if v.norm() <= tiny || (v - 1.0).norm() <= tiny {
            return Err(PeriodError::OnSingularDivisor(format!("{name} = {}", fmt_c(v))));
        }
    }
    if (a - b).norm() <= tiny {
        return Err(PeriodError::OnSingularDivisor("a = b".into()));
    }
    Ok(())
}

/// A base path 0 → 1 admissible for every entry of the dlog matrix.
pub fn dlog_principal_branch(a: ComplexValue, b: ComplexValue) -> Result<BranchSpec> {
    check_dlog_params(a, b)?;
    let p = [a, b];
    let mut letters = Vec::new();
    for e in [DlogEntry::P10, DlogEntry::P20, DlogEntry::P30, DlogEntry::P31, DlogEntry::P32] {
        letters.extend(e.letters(&p));
    }
    // every letter is a generic point here, so its position in the list is irrelevant
    let mut generic = vec![c(7.0, 7.0)];
    generic.extend(letters);
    generic.push(c(7.0, -7.0));
    Ok(BranchSpec {
        base_path: principal_path(&generic)?,
        loops: Vec::new(),
    })
}

/// ∫∫ over |x| = |y| = r of dx/x ∧ dy/y as a genuine two-dimensional quadrature.
pub fn torus_entry(cfg: &QuadratureConfig) -> Result<ComplexValue> {
    let r = 0.5;
    let inner_cfg = cfg.with_abs_tol((cfg.abs_tol * 0.1).max(1e-15));
    let err: std::cell::RefCell<Option<PeriodError>> = std::cell::RefCell::new(None);
    let v = integrate_interval(
        |s| {
            let x = c(0.0, s).exp() * r;
            let dx = c(0.0, 1.0) * x;
            let inner = integrate_interval(
                |t| {
                    let y = c(0.0, t).exp() * r;
                    let dy = c(0.0, 1.0) * y;
                    dy / y
                },
                0.0,
                2.0 * PI,
                &inner_cfg,
            );
            match inner {
                Ok(w) => dx / x * w,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    c(f64::NAN, 0.0)
                }
            }
        },
        0.0,
        2.0 * PI,
        cfg,
    );
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    v
}

/// 4×4 period matrix of the dlog family at (a, b); rows ω₀..ω₃, columns Γ₀..Γ₃.
pub fn period_matrix_dlog(
    a: ComplexValue,
    b: ComplexValue,
    branch: &BranchSpec,
    cfg: &QuadratureConfig,
) -> Result<PeriodMatrix> {
    check_dlog_params(a, b)?;
    let params = [a, b];
    let entry = |e: DlogEntry| -> Result<ComplexValue> {
        let f = move |p: &[ComplexValue]| e.letters(p);
        Ok(evaluate_family(&params, &f, branch, cfg)? * e.factor())
    };
    let loop_cfg = *cfg;
    let sigma = make_loop(c(0.0, 0.0), 0.5, true)?;
    let p11 = integrate_path(|z| z.inv(), &sigma, &loop_cfg)?;
    let p22 = p11;
    let p33 = torus_entry(cfg)?;
    let z = c(0.0, 0.0);
    let entries = vec![
        vec![c(1.0, 0.0), z, z, z],
        vec![entry(DlogEntry::P10)?, p11, z, z],
        vec![entry(DlogEntry::P20)?, z, p22, z],
        vec![entry(DlogEntry::P30)?, entry(DlogEntry::P31)?, entry(DlogEntry::P32)?, p33],
    ];
    Ok(PeriodMatrix {
        row_labels: (0..4).map(|i| format!("omega{i}")).collect(),
        col_labels: (0..4).map(|j| format!("Gamma{j}")).collect(),
        entries,
        tolerance: cfg.abs_tol,
        branch: Some(branch.describe()),
    })
}

/// Rational recognition of (det P / (2πi)ⁿ)².
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCheck {
    pub candidate: Q,
    pub value: ComplexValue,
    pub residual: f64,
}

/// Best rational approximation with denominator ≤ max_den (continued fractions).
pub fn recognize_rational(x: f64, max_den: i64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    let mut best: Option<(i128, i128)> = None;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        best = Some((h2, k2));
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    best.map(|(h, k)| Q::new((h as i64).into(), (k as i64).into()))
}

pub fn det_shape_check(p: &PeriodMatrix, n: i32) -> Result<ShapeCheck> {
    let d = p.det()?;
    let v = d / TWO_PI_I.powi(n);
    let v2 = v * v;
    let cand = recognize_rational(v2.re, 1_000_000).ok_or(PeriodError::RecognitionFailed {
        value: fmt_c(v2),
        residual: f64::INFINITY,
    })?;
    let residual = (v2 - c(q_to_f64(&cand), 0.0)).norm();
    if residual > 1e-6 {
        return Err(PeriodError::RecognitionFailed {
            value: fmt_c(v2),
            residual,
        });
    }
    Ok(ShapeCheck {
        candidate: cand,
        value: v2,
        residual,
    })
}

/// Value of a rational candidate as f64, for reporting.
pub fn candidate_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Pairing of an arbitrary element via its reduction: Σ coordinate_k · P[k][j].
pub fn pair_via_reduction(coords: &[crate::exact::QI], p: &PeriodMatrix, j: usize) -> ComplexValue {
    coords
        .iter()
        .enumerate()
        .filter(|(_, q)| !q.is_zero())
        .map(|(k, q)| q.to_complex() * p.entries[k][j])
        .sum()
}
