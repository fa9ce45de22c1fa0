//! Exact reduction in relative algebraic de Rham cohomology for the punctured
//! line G_m relative to finitely many points, and for affine conics
//! ax² + by² = 1.
//!
//! A degree-one element of the relative complex on G_m is a pair
//! (ω, c) with ω = f(t) dt, f ∈ ℚ(i)[t, t⁻¹], and c a constant on each divisor
//! component. Exact elements are (df, f(p₁), …, f(p_m)).
//!
//! Every class is determined by the residue of ω at 0 together with the
//! values c_j - F(p_j) modulo constants, where F is an antiderivative of the
//! non-residue part of ω. Reduction onto a basis is an exact linear solve in
//! these canonical coordinates.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{PeriodError, Result};
use crate::exact::{fmt_q, parse_q, qi, Q, QI};

/// Laurent polynomial Σ c_n tⁿ with Gaussian-rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaurentPoly {
    pub coeffs: BTreeMap<i32, QI>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly::default()
    }

    pub fn monomial(n: i32, c: QI) -> Self {
        let mut p = LaurentPoly::zero();
        p.add_term(n, c);
        p
    }

    pub fn from_terms(terms: &[(i32, QI)]) -> Self {
        let mut p = LaurentPoly::zero();
        for (n, c) in terms {
            p.add_term(*n, c.clone());
        }
        p
    }

    pub fn add_term(&mut self, n: i32, c: QI) {
        let e = self.coeffs.entry(n).or_insert_with(QI::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&n);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, s: &QI) -> Self {
        let mut out = LaurentPoly::zero();
        for (n, c) in &self.coeffs {
            out.add_term(*n, c * s);
        }
        out
    }

    pub fn add(&self, o: &LaurentPoly) -> Self {
        let mut out = self.clone();
        for (n, c) in &o.coeffs {
            out.add_term(*n, c.clone());
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let mut out = LaurentPoly::zero();
        for (n, c) in &self.coeffs {
            if *n != 0 {
                out.add_term(n - 1, c.scale(&qi(*n as i64)));
            }
        }
        out
    }

    /// Evaluate at a nonzero rational point.
    pub fn eval(&self, p: &Q) -> QI {
        let mut acc = QI::zero();
        for (n, c) in &self.coeffs {
            let pw = if *n >= 0 {
                num_traits::pow(p.clone(), *n as usize)
            } else {
                num_traits::pow(p.clone().recip(), (-*n) as usize)
            };
            acc += c.scale(&pw);
        }
        acc
    }

    pub fn coeff(&self, n: i32) -> QI {
        self.coeffs.get(&n).cloned().unwrap_or_else(QI::zero)
    }
}

/// Degree-one element (f dt, constants on divisor components).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelativeElement {
    pub form: LaurentPoly,
    pub constants: Vec<QI>,
}

impl RelativeElement {
    pub fn form_only(form: LaurentPoly, m: usize) -> Self {
        RelativeElement {
            form,
            constants: vec![QI::zero(); m],
        }
    }

    pub fn scale(&self, s: &QI) -> Self {
        RelativeElement {
            form: self.form.scale(s),
            constants: self.constants.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, o: &RelativeElement) -> Result<Self> {
        if self.constants.len() != o.constants.len() {
            return Err(PeriodError::DimensionMismatch {
                expected: self.constants.len(),
                got: o.constants.len(),
            });
        }
        Ok(RelativeElement {
            form: self.form.add(&o.form),
            constants: self.constants.iter().zip(&o.constants).map(|(a, b)| a + b).collect(),
        })
    }
}

/// G_m = Spec ℚ[t, t⁻¹] relative to divisor points (with multiplicity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PuncturedLinePair {
    pub punctures: Vec<Q>,
    pub divisor_points: Vec<Q>,
}

impl PuncturedLinePair {
    pub fn new(punctures: Vec<Q>, divisor_points: Vec<Q>) -> Result<Self> {
        if punctures.len() != 1 || !punctures[0].is_zero() {
            return Err(PeriodError::InvalidPair(
                "only the single puncture {0} is supported".into(),
            ));
        }
        if divisor_points.is_empty() {
            return Err(PeriodError::InvalidPair("empty divisor".into()));
        }
        if divisor_points.iter().any(|p| p.is_zero()) {
            return Err(PeriodError::InvalidPair("divisor point coincides with the puncture".into()));
        }
        Ok(PuncturedLinePair {
            punctures,
            divisor_points,
        })
    }

    /// Punctures {0}, divisor points as given.
    pub fn standard(divisor_points: Vec<Q>) -> Result<Self> {
        PuncturedLinePair::new(vec![Q::zero()], divisor_points)
    }

    pub fn m(&self) -> usize {
        self.divisor_points.len()
    }

    /// Components that repeat an earlier point.
    fn repeated(&self) -> Vec<usize> {
        (0..self.m())
            .filter(|&j| self.divisor_points[..j].contains(&self.divisor_points[j]))
            .collect()
    }

    fn distinct(&self) -> Vec<Q> {
        let mut out: Vec<Q> = Vec::new();
        for p in &self.divisor_points {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    /// All points distinct and exactly two of them.
    pub fn is_two_point(&self) -> bool {
        self.m() == 2 && self.repeated().is_empty()
    }

    /// Exact element d f.
    pub fn exact_element(&self, f: &LaurentPoly) -> RelativeElement {
        RelativeElement {
            form: f.derivative(),
            constants: self.divisor_points.iter().map(|p| f.eval(p)).collect(),
        }
    }

    /// Canonical coordinates: (residue, v₁ - v_m, …, v_{m-1} - v_m).
    fn canonical(&self, e: &RelativeElement) -> Result<Vec<QI>> {
        let m = self.m();
        if e.constants.len() != m {
            return Err(PeriodError::InvalidElement(format!(
                "element has {} divisor constants, pair has {m} components",
                e.constants.len()
            )));
        }
        let res = e.form.coeff(-1);
        let mut anti = LaurentPoly::zero();
        for (n, c) in &e.form.coeffs {
            if *n != -1 {
                anti.add_term(n + 1, c.scale(&Q::new(1.into(), (*n as i64 + 1).into())));
            }
        }
        let v: Vec<QI> = self
            .divisor_points
            .iter()
            .zip(&e.constants)
            .map(|(p, c)| c - &anti.eval(p))
            .collect();
        let mut out = vec![res];
        for vj in v.iter().take(m - 1) {
            out.push(vj - &v[m - 1]);
        }
        Ok(out)
    }
}

/// Labeled basis of a cohomology group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohomologyBasis {
    pub labels: Vec<String>,
    pub elements: Vec<RelativeElement>,
}

impl CohomologyBasis {
    pub fn rank(&self) -> usize {
        self.labels.len()
    }
}

/// Coordinates of a class over a labeled basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedClass {
    pub labels: Vec<String>,
    pub coordinates: Vec<QI>,
}

impl ReducedClass {
    pub fn is_zero(&self) -> bool {
        self.coordinates.iter().all(|c| c.is_zero())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (l, c) in self.labels.iter().zip(&self.coordinates) {
            m.insert(l.clone(), serde_json::Value::String(c.to_string()));
        }
        serde_json::Value::Object(m)
    }
}

fn q_label(p: &Q) -> String {
    fmt_q(p)
}

/// Basis of H¹(G_m, D).
///
/// Two distinct points 1, α: (dt/(α-1), dt/t). Otherwise dt/t first, then
/// d(t^k) for k = 1..r-1 over the r distinct points, then an indicator of each
/// repeated component. For D = {p, p} this is (1_{D₁} + 0_{D₂}, dt/t).
pub fn basis_punctured_line(pair: &PuncturedLinePair) -> Result<CohomologyBasis> {
    let m = pair.m();
    let dlog = RelativeElement::form_only(LaurentPoly::monomial(-1, QI::one()), m);
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    if pair.is_two_point() {
        let (p, q) = (&pair.divisor_points[0], &pair.divisor_points[1]);
        let s = (q - p).recip();
        labels.push(if p.is_one() {
            format!("dt/({}-1)", q_label(q))
        } else {
            format!("dt/({}-{})", q_label(q), q_label(p))
        });
        elements.push(RelativeElement::form_only(LaurentPoly::monomial(0, QI::real(s)), m));
        labels.push("dt/t".into());
        elements.push(dlog);
        return Ok(CohomologyBasis { labels, elements });
    }
    let rep = pair.repeated();
    let r = pair.distinct().len();
    if rep.len() == m - 1 && m == 2 {
        let mut c = vec![QI::zero(); m];
        c[0] = QI::one();
        labels.push("1_D1+0_D2".into());
        elements.push(RelativeElement {
            form: LaurentPoly::zero(),
            constants: c,
        });
        labels.push("dt/t".into());
        elements.push(dlog);
        return Ok(CohomologyBasis { labels, elements });
    }
    labels.push("dt/t".into());
    elements.push(dlog);
    for k in 1..r {
        let f = LaurentPoly::monomial(k as i32, QI::one());
        labels.push(match k {
            1 => "dt".to_string(),
            _ if k == 2 => "2t dt".to_string(),
            _ => format!("{k}t^{} dt", k - 1),
        });
        elements.push(RelativeElement::form_only(f.derivative(), m));
    }
    for j in rep {
        let mut c = vec![QI::zero(); m];
        c[j] = QI::one();
        labels.push(format!("1_D{}", j + 1));
        elements.push(RelativeElement {
            form: LaurentPoly::zero(),
            constants: c,
        });
    }
    Ok(CohomologyBasis { labels, elements })
}

/// Coordinates of the class of `element` over [`basis_punctured_line`].
pub fn reduce_punctured_line(pair: &PuncturedLinePair, element: &RelativeElement) -> Result<ReducedClass> {
    let basis = basis_punctured_line(pair)?;
    reduce_over(pair, &basis, element)
}

pub fn reduce_over(pair: &PuncturedLinePair, basis: &CohomologyBasis, element: &RelativeElement) -> Result<ReducedClass> {
    let target = pair.canonical(element)?;
    let n = target.len();
    if basis.rank() != n {
        return Err(PeriodError::InvalidElement(format!(
            "basis rank {} but cohomology has rank {n}",
            basis.rank()
        )));
    }
    let cols: Vec<Vec<QI>> = basis
        .elements
        .iter()
        .map(|e| pair.canonical(e))
        .collect::<Result<_>>()?;
    let a: Vec<Vec<QI>> = (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
    let x = crate::exact::solve_qi(a, target)
        .ok_or_else(|| PeriodError::InvalidElement("basis is degenerate for this pair".into()))?;
    Ok(ReducedClass {
        labels: basis.labels.clone(),
        coordinates: x,
    })
}

/// Conic ax² + by² = 1 over ℚ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadricRing {
    pub a: Q,
    pub b: Q,
}

impl QuadricRing {
    pub fn new(a: Q, b: Q) -> Result<Self> {
        if a.is_zero() || b.is_zero() {
            return Err(PeriodError::InvalidPair("a·b must be nonzero".into()));
        }
        Ok(QuadricRing { a, b })
    }
}

/// Polynomial in x, y with Gaussian-rational coefficients, keyed by (deg_x, deg_y).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly2 {
    pub coeffs: BTreeMap<(u32, u32), QI>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2::default()
    }

    pub fn from_terms(terms: &[((u32, u32), QI)]) -> Self {
        let mut p = Poly2::zero();
        for (e, c) in terms {
            p.add_term(*e, c.clone());
        }
        p
    }

    pub fn add_term(&mut self, e: (u32, u32), c: QI) {
        let v = self.coeffs.entry(e).or_insert_with(QI::zero);
        *v += c;
        if v.is_zero() {
            self.coeffs.remove(&e);
        }
    }

    pub fn dx(&self) -> Poly2 {
        let mut out = Poly2::zero();
        for ((i, j), c) in &self.coeffs {
            if *i > 0 {
                out.add_term((i - 1, *j), c.scale(&qi(*i as i64)));
            }
        }
        out
    }

    pub fn dy(&self) -> Poly2 {
        let mut out = Poly2::zero();
        for ((i, j), c) in &self.coeffs {
            if *j > 0 {
                out.add_term((*i, j - 1), c.scale(&qi(*j as i64)));
            }
        }
        out
    }

    /// Normal form A(x) + B(x)·y modulo ax² + by² = 1: (A, B) keyed by x-degree.
    fn normal_form(&self, ring: &QuadricRing) -> (BTreeMap<u32, QI>, BTreeMap<u32, QI>) {
        // y² = (1 - a x²)/b
        let inv_b = ring.b.recip();
        let mut work: BTreeMap<(u32, u32), QI> = self.coeffs.clone();
        let mut a_part: BTreeMap<u32, QI> = BTreeMap::new();
        let mut b_part: BTreeMap<u32, QI> = BTreeMap::new();
        while let Some(((i, j), c)) = work.pop_last() {
            if c.is_zero() {
                continue;
            }
            match j {
                0 => add_to(&mut a_part, i, c),
                1 => add_to(&mut b_part, i, c),
                _ => {
                    let c1 = c.scale(&inv_b);
                    let c2 = c.scale(&(-(&ring.a * &inv_b)));
                    add_to2(&mut work, (i, j - 2), c1);
                    add_to2(&mut work, (i + 2, j - 2), c2);
                }
            }
        }
        (a_part, b_part)
    }
}

fn add_to(m: &mut BTreeMap<u32, QI>, k: u32, c: QI) {
    let v = m.entry(k).or_insert_with(QI::zero);
    *v += c;
    if v.is_zero() {
        m.remove(&k);
    }
}

fn add_to2(m: &mut BTreeMap<(u32, u32), QI>, k: (u32, u32), c: QI) {
    let v = m.entry(k).or_insert_with(QI::zero);
    *v += c;
    if v.is_zero() {
        m.remove(&k);
    }
}

/// Polynomial one-form P dx + Q dy on the conic.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuadricForm {
    pub dx: Poly2,
    pub dy: Poly2,
}

impl QuadricForm {
    pub fn exact(f: &Poly2) -> Self {
        QuadricForm { dx: f.dx(), dy: f.dy() }
    }
}

pub fn basis_quadric(_ring: &QuadricRing) -> CohomologyBasis {
    CohomologyBasis {
        labels: vec!["y dx".into()],
        elements: Vec::new(),
    }
}

/// Coordinate of the class over y dx.
///
/// Rewrites: x^n dy ∼ -n x^{n-1} y dx, B(x) y dy ∼ 0, A(x) dx ∼ 0 and
/// x^n y dx ∼ (n-1)/((n+2)a) x^{n-2} y dx.
pub fn reduce_quadric(ring: &QuadricRing, form: &QuadricForm) -> Result<ReducedClass> {
    let (_, mut ydx) = form.dx.normal_form(ring);
    let (qa, _qb) = form.dy.normal_form(ring);
    for (n, c) in qa {
        if n > 0 {
            add_to(&mut ydx, n - 1, c.scale(&qi(-(n as i64))));
        }
    }
    // descend x^n y dx from the top degree
    while let Some((&n, _)) = ydx.iter().next_back() {
        if n == 0 {
            break;
        }
        let c = ydx.remove(&n).unwrap();
        if n >= 2 {
            let f = Q::new(((n - 1) as i64).into(), ((n + 2) as i64).into()) / &ring.a;
            add_to(&mut ydx, n - 2, c.scale(&f));
        }
    }
    let coord = ydx.remove(&0).unwrap_or_else(QI::zero);
    Ok(ReducedClass {
        labels: vec!["y dx".into()],
        coordinates: vec![coord],
    })
}

/// JSON shape for relative elements: {"form": {"<n>": "<coeff>"}, "constants": ["<coeff>", ...]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelativeElementJson {
    #[serde(default)]
    pub form: BTreeMap<String, String>,
    #[serde(default)]
    pub constants: Vec<String>,
}

impl RelativeElementJson {
    pub fn to_element(&self, m: usize) -> Result<RelativeElement> {
        let mut form = LaurentPoly::zero();
        for (k, v) in &self.form {
            let n: i32 = k
                .trim()
                .parse()
                .map_err(|_| PeriodError::Parse(format!("exponent {k}")))?;
            form.add_term(n, QI::parse(v)?);
        }
        let constants = if self.constants.is_empty() {
            vec![QI::zero(); m]
        } else {
            self.constants.iter().map(|s| QI::parse(s)).collect::<Result<Vec<_>>>()?
        };
        if constants.len() != m {
            return Err(PeriodError::InvalidElement(format!(
                "expected {m} divisor constants, got {}",
                constants.len()
            )));
        }
        Ok(RelativeElement { form, constants })
    }
}

/// JSON shape for conic forms: {"dx": {"i,j": "<coeff>"}, "dy": {...}}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadricFormJson {
    #[serde(default)]
    pub dx: BTreeMap<String, String>,
    #[serde(default)]
    pub dy: BTreeMap<String, String>,
}

fn parse_poly2(m: &BTreeMap<String, String>) -> Result<Poly2> {
    let mut p = Poly2::zero();
    for (k, v) in m {
        let (i, j) = k
            .split_once(',')
            .ok_or_else(|| PeriodError::Parse(format!("monomial key {k}, expected \"i,j\"")))?;
        let i: u32 = i.trim().parse().map_err(|_| PeriodError::Parse(format!("exponent {i}")))?;
        let j: u32 = j.trim().parse().map_err(|_| PeriodError::Parse(format!("exponent {j}")))?;
        p.add_term((i, j), QI::parse(v)?);
    }
    Ok(p)
}

impl QuadricFormJson {
    pub fn to_form(&self) -> Result<QuadricForm> {
        Ok(QuadricForm {
            dx: parse_poly2(&self.dx)?,
            dy: parse_poly2(&self.dy)?,
        })
    }
}

/// Parse a comma-separated list of rationals.
pub fn parse_points(s: &str) -> Result<Vec<Q>> {
    s.split(',').map(parse_q).collect()
}
