//! Semi-algebraic sets over ℚ, membership, and naïve periods ∫_G ω.
//!
//! Integration is iterated: the outer variables run over their bounding-box
//! intervals with adaptive Gauss–Kronrod, and the innermost fiber is cut into
//! intervals at the real roots of the leaf polynomials, each kept or dropped by
//! a membership test at its midpoint.

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{PeriodError, Result};
use crate::exact::{fmt_q, parse_q, q_to_f64, Q};
use crate::numerics::{c, fmt_c, integrate_interval_with_error, ComplexValue, QuadratureConfig};

/// Largest region dimension handled by iterated integration.
pub const MAX_DIM: usize = 3;

/// Grid points per outer variable for the pole scan in proper mode.
const POLE_GRID: usize = 129;

/// First shrink parameter in improper mode; level k uses EPS0/2^k.
const EPS0: f64 = 0.125;

// ---------------------------------------------------------------------------
// polynomials

/// Polynomial with rational coefficients in n_vars variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialQ {
    pub n_vars: usize,
    pub terms: BTreeMap<Vec<u32>, Q>,
}

impl PolynomialQ {
    pub fn new(n_vars: usize, terms: Vec<(Vec<u32>, Q)>) -> Result<Self> {
        let mut p = PolynomialQ::zero(n_vars);
        for (e, x) in terms {
            if e.len() != n_vars {
                return Err(PeriodError::DimensionMismatch { expected: n_vars, got: e.len() });
            }
            p.add_term(e, x);
        }
        Ok(p)
    }

    pub fn zero(n_vars: usize) -> Self {
        PolynomialQ {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, x: Q) -> Self {
        let mut p = PolynomialQ::zero(n_vars);
        p.add_term(vec![0; n_vars], x);
        p
    }

    /// The coordinate x_i.
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        let mut p = PolynomialQ::zero(n_vars);
        p.add_term(e, Q::one());
        p
    }

    fn add_term(&mut self, e: Vec<u32>, x: Q) {
        if x.is_zero() {
            return;
        }
        let v = self.terms.entry(e.clone()).or_insert_with(Q::zero);
        *v += x;
        if v.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &PolynomialQ) -> PolynomialQ {
        let mut p = self.clone();
        for (e, x) in &o.terms {
            p.add_term(e.clone(), x.clone());
        }
        p
    }

    pub fn scale(&self, s: &Q) -> PolynomialQ {
        let mut p = PolynomialQ::zero(self.n_vars);
        for (e, x) in &self.terms {
            p.add_term(e.clone(), x * s);
        }
        p
    }

    pub fn sub(&self, o: &PolynomialQ) -> PolynomialQ {
        self.add(&o.scale(&-Q::one()))
    }

    pub fn mul(&self, o: &PolynomialQ) -> PolynomialQ {
        let mut p = PolynomialQ::zero(self.n_vars);
        for (e1, x1) in &self.terms {
            for (e2, x2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, x1 * x2);
            }
        }
        p
    }

    /// Re-embed into `n_vars` variables, variable i going to offset + i.
    pub fn embed(&self, n_vars: usize, offset: usize) -> PolynomialQ {
        let mut p = PolynomialQ::zero(n_vars);
        for (e, x) in &self.terms {
            let mut f = vec![0; n_vars];
            f[offset..offset + self.n_vars].copy_from_slice(e);
            p.add_term(f, x.clone());
        }
        p
    }

    pub fn eval_q(&self, x: &[Q]) -> Q {
        self.terms.iter().fold(Q::zero(), |acc, (e, a)| {
            let m = e
                .iter()
                .zip(x)
                .fold(Q::one(), |m, (k, xi)| m * num_traits::pow(xi.clone(), *k as usize));
            acc + a * m
        })
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, a)| q_to_f64(a) * monomial_f64(e, x)).sum()
    }

    /// Σ |a·xᵉ|: scale for roundoff-aware sign decisions.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, a)| (q_to_f64(a) * monomial_f64(e, x)).abs()).sum()
    }

    pub fn degree_in(&self, k: usize) -> u32 {
        self.terms.keys().map(|e| e[k]).max().unwrap_or(0)
    }

    fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self.terms.iter().map(|(e, a)| (e.clone(), q_to_f64(a))).collect(),
        }
    }
}

fn monomial_f64(e: &[u32], x: &[f64]) -> f64 {
    e.iter().zip(x).map(|(k, xi)| xi.powi(*k as i32)).product()
}

/// Floating copy used in the inner loops.
#[derive(Debug, Clone)]
struct CompiledPoly {
    terms: Vec<(Vec<u32>, f64)>,
}

impl CompiledPoly {
    fn eval(&self, x: &[f64]) -> (f64, f64) {
        let mut v = 0.0;
        let mut m = 0.0;
        for (e, a) in &self.terms {
            let t = a * monomial_f64(e, x);
            v += t;
            m += t.abs();
        }
        (v, m)
    }

    /// Coefficients in x_k with the other coordinates taken from `x`.
    fn univariate(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let deg = self.terms.iter().map(|(e, _)| e[k]).max().unwrap_or(0) as usize;
        let mut out = vec![0.0; deg + 1];
        for (e, a) in &self.terms {
            let mut t = *a;
            for (i, (p, xi)) in e.iter().zip(x).enumerate() {
                if i != k {
                    t *= xi.powi(*p as i32);
                }
            }
            out[e[k] as usize] += t;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// sets

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetTree {
    Leaf(PolynomialQ, Relation),
    Complement(Box<SetTree>),
    Intersection(Vec<SetTree>),
    Union(Vec<SetTree>),
}

impl SetTree {
    fn leaves<'a>(&'a self, out: &mut Vec<&'a PolynomialQ>) {
        match self {
            SetTree::Leaf(p, _) => out.push(p),
            SetTree::Complement(t) => t.leaves(out),
            SetTree::Intersection(v) | SetTree::Union(v) => v.iter().for_each(|t| t.leaves(out)),
        }
    }

    fn embed(&self, n_vars: usize, offset: usize) -> SetTree {
        match self {
            SetTree::Leaf(p, r) => SetTree::Leaf(p.embed(n_vars, offset), *r),
            SetTree::Complement(t) => SetTree::Complement(Box::new(t.embed(n_vars, offset))),
            SetTree::Intersection(v) => SetTree::Intersection(v.iter().map(|t| t.embed(n_vars, offset)).collect()),
            SetTree::Union(v) => SetTree::Union(v.iter().map(|t| t.embed(n_vars, offset)).collect()),
        }
    }

    fn eval_with(&self, leaf: &dyn Fn(&PolynomialQ, Relation) -> bool) -> bool {
        match self {
            SetTree::Leaf(p, r) => leaf(p, *r),
            SetTree::Complement(t) => !t.eval_with(leaf),
            SetTree::Intersection(v) => v.iter().all(|t| t.eval_with(leaf)),
            SetTree::Union(v) => v.iter().any(|t| t.eval_with(leaf)),
        }
    }
}

/// Boolean combination of polynomial sign conditions in ℝⁿ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemiAlgebraicSet {
    pub n_vars: usize,
    pub tree: SetTree,
}

impl SemiAlgebraicSet {
    pub fn new(n_vars: usize, tree: SetTree) -> Result<Self> {
        let mut leaves = Vec::new();
        tree.leaves(&mut leaves);
        for p in leaves {
            if p.n_vars != n_vars {
                return Err(PeriodError::DimensionMismatch { expected: n_vars, got: p.n_vars });
            }
        }
        Ok(SemiAlgebraicSet { n_vars, tree })
    }

    pub fn leaf(p: PolynomialQ, r: Relation) -> Result<Self> {
        let n = p.n_vars;
        SemiAlgebraicSet::new(n, SetTree::Leaf(p, r))
    }

    pub fn complement(&self) -> Self {
        SemiAlgebraicSet {
            n_vars: self.n_vars,
            tree: SetTree::Complement(Box::new(self.tree.clone())),
        }
    }

    pub fn intersection(sets: &[SemiAlgebraicSet]) -> Result<Self> {
        Self::combine(sets, SetTree::Intersection)
    }

    pub fn union(sets: &[SemiAlgebraicSet]) -> Result<Self> {
        Self::combine(sets, SetTree::Union)
    }

    fn combine(sets: &[SemiAlgebraicSet], f: fn(Vec<SetTree>) -> SetTree) -> Result<Self> {
        let n = sets.first().map_or(0, |s| s.n_vars);
        if let Some(s) = sets.iter().find(|s| s.n_vars != n) {
            return Err(PeriodError::DimensionMismatch { expected: n, got: s.n_vars });
        }
        Ok(SemiAlgebraicSet {
            n_vars: n,
            tree: f(sets.iter().map(|s| s.tree.clone()).collect()),
        })
    }

    /// Membership at a floating point; each sign decision allows roundoff of
    /// a few ulps relative to the size of the terms.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.n_vars {
            return Err(PeriodError::DimensionMismatch { expected: self.n_vars, got: x.len() });
        }
        Ok(self.tree.eval_with(&|p, r| {
            let v = p.eval_f64(x);
            let tol = 64.0 * f64::EPSILON * p.magnitude(x);
            match r {
                Relation::Ge => v >= -tol,
                Relation::Gt => v > tol,
                Relation::Eq => v.abs() <= tol,
            }
        }))
    }

    /// Membership at a rational point with exact signs.
    pub fn contains_exact(&self, x: &[Q]) -> Result<bool> {
        if x.len() != self.n_vars {
            return Err(PeriodError::DimensionMismatch { expected: self.n_vars, got: x.len() });
        }
        Ok(self.tree.eval_with(&|p, r| {
            let v = p.eval_q(x);
            match r {
                Relation::Ge => !v.is_negative(),
                Relation::Gt => v.is_positive(),
                Relation::Eq => v.is_zero(),
            }
        }))
    }
}

// ---------------------------------------------------------------------------
// regions and forms

/// Oriented compact region of full dimension inside a rational box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrationRegion {
    pub set: SemiAlgebraicSet,
    pub bounding_box: Vec<(Q, Q)>,
    pub orientation: i8,
    pub dimension: usize,
}

impl IntegrationRegion {
    pub fn new(set: SemiAlgebraicSet, bounding_box: Vec<(Q, Q)>, orientation: i8) -> Result<Self> {
        let n = set.n_vars;
        if bounding_box.len() != n {
            return Err(PeriodError::DimensionMismatch { expected: n, got: bounding_box.len() });
        }
        if bounding_box.iter().any(|(lo, hi)| lo > hi) {
            return Err(PeriodError::UnsupportedRegion("empty bounding box interval".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(PeriodError::UnsupportedRegion(format!("orientation {orientation}")));
        }
        if n > MAX_DIM {
            return Err(PeriodError::UnsupportedRegion(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        Ok(IntegrationRegion {
            set,
            bounding_box,
            orientation,
            dimension: n,
        })
    }

    /// The single point ℝ⁰ (a zero-dimensional factor for products).
    pub fn point() -> Self {
        IntegrationRegion {
            set: SemiAlgebraicSet {
                n_vars: 0,
                tree: SetTree::Intersection(vec![]),
            },
            bounding_box: vec![],
            orientation: 1,
            dimension: 0,
        }
    }
}

/// f dx₁∧…∧dx_d with f = (num + i·num_im)/den.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalForm {
    pub degree: usize,
    pub num: PolynomialQ,
    pub num_im: PolynomialQ,
    pub den: PolynomialQ,
}

impl RationalForm {
    pub fn new(num: PolynomialQ, den: PolynomialQ) -> Result<Self> {
        let n = num.n_vars;
        Self::complex(num, PolynomialQ::zero(n), den)
    }

    pub fn complex(num: PolynomialQ, num_im: PolynomialQ, den: PolynomialQ) -> Result<Self> {
        let n = num.n_vars;
        for p in [&num_im, &den] {
            if p.n_vars != n {
                return Err(PeriodError::DimensionMismatch { expected: n, got: p.n_vars });
            }
        }
        if den.is_zero() {
            return Err(PeriodError::InvalidElement("denominator is identically zero".into()));
        }
        Ok(RationalForm {
            degree: n,
            num,
            num_im,
            den,
        })
    }

    /// dx₁∧…∧dx_n.
    pub fn volume(n: usize) -> Self {
        RationalForm {
            degree: n,
            num: PolynomialQ::constant(n, Q::one()),
            num_im: PolynomialQ::zero(n),
            den: PolynomialQ::constant(n, Q::one()),
        }
    }
}

/// G₁ × G₂ with the form p₁*ω₁ ∧ p₂*ω₂.
pub fn product_region(
    g1: &IntegrationRegion,
    w1: &RationalForm,
    g2: &IntegrationRegion,
    w2: &RationalForm,
) -> Result<(IntegrationRegion, RationalForm)> {
    for (g, w) in [(g1, w1), (g2, w2)] {
        if g.dimension != w.degree {
            return Err(PeriodError::DimensionMismatch { expected: g.dimension, got: w.degree });
        }
    }
    let (n1, n2) = (g1.set.n_vars, g2.set.n_vars);
    let n = n1 + n2;
    let set = SemiAlgebraicSet {
        n_vars: n,
        tree: SetTree::Intersection(vec![g1.set.tree.embed(n, 0), g2.set.tree.embed(n, n1)]),
    };
    let mut bbox = g1.bounding_box.clone();
    bbox.extend(g2.bounding_box.iter().cloned());
    let mut region = IntegrationRegion::new(set, bbox, g1.orientation * g2.orientation)?;
    region.dimension = g1.dimension + g2.dimension;
    let (a1, b1) = (w1.num.embed(n, 0), w1.num_im.embed(n, 0));
    let (a2, b2) = (w2.num.embed(n, n1), w2.num_im.embed(n, n1));
    // (a1 + i b1)(a2 + i b2)
    let form = RationalForm {
        degree: n,
        num: a1.mul(&a2).sub(&b1.mul(&b2)),
        num_im: a1.mul(&b2).add(&b1.mul(&a2)),
        den: w1.den.embed(n, 0).mul(&w2.den.embed(n, n1)),
    };
    Ok((region, form))
}

// ---------------------------------------------------------------------------
// fibers and roots

fn poly_eval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn trim(coef: &[f64]) -> Vec<f64> {
    let scale = coef.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut v = coef.to_vec();
    while v.len() > 1 && v.last().is_some_and(|a| a.abs() <= 1e-14 * scale) {
        v.pop();
    }
    v
}

/// Real roots of a univariate polynomial in [lo, hi], isolated between the
/// roots of its derivative and refined by bisection.
pub fn real_roots(coef: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let p = trim(coef);
    if p.len() <= 1 {
        return vec![];
    }
    if p.len() == 2 {
        let r = -p[0] / p[1];
        return if r >= lo && r <= hi { vec![r] } else { vec![] };
    }
    let d: Vec<f64> = p.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect();
    let mut pts = vec![lo];
    pts.extend(real_roots(&d, lo, hi).into_iter().filter(|x| *x > lo && *x < hi));
    pts.push(hi);
    let scale = p.iter().fold(0.0f64, |m, a| m.max(a.abs())) * (1.0 + lo.abs().max(hi.abs())).powi(p.len() as i32 - 1);
    let tiny = 1e-13 * scale;
    let mut roots: Vec<f64> = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        if roots.last().is_none_or(|l| (r - l).abs() > 1e-13 * (1.0 + r.abs())) {
            roots.push(r);
        }
    };
    for (idx, w) in pts.windows(2).enumerate() {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (poly_eval(&p, a), poly_eval(&p, b));
        if fa.abs() <= tiny {
            push(a, &mut roots);
        }
        if fa.abs() > tiny && fb.abs() > tiny && fa.signum() != fb.signum() {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = poly_eval(&p, m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            push(0.5 * (a + b), &mut roots);
        }
        if idx + 2 == pts.len() && fb.abs() <= tiny {
            push(b, &mut roots);
        }
    }
    roots
}

struct Prepared<'a> {
    set: &'a SemiAlgebraicSet,
    leaves: Vec<CompiledPoly>,
    bbox: Vec<(f64, f64)>,
    num: CompiledPoly,
    num_im: CompiledPoly,
    den: CompiledPoly,
}

impl Prepared<'_> {
    /// Closed intervals of {x_k : x ∈ G} with the other coordinates from x.
    fn fiber(&self, k: usize, x: &[f64]) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = self.bbox[k];
        let mut cuts = vec![lo, hi];
        for p in &self.leaves {
            cuts.extend(real_roots(&p.univariate(k, x), lo, hi));
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut y = x.to_vec();
        for w in cuts.windows(2) {
            if w[1] - w[0] <= 0.0 {
                continue;
            }
            y[k] = 0.5 * (w[0] + w[1]);
            if self.set.contains(&y)? {
                match out.last_mut() {
                    Some(last) if last.1 == w[0] => last.1 = w[1],
                    _ => out.push((w[0], w[1])),
                }
            }
        }
        Ok(out)
    }

    fn integrand(&self, x: &[f64]) -> Result<ComplexValue> {
        let (d, dm) = self.den.eval(x);
        if d.abs() <= 1e-300 || d.abs() <= 64.0 * f64::EPSILON * dm {
            return Err(PeriodError::PoleOnRegion(format!("denominator vanishes at {x:?}")));
        }
        let v = c(self.num.eval(x).0, self.num_im.eval(x).0) / d;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(PeriodError::PoleOnRegion(format!("integrand not finite at {x:?}")));
        }
        Ok(v)
    }

    /// Denominator roots on the closed fibers along a grid of lines in each
    /// coordinate direction (the grid includes the faces of the box).
    fn scan_poles(&self) -> Result<()> {
        let n = self.bbox.len();
        if n == 0 {
            return Ok(());
        }
        let grid = |k: usize| -> Vec<f64> {
            let (lo, hi) = self.bbox[k];
            let m = if n == 1 { 1 } else { (POLE_GRID as f64).powf(1.0 / (n - 1) as f64).ceil() as usize };
            (0..=m).map(|i| lo + (hi - lo) * i as f64 / m.max(1) as f64).collect()
        };
        for k in 0..n {
            let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
            let grids: Vec<Vec<f64>> = others.iter().map(|&i| grid(i)).collect();
            let mut idx = vec![0usize; others.len()];
            loop {
                let mut x = vec![0.0; n];
                for (j, &i) in others.iter().enumerate() {
                    x[i] = grids[j][idx[j]];
                }
                for (a, b) in self.fiber(k, &x)? {
                    let den = self.den.univariate(k, &x);
                    let t = trim(&den);
                    if t.len() == 1 && t[0] == 0.0 || !real_roots(&den, a, b).is_empty() {
                        return Err(PeriodError::PoleOnRegion(format!(
                            "denominator vanishes on the closed region along coordinate {k} at {x:?}"
                        )));
                    }
                }
                // odometer
                let mut j = 0;
                loop {
                    if j == idx.len() {
                        break;
                    }
                    idx[j] += 1;
                    if idx[j] < grids[j].len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == idx.len() {
                    break;
                }
            }
        }
        Ok(())
    }

    fn integrate(&self, cfg: &QuadratureConfig) -> Result<(ComplexValue, f64)> {
        let n = self.bbox.len();
        if n == 0 {
            return Ok((self.integrand(&[])?, 0.0));
        }
        self.integrate_from(0, &mut vec![0.0; n], cfg)
    }

    fn integrate_from(&self, k: usize, x: &mut Vec<f64>, cfg: &QuadratureConfig) -> Result<(ComplexValue, f64)> {
        let n = self.bbox.len();
        let err: RefCell<Option<PeriodError>> = RefCell::new(None);
        let inner_err = RefCell::new(0.0f64);
        let xs = RefCell::new(x.clone());
        let fail = |e: PeriodError| {
            err.borrow_mut().get_or_insert(e);
            c(f64::NAN, 0.0)
        };
        let result = if k + 1 == n {
            let mut total = c(0.0, 0.0);
            let mut total_err = 0.0;
            for (a, b) in self.fiber(k, x)? {
                let f = |t: f64| {
                    let mut y = xs.borrow_mut();
                    y[k] = t;
                    match self.integrand(&y) {
                        Ok(v) => v,
                        Err(e) => fail(e),
                    }
                };
                let (v, e) = integrate_interval_with_error(f, a, b, cfg).map_err(|e| err.borrow_mut().take().unwrap_or(e))?;
                total += v;
                total_err += e;
            }
            Ok((total, total_err))
        } else {
            let (lo, hi) = self.bbox[k];
            // inner levels run tighter so their noise stays below the outer tolerance
            let width = (hi - lo).max(1e-300);
            let inner_cfg = cfg.with_abs_tol((cfg.abs_tol * 0.1 / width.max(1.0)).max(1e-15));
            let f = |t: f64| {
                let mut y = xs.borrow().clone();
                y[k] = t;
                match self.integrate_from(k + 1, &mut y, &inner_cfg) {
                    Ok((v, e)) => {
                        let mut ie = inner_err.borrow_mut();
                        *ie = ie.max(e);
                        v
                    }
                    Err(e) => fail(e),
                }
            };
            integrate_interval_with_error(f, lo, hi, cfg)
                .map(|(v, e)| (v, e + *inner_err.borrow() * width))
                .map_err(|e| err.borrow_mut().take().unwrap_or(e))
        };
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        result
    }
}

/// Result of a naïve-period evaluation with its improper-mode report.
#[derive(Debug, Clone, PartialEq)]
pub struct NaivePeriod {
    pub value: ComplexValue,
    pub error: f64,
    /// (ε, ∫ over G ∩ {|den| ≥ ε}) per shrink level; empty in proper mode
    pub levels: Vec<(f64, ComplexValue)>,
    /// diagonal of the Richardson table
    pub extrapolated: Vec<ComplexValue>,
    /// |T_kk - T_{k-1,k-1}|
    pub residuals: Vec<f64>,
}

fn prepare<'a>(region: &'a IntegrationRegion, form: &RationalForm, extra: Option<&PolynomialQ>) -> Prepared<'a> {
    let mut leaves: Vec<&PolynomialQ> = Vec::new();
    region.set.tree.leaves(&mut leaves);
    let mut compiled: Vec<CompiledPoly> = leaves.iter().map(|p| p.compile()).collect();
    if let Some(p) = extra {
        compiled.push(p.compile());
    }
    Prepared {
        set: &region.set,
        leaves: compiled,
        bbox: region.bounding_box.iter().map(|(a, b)| (q_to_f64(a), q_to_f64(b))).collect(),
        num: form.num.compile(),
        num_im: form.num_im.compile(),
        den: form.den.compile(),
    }
}

fn check_shapes(region: &IntegrationRegion, form: &RationalForm) -> Result<()> {
    if form.degree != region.dimension {
        return Err(PeriodError::DimensionMismatch {
            expected: region.dimension,
            got: form.degree,
        });
    }
    if form.num.n_vars != region.set.n_vars {
        return Err(PeriodError::DimensionMismatch {
            expected: region.set.n_vars,
            got: form.num.n_vars,
        });
    }
    if region.dimension != region.set.n_vars {
        return Err(PeriodError::UnsupportedRegion(format!(
            "region of dimension {} in R^{}: only full-dimensional regions are integrated",
            region.dimension, region.set.n_vars
        )));
    }
    Ok(())
}

/// ∫_G ω. Proper mode rejects poles on the closed region; with
/// `singular_shrink_levels > 0` the integral is taken over G ∩ {|den| ≥ ε}
/// for ε = 1/8, 1/16, … and extrapolated to ε = 0.
pub fn naive_period(region: &IntegrationRegion, form: &RationalForm, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    naive_period_report(region, form, cfg).map(|r| r.value)
}

pub fn naive_period_report(region: &IntegrationRegion, form: &RationalForm, cfg: &QuadratureConfig) -> Result<NaivePeriod> {
    cfg.validate()?;
    check_shapes(region, form)?;
    let sign = region.orientation as f64;
    if cfg.singular_shrink_levels == 0 {
        let prep = prepare(region, form, None);
        prep.scan_poles()?;
        let (v, e) = prep.integrate(cfg)?;
        return Ok(NaivePeriod {
            value: v * sign,
            error: e,
            levels: vec![],
            extrapolated: vec![],
            residuals: vec![],
        });
    }
    let levels = cfg.singular_shrink_levels;
    if levels < 2 {
        return Err(PeriodError::InvalidConfig("improper mode needs at least two shrink levels".into()));
    }
    let den2 = form.den.mul(&form.den);
    let mut raw = Vec::new();
    let mut table: Vec<Vec<ComplexValue>> = Vec::new();
    for k in 0..levels {
        let eps = EPS0 / 2f64.powi(k as i32);
        let eps_q = Q::from_float(eps * eps).ok_or_else(|| PeriodError::InvalidConfig("shrink parameter".into()))?;
        let cut = den2.sub(&PolynomialQ::constant(region.set.n_vars, eps_q));
        let shrunk = IntegrationRegion {
            set: SemiAlgebraicSet {
                n_vars: region.set.n_vars,
                tree: SetTree::Intersection(vec![region.set.tree.clone(), SetTree::Leaf(cut.clone(), Relation::Ge)]),
            },
            ..region.clone()
        };
        let prep = prepare(&shrunk, form, None);
        let (v, _) = prep.integrate(cfg)?;
        raw.push((eps, v * sign));
        let mut row = vec![v * sign];
        for j in 1..=k {
            let f = 2f64.powi(j as i32);
            let prev = &table[k - 1];
            let t = row[j - 1] + (row[j - 1] - prev[j - 1]) / (f - 1.0);
            row.push(t);
        }
        table.push(row);
    }
    let extrapolated: Vec<ComplexValue> = table.iter().enumerate().map(|(k, r)| r[k]).collect();
    let residuals: Vec<f64> = extrapolated.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let value = *extrapolated.last().unwrap_or(&c(f64::NAN, 0.0));
    let error = *residuals.last().unwrap_or(&f64::INFINITY);
    Ok(NaivePeriod {
        value,
        error,
        levels: raw,
        extrapolated,
        residuals,
    })
}

// ---------------------------------------------------------------------------
// JSON

/// Polynomial as {"e1,e2,…": "p/q"}.
pub type PolyJson = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeJson {
    #[serde(rename = "leaf")]
    Leaf { poly: PolyJson, rel: Relation },
    #[serde(rename = "not")]
    Not(Box<TreeJson>),
    #[serde(rename = "and")]
    And(Vec<TreeJson>),
    #[serde(rename = "or")]
    Or(Vec<TreeJson>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionJson {
    pub vars: Vec<String>,
    pub tree: TreeJson,
    #[serde(rename = "box")]
    pub bbox: Vec<[String; 2]>,
    #[serde(default = "one_i8")]
    pub orientation: i8,
}

fn one_i8() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub vars: Vec<String>,
    pub num: PolyJson,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub num_im: PolyJson,
    pub den: PolyJson,
}

pub fn poly_from_json(n: usize, p: &PolyJson) -> Result<PolynomialQ> {
    let mut terms = Vec::new();
    for (k, v) in p {
        let e: Vec<u32> = if k.trim().is_empty() {
            vec![]
        } else {
            k.split(',')
                .map(|s| s.trim().parse::<u32>().map_err(|e| PeriodError::Parse(format!("exponent {s}: {e}"))))
                .collect::<Result<_>>()?
        };
        terms.push((e, parse_q(v)?));
    }
    PolynomialQ::new(n, terms)
}

pub fn poly_to_json(p: &PolynomialQ) -> PolyJson {
    p.terms
        .iter()
        .map(|(e, x)| (e.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","), fmt_q(x)))
        .collect()
}

fn tree_from_json(n: usize, t: &TreeJson) -> Result<SetTree> {
    Ok(match t {
        TreeJson::Leaf { poly, rel } => SetTree::Leaf(poly_from_json(n, poly)?, *rel),
        TreeJson::Not(t) => SetTree::Complement(Box::new(tree_from_json(n, t)?)),
        TreeJson::And(v) => SetTree::Intersection(v.iter().map(|t| tree_from_json(n, t)).collect::<Result<_>>()?),
        TreeJson::Or(v) => SetTree::Union(v.iter().map(|t| tree_from_json(n, t)).collect::<Result<_>>()?),
    })
}

fn tree_to_json(t: &SetTree) -> TreeJson {
    match t {
        SetTree::Leaf(p, r) => TreeJson::Leaf {
            poly: poly_to_json(p),
            rel: *r,
        },
        SetTree::Complement(t) => TreeJson::Not(Box::new(tree_to_json(t))),
        SetTree::Intersection(v) => TreeJson::And(v.iter().map(tree_to_json).collect()),
        SetTree::Union(v) => TreeJson::Or(v.iter().map(tree_to_json).collect()),
    }
}

impl RegionJson {
    pub fn to_region(&self) -> Result<IntegrationRegion> {
        let n = self.vars.len();
        let set = SemiAlgebraicSet::new(n, tree_from_json(n, &self.tree)?)?;
        let bbox = self
            .bbox
            .iter()
            .map(|[a, b]| Ok((parse_q(a)?, parse_q(b)?)))
            .collect::<Result<Vec<_>>>()?;
        IntegrationRegion::new(set, bbox, self.orientation)
    }

    pub fn from_region(r: &IntegrationRegion, vars: &[String]) -> Self {
        RegionJson {
            vars: vars.to_vec(),
            tree: tree_to_json(&r.set.tree),
            bbox: r.bounding_box.iter().map(|(a, b)| [fmt_q(a), fmt_q(b)]).collect(),
            orientation: r.orientation,
        }
    }
}

impl FormJson {
    pub fn to_form(&self) -> Result<RationalForm> {
        let n = self.vars.len();
        RationalForm::complex(
            poly_from_json(n, &self.num)?,
            poly_from_json(n, &self.num_im)?,
            poly_from_json(n, &self.den)?,
        )
    }

    pub fn from_form(f: &RationalForm, vars: &[String]) -> Self {
        FormJson {
            vars: vars.to_vec(),
            num: poly_to_json(&f.num),
            num_im: poly_to_json(&f.num_im),
            den: poly_to_json(&f.den),
        }
    }
}

/// Human-readable summary of a naïve period for reports.
pub fn describe(p: &NaivePeriod) -> String {
    format!("{} ± {:e}", fmt_c(p.value), p.error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_a_cubic() {
        // (x-1)(x-2)(x+3) = x³ - 7x + 6
        let r = real_roots(&[6.0, -7.0, 0.0, 1.0], -5.0, 5.0);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // double root at 1
        let r = real_roots(&[1.0, -2.0, 1.0], -5.0, 5.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-7);
    }
}
