//! Exact triple coproducts over declared period atoms, unipotent monodromy
//! and its logarithm, limit period matrices and mixed Hodge structure records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::derham::{basis_punctured_line, PuncturedLinePair};
use crate::error::{PeriodError, Result};
use crate::exact::{fmt_q, parse_q, q_to_f64, qi, Q};
use crate::numerics::{c, fmt_c, ComplexValue, QuadratureConfig, TWO_PI_I};
use crate::periods::{
    dlog_principal_branch, homology_cycles_punctured_line, period_matrix_dlog, period_matrix_punctured_line,
    recognize_rational, Component, PeriodMatrix, Support,
};
use crate::polylog::{BranchSpec, ParamLoop};

pub const TWO_PI_I_LABEL: &str = "2πi";

/// Tolerance for matching an atom decomposition against a numeric entry.
pub const ATOM_TOL: f64 = 1e-9;

/// Largest total degree allowed for a monomial in an input entry.
pub const MAX_HEIGHT: u32 = 2;

// ---------------------------------------------------------------------------
// atoms and exact entries

/// Ordered list of labeled constants treated as algebraically independent.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomBasis {
    pub atoms: Vec<(String, ComplexValue)>,
}

impl AtomBasis {
    pub fn new(atoms: Vec<(String, ComplexValue)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (l, v) in &atoms {
            if l.is_empty() || l == "1" {
                return Err(PeriodError::Parse(format!("reserved atom label {l:?}")));
            }
            if !seen.insert(l.clone()) {
                return Err(PeriodError::Parse(format!("duplicate atom {l}")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(PeriodError::Parse(format!("atom {l} has a non-finite value")));
            }
        }
        Ok(AtomBasis { atoms })
    }

    pub fn value(&self, label: &str) -> Option<ComplexValue> {
        self.atoms.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn labels(&self) -> Vec<String> {
        self.atoms.iter().map(|(l, _)| l.clone()).collect()
    }
}

/// Product of atoms with integer exponents; the empty monomial is 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<String, i32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn atom(label: &str, e: i32) -> Self {
        let mut m = BTreeMap::new();
        if e != 0 {
            m.insert(label.to_string(), e);
        }
        Monomial(m)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn height(&self) -> u32 {
        self.0.values().map(|e| e.unsigned_abs()).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (l, e) in &other.0 {
            let v = m.entry(l.clone()).or_insert(0);
            *v += e;
            if *v == 0 {
                m.remove(l);
            }
        }
        Monomial(m)
    }

    pub fn inv(&self) -> Monomial {
        Monomial(self.0.iter().map(|(l, e)| (l.clone(), -e)).collect())
    }

    pub fn eval(&self, basis: &AtomBasis) -> Result<ComplexValue> {
        let mut v = c(1.0, 0.0);
        for (l, e) in &self.0 {
            let a = basis
                .value(l)
                .ok_or_else(|| PeriodError::Parse(format!("undeclared atom {l}")))?;
            v *= a.powi(*e);
        }
        Ok(v)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(l, e)| if *e == 1 { l.clone() } else { format!("({l})^{e}") })
            .collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// ℚ-linear combination of monomials, kept canonical (no zero coefficients).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AtomExpr(pub BTreeMap<Monomial, Q>);

impl AtomExpr {
    pub fn zero() -> Self {
        AtomExpr(BTreeMap::new())
    }

    pub fn rational(x: Q) -> Self {
        Self::term(x, Monomial::one())
    }

    pub fn int(n: i64) -> Self {
        Self::rational(qi(n))
    }

    pub fn atom(label: &str) -> Self {
        Self::term(Q::one(), Monomial::atom(label, 1))
    }

    pub fn term(x: Q, m: Monomial) -> Self {
        let mut e = AtomExpr::zero();
        e.add_term(m, x);
        e
    }

    pub fn two_pi_i() -> Self {
        Self::atom(TWO_PI_I_LABEL)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn add_term(&mut self, m: Monomial, x: Q) {
        if x.is_zero() {
            return;
        }
        let v = self.0.entry(m.clone()).or_insert_with(Q::zero);
        *v += x;
        if v.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn add(&self, other: &AtomExpr) -> AtomExpr {
        let mut out = self.clone();
        for (m, x) in &other.0 {
            out.add_term(m.clone(), x.clone());
        }
        out
    }

    pub fn neg(&self) -> AtomExpr {
        AtomExpr(self.0.iter().map(|(m, x)| (m.clone(), -x)).collect())
    }

    pub fn sub(&self, other: &AtomExpr) -> AtomExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &AtomExpr) -> AtomExpr {
        let mut out = AtomExpr::zero();
        for (m1, x1) in &self.0 {
            for (m2, x2) in &other.0 {
                out.add_term(m1.mul(m2), x1 * x2);
            }
        }
        out
    }

    pub fn scale(&self, s: &Q) -> AtomExpr {
        let mut out = AtomExpr::zero();
        for (m, x) in &self.0 {
            out.add_term(m.clone(), x * s);
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> AtomExpr {
        AtomExpr(self.0.iter().map(|(k, x)| (k.mul(m), x.clone())).collect())
    }

    /// The single term (coefficient, monomial), if there is exactly one.
    pub fn as_monomial(&self) -> Option<(&Q, &Monomial)> {
        if self.0.len() == 1 {
            self.0.iter().next().map(|(m, x)| (x, m))
        } else {
            None
        }
    }

    /// Inverse of a single-term expression.
    pub fn inv_monomial(&self) -> Result<AtomExpr> {
        match self.as_monomial() {
            Some((x, m)) => Ok(AtomExpr::term(x.recip(), m.inv())),
            None if self.is_zero() => Err(PeriodError::NonInvertible),
            None => Err(PeriodError::NonMonomialDivision(self.to_string())),
        }
    }

    pub fn height(&self) -> u32 {
        self.0.keys().map(Monomial::height).max().unwrap_or(0)
    }

    pub fn eval(&self, basis: &AtomBasis) -> Result<ComplexValue> {
        let mut v = c(0.0, 0.0);
        for (m, x) in &self.0 {
            v += m.eval(basis)? * q_to_f64(x);
        }
        Ok(v)
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        self.0.keys().flat_map(|m| m.0.keys().cloned()).collect()
    }
}

impl fmt::Display for AtomExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, x) in &self.0 {
            let neg = x.is_negative();
            let ax = x.abs();
            let sign = match (first, neg) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            let body = if m.is_one() {
                fmt_q(&ax)
            } else if ax.is_one() {
                m.to_string()
            } else {
                format!("{}·{}", fmt_q(&ax), m)
            };
            write!(f, "{sign}{body}")?;
            first = false;
        }
        Ok(())
    }
}

/// JSON form of one term: {"coef": "p/q", "atoms": {label: exponent}}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coef: String,
    #[serde(default)]
    pub atoms: BTreeMap<String, i32>,
}

/// JSON input for an exact matrix over declared atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMatrixJson {
    /// label → [re, im]
    pub atoms: BTreeMap<String, [f64; 2]>,
    pub entries: Vec<Vec<Vec<TermJson>>>,
    /// optional numeric matrix to check the decomposition against, as [re, im] pairs
    #[serde(default)]
    pub numeric: Option<Vec<Vec<[f64; 2]>>>,
}

impl ExactMatrixJson {
    pub fn into_parts(self) -> Result<(AtomBasis, Vec<Vec<AtomExpr>>, Option<Vec<Vec<ComplexValue>>>)> {
        let basis = AtomBasis::new(self.atoms.into_iter().map(|(l, [re, im])| (l, c(re, im))).collect())?;
        let entries = self
            .entries
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|terms| {
                        let mut e = AtomExpr::zero();
                        for t in terms {
                            e.add_term(Monomial(t.atoms.into_iter().filter(|(_, e)| *e != 0).collect()), parse_q(&t.coef)?);
                        }
                        Ok(e)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let numeric = self
            .numeric
            .map(|m| m.into_iter().map(|r| r.into_iter().map(|[re, im]| c(re, im)).collect()).collect());
        Ok((basis, entries, numeric))
    }
}

/// Check that every atom is declared, heights stay in the monomial layer, and
/// (optionally) that the decomposition reproduces the numeric entries.
pub fn verify_exact_matrix(
    entries: &[Vec<AtomExpr>],
    basis: &AtomBasis,
    numeric: Option<&[Vec<ComplexValue>]>,
) -> Result<()> {
    let n = entries.len();
    for (i, row) in entries.iter().enumerate() {
        if row.len() != n {
            return Err(PeriodError::DimensionMismatch { expected: n, got: row.len() });
        }
        for (j, e) in row.iter().enumerate() {
            if e.height() > MAX_HEIGHT {
                return Err(PeriodError::NonMonomialDivision(format!(
                    "entry ({i},{j}) = {e} exceeds monomial height {MAX_HEIGHT}"
                )));
            }
            let v = e.eval(basis)?;
            if let Some(num) = numeric {
                let target = num[i][j];
                let dev = (v - target).norm();
                if dev > ATOM_TOL * (1.0 + target.norm()) {
                    return Err(PeriodError::AtomMismatch {
                        entry: format!("({i},{j}) = {e}"),
                        deviation: dev,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Exact inverse by Gauss–Jordan elimination with single-term pivots.
pub fn exact_inverse(p: &[Vec<AtomExpr>]) -> Result<Vec<Vec<AtomExpr>>> {
    let n = p.len();
    let mut a: Vec<Vec<AtomExpr>> = p.to_vec();
    let mut inv: Vec<Vec<AtomExpr>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { AtomExpr::int(1) } else { AtomExpr::zero() }).collect())
        .collect();
    for col in 0..n {
        let candidates: Vec<usize> = (col..n).filter(|&r| !a[r][col].is_zero()).collect();
        if candidates.is_empty() {
            return Err(PeriodError::NonInvertible);
        }
        let piv = candidates
            .iter()
            .copied()
            .find(|&r| a[r][col].as_monomial().is_some())
            .ok_or_else(|| PeriodError::NonMonomialDivision(a[candidates[0]][col].to_string()))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let pinv = a[col][col].inv_monomial()?;
        for k in 0..n {
            a[col][k] = a[col][k].mul(&pinv);
            inv[col][k] = inv[col][k].mul(&pinv);
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for k in 0..n {
                let t = f.mul(&a[col][k]);
                a[r][k] = a[r][k].sub(&t);
                let t = f.mul(&inv[col][k]);
                inv[r][k] = inv[r][k].sub(&t);
            }
        }
    }
    Ok(inv)
}

pub fn exact_mul(x: &[Vec<AtomExpr>], y: &[Vec<AtomExpr>]) -> Vec<Vec<AtomExpr>> {
    let n = x.len();
    let m = y.first().map_or(0, |r| r.len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = AtomExpr::zero();
                    for (k, yk) in y.iter().enumerate() {
                        s = s.add(&x[i][k].mul(&yk[j]));
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Formal sum of triple tensors of monomials with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripleTensor(pub BTreeMap<(Monomial, Monomial, Monomial), Q>);

impl TripleTensor {
    pub fn zero() -> Self {
        TripleTensor(BTreeMap::new())
    }

    /// x ⊗ y ⊗ z expanded ℚ-multilinearly.
    pub fn add_product(&mut self, coef: &Q, x: &AtomExpr, y: &AtomExpr, z: &AtomExpr) {
        for (m1, c1) in &x.0 {
            for (m2, c2) in &y.0 {
                for (m3, c3) in &z.0 {
                    let key = (m1.clone(), m2.clone(), m3.clone());
                    let v = self.0.entry(key.clone()).or_insert_with(Q::zero);
                    *v += coef * c1 * c2 * c3;
                    if v.is_zero() {
                        self.0.remove(&key);
                    }
                }
            }
        }
    }

    pub fn term(coef: Q, a: Monomial, b: Monomial, c: Monomial) -> Self {
        let mut t = TripleTensor::zero();
        if !coef.is_zero() {
            t.0.insert((a, b, c), coef);
        }
        t
    }

    pub fn add(&self, other: &TripleTensor) -> TripleTensor {
        let mut out = self.clone();
        for ((a, b, cc), x) in &other.0 {
            out.add_product(x, &AtomExpr::term(Q::one(), a.clone()), &AtomExpr::term(Q::one(), b.clone()), &AtomExpr::term(Q::one(), cc.clone()));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Value under the multiplication map x ⊗ y ⊗ z ↦ xyz.
    pub fn contract(&self, basis: &AtomBasis) -> Result<ComplexValue> {
        let mut v = c(0.0, 0.0);
        for ((a, b, cc), x) in &self.0 {
            v += a.eval(basis)? * b.eval(basis)? * cc.eval(basis)? * q_to_f64(x);
        }
        Ok(v)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .0
            .iter()
            .map(|((a, b, cc), x)| json!({"coef": fmt_q(x), "factors": [a.to_string(), b.to_string(), cc.to_string()]}))
            .collect();
        json!({"terms": terms, "display": self.to_string()})
    }
}

impl fmt::Display for TripleTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((a, b, cc), x) in &self.0 {
            let sign = match (first, x.is_negative()) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            let ax = x.abs();
            let coef = if ax.is_one() { String::new() } else { format!("{}·", fmt_q(&ax)) };
            write!(f, "{sign}{coef}{a} ⊗ {b} ⊗ {cc}")?;
            first = false;
        }
        Ok(())
    }
}

/// Δ(P_ij/(2πi)ⁿ) = Σ P_ik/(2πi)ⁿ ⊗ (2πi)ⁿ(P⁻¹)_kl ⊗ P_lj/(2πi)ⁿ.
pub fn triple_coproduct(p: &[Vec<AtomExpr>], i: usize, j: usize, n: i32) -> Result<TripleTensor> {
    let dim = p.len();
    if p.iter().any(|r| r.len() != dim) {
        return Err(PeriodError::DimensionMismatch {
            expected: dim,
            got: p.iter().map(|r| r.len()).find(|&l| l != dim).unwrap_or(dim),
        });
    }
    if i >= dim || j >= dim {
        return Err(PeriodError::DimensionMismatch { expected: dim, got: i.max(j) + 1 });
    }
    let inv = exact_inverse(p)?;
    let down = Monomial::atom(TWO_PI_I_LABEL, -n);
    let up = Monomial::atom(TWO_PI_I_LABEL, n);
    let mut t = TripleTensor::zero();
    let one = Q::one();
    for k in 0..dim {
        if p[i][k].is_zero() {
            continue;
        }
        let left = p[i][k].mul_monomial(&down);
        for l in 0..dim {
            if inv[k][l].is_zero() || p[l][j].is_zero() {
                continue;
            }
            let mid = inv[k][l].mul_monomial(&up);
            let right = p[l][j].mul_monomial(&down);
            t.add_product(&one, &left, &mid, &right);
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// exact punctured-line matrices

const GREEK: [&str; 10] = ["α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "κ", "λ"];

/// Exact period matrix of a punctured-line pair in the cycles × forms layout,
/// over the atoms 2πi and ln|p| for each divisor point |p| ≠ 1 (named
/// ln α, ln β, … in order of appearance). The decomposition is checked
/// against the numerically integrated matrix.
pub fn exact_matrix_punctured_line(
    pair: &PuncturedLinePair,
    cfg: &QuadratureConfig,
) -> Result<(AtomBasis, Vec<Vec<AtomExpr>>)> {
    let mut log_atoms: Vec<(Q, String)> = Vec::new();
    for p in &pair.divisor_points {
        let a = p.abs();
        if a.is_one() || log_atoms.iter().any(|(x, _)| *x == a) {
            continue;
        }
        let name = GREEK
            .get(log_atoms.len())
            .map(|g| g.to_string())
            .unwrap_or_else(|| format!("p{}", log_atoms.len() + 1));
        log_atoms.push((a, format!("ln {name}")));
    }
    let mut atoms = vec![(TWO_PI_I_LABEL.to_string(), TWO_PI_I)];
    atoms.extend(log_atoms.iter().map(|(x, l)| (l.clone(), c(q_to_f64(x).ln(), 0.0))));
    let basis = AtomBasis::new(atoms)?;
    let ln_of = |x: &Q| -> AtomExpr {
        let a = x.abs();
        match log_atoms.iter().find(|(v, _)| *v == a) {
            Some((_, l)) => AtomExpr::atom(l),
            None => AtomExpr::zero(),
        }
    };
    let forms = basis_punctured_line(pair)?;
    let cycles = homology_cycles_punctured_line(pair)?;
    let nearest_point = |z: ComplexValue| -> Result<Q> {
        pair.divisor_points
            .iter()
            .find(|p| (c(q_to_f64(p), 0.0) - z).norm() < 1e-10)
            .cloned()
            .ok_or_else(|| PeriodError::UnsupportedConfiguration(format!("path endpoint {} is not a divisor point", fmt_c(z))))
    };
    let mut entries = Vec::new();
    for g in &cycles {
        let mut row = Vec::new();
        for e in &forms.elements {
            let mut acc = AtomExpr::zero();
            for piece in &g.pieces {
                let w = Q::from_float(piece.weight)
                    .ok_or_else(|| PeriodError::InvalidElement("non-finite cycle weight".into()))?;
                match (&piece.component, &piece.support) {
                    (Component::Ambient, Support::Path(path)) if path.is_closed() => {
                        let res = e.form.coeff(-1);
                        if !res.im.is_zero() {
                            return Err(PeriodError::UnsupportedConfiguration("non-real residue".into()));
                        }
                        acc = acc.add(&AtomExpr::two_pi_i().scale(&(res.re * &w)));
                    }
                    (Component::Ambient, Support::Path(path)) => {
                        let (s, t) = (nearest_point(path.start())?, nearest_point(path.end())?);
                        for (n, a) in &e.form.coeffs {
                            if !a.im.is_zero() {
                                return Err(PeriodError::UnsupportedConfiguration("non-real form coefficient".into()));
                            }
                            let term = if *n == -1 {
                                ln_of(&t).sub(&ln_of(&s))
                            } else {
                                let k = n + 1;
                                AtomExpr::rational((pow_q(&t, k) - pow_q(&s, k)) / qi(k as i64))
                            };
                            acc = acc.add(&term.scale(&(&a.re * &w)));
                        }
                    }
                    (Component::D(j), Support::Point(_)) => {
                        let cj = &e.constants[*j];
                        if !cj.im.is_zero() {
                            return Err(PeriodError::UnsupportedConfiguration("non-real constant".into()));
                        }
                        acc = acc.add(&AtomExpr::rational(&cj.re * &w));
                    }
                    _ => {}
                }
            }
            row.push(acc);
        }
        entries.push(row);
    }
    let numeric = period_matrix_punctured_line(pair, cfg)?.transposed().entries;
    verify_exact_matrix(&entries, &basis, Some(&numeric))?;
    Ok((basis, entries))
}

fn pow_q(x: &Q, k: i32) -> Q {
    if k >= 0 {
        num_traits::pow(x.clone(), k as usize)
    } else {
        num_traits::pow(x.recip(), (-k) as usize)
    }
}

// ---------------------------------------------------------------------------
// monodromy

pub type RatMatrix = Vec<Vec<Q>>;

pub fn rat_identity(n: usize) -> RatMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

pub fn rat_mul(x: &RatMatrix, y: &RatMatrix) -> RatMatrix {
    let n = x.len();
    let m = y.first().map_or(0, |r| r.len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..y.len()).fold(Q::zero(), |s, k| s + &x[i][k] * &y[k][j])).collect())
        .collect()
}

fn rat_add_scaled(x: &RatMatrix, y: &RatMatrix, s: &Q) -> RatMatrix {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v * s).collect())
        .collect()
}

fn rat_is_zero(x: &RatMatrix) -> bool {
    x.iter().all(|r| r.iter().all(|v| v.is_zero()))
}

fn rat_to_json(x: &RatMatrix) -> serde_json::Value {
    json!(x.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Monodromy matrix with the loop it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyMatrix {
    pub entries: RatMatrix,
    pub description: String,
}

impl MonodromyMatrix {
    pub fn new(entries: RatMatrix, description: &str) -> Result<Self> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(PeriodError::DimensionMismatch { expected: n, got: entries.iter().map(|r| r.len()).max().unwrap_or(0) });
        }
        Ok(MonodromyMatrix {
            entries,
            description: description.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// (T - I)^dim = 0.
    pub fn is_unipotent(&self) -> bool {
        let n = self.dim();
        let u = rat_add_scaled(&self.entries, &rat_identity(n), &-Q::one());
        let mut p = rat_identity(n);
        for _ in 0..n {
            p = rat_mul(&p, &u);
        }
        rat_is_zero(&p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"entries": rat_to_json(&self.entries), "loop": self.description})
    }
}

/// Monodromy around {a = 1}: the first column picks up minus the third.
pub fn t_a1() -> MonodromyMatrix {
    let mut t = rat_identity(4);
    t[2][0] = qi(-1);
    MonodromyMatrix {
        entries: t,
        description: "a circles 1 counterclockwise, b fixed".into(),
    }
}

/// Monodromy around (1, 0) inside {a = 1}.
pub fn t_origin() -> MonodromyMatrix {
    let mut t = rat_identity(4);
    t[1][0] = qi(1);
    MonodromyMatrix {
        entries: t,
        description: "b circles 0 counterclockwise inside a = 1".into(),
    }
}

/// N = M/(2πi) with M rational.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyLog {
    pub m: RatMatrix,
}

impl MonodromyLog {
    pub fn zero(n: usize) -> Self {
        MonodromyLog {
            m: vec![vec![Q::zero(); n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn to_complex(&self) -> Vec<Vec<ComplexValue>> {
        self.m
            .iter()
            .map(|r| r.iter().map(|x| c(q_to_f64(x), 0.0) / TWO_PI_I).collect())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"numerator": rat_to_json(&self.m), "denominator": TWO_PI_I_LABEL})
    }
}

/// exp of a nilpotent rational matrix by its finite series.
pub fn exp_nilpotent(m: &RatMatrix) -> Result<RatMatrix> {
    let n = m.len();
    let mut out = rat_identity(n);
    let mut p = rat_identity(n);
    let mut fact = Q::one();
    for k in 1..=n {
        p = rat_mul(&p, m);
        if rat_is_zero(&p) {
            return Ok(out);
        }
        fact *= qi(k as i64);
        out = rat_add_scaled(&out, &p, &fact.recip());
    }
    p = rat_mul(&p, m);
    if rat_is_zero(&p) {
        Ok(out)
    } else {
        Err(PeriodError::NotUnipotent)
    }
}

/// N = ln T/(2πi) with ln T = Σ_{k≥1} (-1)^{k+1}(T - I)^k/k.
pub fn monodromy_logarithm(t: &MonodromyMatrix) -> Result<MonodromyLog> {
    if !t.is_unipotent() {
        return Err(PeriodError::NotUnipotent);
    }
    let n = t.dim();
    let u = rat_add_scaled(&t.entries, &rat_identity(n), &-Q::one());
    let mut out = vec![vec![Q::zero(); n]; n];
    let mut p = rat_identity(n);
    for k in 1..=n {
        p = rat_mul(&p, &u);
        if rat_is_zero(&p) {
            break;
        }
        let s = if k % 2 == 1 { qi(1) } else { qi(-1) } / qi(k as i64);
        out = rat_add_scaled(&out, &p, &s);
    }
    Ok(MonodromyLog { m: out })
}

/// T recovered from the logarithm: exp(2πi·N).
pub fn exp_two_pi_i(n: &MonodromyLog) -> Result<RatMatrix> {
    exp_nilpotent(&n.m)
}

/// Monodromy of the dlog period matrix along a parameter loop, read off as
/// P⁻¹·P_continued and recognized as a rational matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationCheck {
    pub base: PeriodMatrix,
    pub continued: PeriodMatrix,
    pub monodromy: MonodromyMatrix,
    /// max |P·T - P_continued| over entries
    pub residual: f64,
}

pub fn monodromy_from_continuation(
    a: ComplexValue,
    b: ComplexValue,
    lp: &ParamLoop,
    cfg: &QuadratureConfig,
) -> Result<ContinuationCheck> {
    let start = lp.path.start();
    let (a, b) = match lp.param {
        0 => (start, b),
        1 => (a, start),
        k => {
            return Err(PeriodError::UnsupportedContinuation(format!("parameter index {k} out of range")));
        }
    };
    let branch = dlog_principal_branch(a, b)?;
    let base = period_matrix_dlog(a, b, &branch, cfg)?;
    let continued = period_matrix_dlog(a, b, &branch.with_loops(vec![lp.clone()]), cfg)?;
    let n = 4;
    let p0 = DMatrix::from_fn(n, n, |i, j| base.entries[i][j]);
    let p1 = DMatrix::from_fn(n, n, |i, j| continued.entries[i][j]);
    let inv = p0.clone().try_inverse().ok_or(PeriodError::NonInvertible)?;
    let t = inv * p1;
    let mut rat = vec![vec![Q::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let z = t[(i, j)];
            if z.im.abs() > 1e-6 {
                return Err(PeriodError::RecognitionFailed { value: fmt_c(z), residual: z.im.abs() });
            }
            rat[i][j] = recognize_rational(z.re, 1000).ok_or(PeriodError::RecognitionFailed {
                value: fmt_c(z),
                residual: f64::INFINITY,
            })?;
        }
    }
    let tc = DMatrix::from_fn(n, n, |i, j| c(q_to_f64(&rat[i][j]), 0.0));
    let pred = &p0 * tc;
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            residual = residual.max((pred[(i, j)] - continued.entries[i][j]).norm());
        }
    }
    Ok(ContinuationCheck {
        base,
        continued,
        monodromy: MonodromyMatrix {
            entries: rat,
            description: format!("param {} along loop from {}", lp.param, fmt_c(start)),
        },
        residual,
    })
}

// ---------------------------------------------------------------------------
// limits

/// Extrapolated limit of P(t)·exp(-ln t·N) with its convergence report.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitResult {
    pub matrix: PeriodMatrix,
    /// |R_last - R_prev| over entries
    pub error: f64,
    /// max-entry differences between consecutive unextrapolated values
    pub differences: Vec<f64>,
    pub t_sequence: Vec<f64>,
}

fn untwist(p: &PeriodMatrix, n: &MonodromyLog, t: f64) -> Result<Vec<Vec<ComplexValue>>> {
    let dim = n.dim();
    if p.entries.len() != dim || p.entries.iter().any(|r| r.len() != dim) {
        return Err(PeriodError::DimensionMismatch { expected: dim, got: p.entries.len() });
    }
    // exp(-ln t · N) = exp(M·(-ln t/(2πi))) with M nilpotent
    let s = c(-t.ln(), 0.0) / TWO_PI_I;
    let mut e = DMatrix::<ComplexValue>::identity(dim, dim);
    let mm = DMatrix::from_fn(dim, dim, |i, j| c(q_to_f64(&n.m[i][j]), 0.0) * s);
    let mut pw = DMatrix::<ComplexValue>::identity(dim, dim);
    let mut fact = 1.0;
    for k in 1..=dim {
        pw = &pw * &mm;
        fact *= k as f64;
        e += &pw / c(fact, 0.0);
    }
    let pm = DMatrix::from_fn(dim, dim, |i, j| p.entries[i][j]);
    let q = pm * e;
    Ok((0..dim).map(|i| (0..dim).map(|j| q[(i, j)]).collect()).collect())
}

fn max_diff(x: &[Vec<ComplexValue>], y: &[Vec<ComplexValue>]) -> f64 {
    x.iter()
        .zip(y)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).norm()))
        .fold(0.0, f64::max)
}

pub fn limit_period_matrix(
    p_of_t: &dyn Fn(f64) -> Result<PeriodMatrix>,
    n: &MonodromyLog,
    ts: &[f64],
) -> Result<LimitResult> {
    if ts.len() < 3 {
        return Err(PeriodError::InvalidConfig("need at least three t values".into()));
    }
    if ts.iter().any(|t| !(*t > 0.0)) || ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(PeriodError::InvalidConfig("t values must be positive and strictly decreasing".into()));
    }
    let mut template = None;
    let mut values = Vec::new();
    for &t in ts {
        let p = p_of_t(t)?;
        values.push(untwist(&p, n, t)?);
        template.get_or_insert(p);
    }
    let differences: Vec<f64> = values.windows(2).map(|w| max_diff(&w[0], &w[1])).collect();
    let scale = values.last().map_or(1.0, |v| v.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max));
    for w in differences.windows(2) {
        if w[1] > w[0] + 1e-12 * scale {
            return Err(PeriodError::NonConvergent {
                estimate: format!("differences {differences:?}"),
                error: w[1],
            });
        }
    }
    // first-order Richardson on consecutive pairs: error ∝ t
    let rich: Vec<Vec<Vec<ComplexValue>>> = (0..values.len() - 1)
        .map(|k| {
            let r = ts[k] / ts[k + 1];
            values[k]
                .iter()
                .zip(&values[k + 1])
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (v * r - u) / (r - 1.0)).collect())
                .collect()
        })
        .collect();
    let last = rich.last().cloned().unwrap_or_default();
    let error = max_diff(&last, &rich[rich.len() - 2]);
    let mut matrix = template.ok_or_else(|| PeriodError::InvalidConfig("empty t sequence".into()))?;
    matrix.entries = last;
    matrix.tolerance = error;
    Ok(LimitResult {
        matrix,
        error,
        differences,
        t_sequence: ts.to_vec(),
    })
}

/// Default geometric sequence 10⁻², …, 10⁻⁶.
pub fn default_t_sequence() -> Vec<f64> {
    (2..=6).map(|k| 10f64.powi(-k)).collect()
}

/// First limit step: a = 1 + t along ∂/∂a with b fixed.
pub fn limit_a1(b: ComplexValue, ts: &[f64], cfg: &QuadratureConfig) -> Result<LimitResult> {
    let n = monodromy_logarithm(&t_a1())?;
    let f = |t: f64| -> Result<PeriodMatrix> {
        let a = c(1.0 + t, 0.0);
        let br = dlog_principal_branch(a, b)?;
        period_matrix_dlog(a, b, &br, cfg)
    };
    let mut r = limit_period_matrix(&f, &n, ts)?;
    r.matrix.branch = Some(format!("limit a -> 1 along d/da at b = {}", fmt_c(b)));
    Ok(r)
}

/// Second limit step: b = -t along -∂/∂b inside {a = 1}, each P(t) itself a
/// first-step limit.
pub fn limit_origin(ts_a: &[f64], ts_b: &[f64], cfg: &QuadratureConfig) -> Result<LimitResult> {
    let n = monodromy_logarithm(&t_origin())?;
    let f = |t: f64| -> Result<PeriodMatrix> { Ok(limit_a1(c(-t, 0.0), ts_a, cfg)?.matrix) };
    let mut r = limit_period_matrix(&f, &n, ts_b)?;
    r.matrix.branch = Some("limit (a, b) -> (1, 0) along d/da then -d/db".into());
    Ok(r)
}

// ---------------------------------------------------------------------------
// mixed Hodge structures

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitStep {
    /// a → 1 along ∂/∂a
    A1,
    /// (1, b) → (1, 0) along -∂/∂b
    Origin,
}

impl LimitStep {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "a1" => Ok(LimitStep::A1),
            "origin" => Ok(LimitStep::Origin),
            other => Err(PeriodError::Parse(format!("unknown limit step {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LimitStep::A1 => "a1",
            LimitStep::Origin => "origin",
        }
    }
}

/// Lattice columns s_j, weight filtration over lattice indices and Hodge
/// filtration over ambient basis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedHodgeStructure {
    pub lattice: Vec<Vec<ComplexValue>>,
    pub weight: BTreeMap<i32, Vec<usize>>,
    pub hodge: BTreeMap<i32, Vec<usize>>,
    /// closed-form names of the nonconstant entries with their values
    pub atoms: Vec<(String, ComplexValue)>,
    pub provenance: Vec<String>,
    pub params: (ComplexValue, ComplexValue),
    pub tolerance: f64,
}

/// W_p as lattice indices, p = -5..=0; below -5 empty, above 0 everything.
pub fn weight_filtration() -> BTreeMap<i32, Vec<usize>> {
    let mut w = BTreeMap::new();
    w.insert(-5, vec![]);
    w.insert(-4, vec![3]);
    w.insert(-3, vec![3]);
    w.insert(-2, vec![1, 2, 3]);
    w.insert(-1, vec![1, 2, 3]);
    w.insert(0, vec![0, 1, 2, 3]);
    w
}

/// F^p as ambient indices, p = -2..=1; below -2 everything, above 1 empty.
pub fn hodge_filtration() -> BTreeMap<i32, Vec<usize>> {
    let mut f = BTreeMap::new();
    f.insert(-2, vec![0, 1, 2, 3]);
    f.insert(-1, vec![0, 1, 2]);
    f.insert(0, vec![0]);
    f.insert(1, vec![]);
    f
}

impl MixedHodgeStructure {
    pub fn from_matrix(p: &PeriodMatrix, atoms: Vec<(String, ComplexValue)>, provenance: Vec<String>, params: (ComplexValue, ComplexValue)) -> Self {
        let n = p.col_labels.len();
        let lattice = (0..n).map(|j| p.entries.iter().map(|r| r[j]).collect()).collect();
        MixedHodgeStructure {
            lattice,
            weight: weight_filtration(),
            hodge: hodge_filtration(),
            atoms,
            provenance,
            params,
            tolerance: p.tolerance,
        }
    }

    /// W_p ⊆ W_{p+1}, F^{p+1} ⊆ F^p, and both exhaustive at their ends.
    pub fn filtrations_nested(&self) -> bool {
        let sub = |a: &Vec<usize>, b: &Vec<usize>| a.iter().all(|x| b.contains(x));
        let w: Vec<&Vec<usize>> = self.weight.values().collect();
        let f: Vec<&Vec<usize>> = self.hodge.values().collect();
        let dim = self.lattice.len();
        w.windows(2).all(|x| sub(x[0], x[1]))
            && f.windows(2).all(|x| sub(x[1], x[0]))
            && w.first().is_some_and(|x| x.is_empty())
            && w.last().is_some_and(|x| x.len() == dim)
            && f.first().is_some_and(|x| x.len() == dim)
            && f.last().is_some_and(|x| x.is_empty())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let idx = |m: &BTreeMap<i32, Vec<usize>>| -> serde_json::Value {
            let mut o = serde_json::Map::new();
            for (k, v) in m {
                o.insert(k.to_string(), json!(v));
            }
            serde_json::Value::Object(o)
        };
        let mut atoms = serde_json::Map::new();
        for (l, v) in &self.atoms {
            atoms.insert(l.clone(), json!([v.re, v.im]));
        }
        json!({
            "atoms": atoms,
            "lattice": {
                "re": self.lattice.iter().map(|s| s.iter().map(|z| z.re).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "im": self.lattice.iter().map(|s| s.iter().map(|z| z.im).collect::<Vec<_>>()).collect::<Vec<_>>(),
            },
            "W": idx(&self.weight),
            "F": idx(&self.hodge),
            "provenance": self.provenance,
            "params": {"a": [self.params.0.re, self.params.0.im], "b": [self.params.1.re, self.params.1.im]},
            "tolerance": self.tolerance,
        })
    }
}

fn dlog_atoms(p: &PeriodMatrix) -> Vec<(String, ComplexValue)> {
    vec![
        ("Li1(1/b)".into(), p.entries[1][0]),
        ("Li1(1/a)".into(), p.entries[2][0]),
        ("Li11(b/a,1/b)".into(), p.entries[3][0]),
        ("2πi·Li1(b/a)".into(), p.entries[3][1]),
        ("2πi·ln((a-b)/(1-b))".into(), p.entries[3][2]),
    ]
}

/// The variation at a point (a, b): s_j = columns of the dlog period matrix.
pub fn build_vmhs(a: ComplexValue, b: ComplexValue, branch: &BranchSpec, cfg: &QuadratureConfig) -> Result<MixedHodgeStructure> {
    let p = period_matrix_dlog(a, b, branch, cfg)?;
    let prov = vec![format!("period matrix at a = {}, b = {} ({})", fmt_c(a), fmt_c(b), branch.describe())];
    Ok(MixedHodgeStructure::from_matrix(&p, dlog_atoms(&p), prov, (a, b)))
}

/// Limit structures: [A1] at the b of `vmhs`, or [A1, Origin].
pub fn limit_mhs(
    vmhs: &MixedHodgeStructure,
    steps: &[LimitStep],
    ts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<MixedHodgeStructure> {
    let b = vmhs.params.1;
    match steps {
        [LimitStep::A1] => {
            let r = limit_a1(b, ts, cfg)?;
            let p = &r.matrix;
            let atoms = vec![
                ("Li1(1/b)".into(), p.entries[1][0]),
                ("-Li2(1/(1-b))".into(), p.entries[3][0]),
                ("2πi·Li1(b)".into(), p.entries[3][1]),
            ];
            let mut prov = vmhs.provenance.clone();
            prov.push(format!(
                "step a1: t = a - 1 over {:?}, N = -E20/(2πi), extrapolation error {:e}",
                ts, r.error
            ));
            Ok(MixedHodgeStructure::from_matrix(p, atoms, prov, (c(1.0, 0.0), b)))
        }
        [LimitStep::A1, LimitStep::Origin] => {
            let r = limit_origin(ts, ts, cfg)?;
            let p = &r.matrix;
            let atoms = vec![("-ζ(2)".into(), p.entries[3][0])];
            let mut prov = vmhs.provenance.clone();
            prov.push(format!("step a1: t = a - 1 over {ts:?}, N = -E20/(2πi), b = -t' for each outer t'"));
            prov.push(format!(
                "step origin: t' = -b over {:?}, N = E10/(2πi), extrapolation error {:e}",
                ts, r.error
            ));
            Ok(MixedHodgeStructure::from_matrix(p, atoms, prov, (c(1.0, 0.0), c(0.0, 0.0))))
        }
        _ => Err(PeriodError::UnsupportedConfiguration(format!(
            "limit steps must be [a1] or [a1, origin], got [{}]",
            steps.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_triangular_2x2() {
        let l = AtomExpr::atom("ln α");
        let p = vec![vec![AtomExpr::int(1), l.clone()], vec![AtomExpr::zero(), AtomExpr::two_pi_i()]];
        let inv = exact_inverse(&p).unwrap();
        let id = exact_mul(&p, &inv);
        assert_eq!(id[0][0], AtomExpr::int(1));
        assert!(id[0][1].is_zero() && id[1][0].is_zero());
        assert_eq!(inv[0][1].to_string(), "-(2πi)^-1·ln α");
    }

    #[test]
    fn non_monomial_pivot_is_rejected() {
        let s = AtomExpr::atom("x").add(&AtomExpr::int(1));
        let p = vec![vec![s.clone(), s.clone()], vec![s.clone(), AtomExpr::atom("y").add(&s)]];
        assert!(matches!(exact_inverse(&p), Err(PeriodError::NonMonomialDivision(_))));
    }

    #[test]
    fn log_of_t_a1() {
        let n = monodromy_logarithm(&t_a1()).unwrap();
        assert_eq!(n.m[2][0], qi(-1));
        assert_eq!(exp_two_pi_i(&n).unwrap(), t_a1().entries);
    }
}
