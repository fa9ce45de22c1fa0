//! Multiple polylogarithms by nested series, hyperlogarithms by iterated path
//! integrals, and analytic continuation through explicit path deformation.
//!
//! Iterated integrals are propagated panel by panel along the path: on each
//! panel the partial integrals F_0 = 1, F_k = ∫ F_{k-1} dz/(z - a_k) are
//! represented on Chebyshev nodes and integrated spectrally.
//!
//! Continuation along a parameter loop sweeps the letters in small steps.
//! Whenever a letter crosses the base path a lasso (tether plus small circle)
//! around that letter is spliced into the path at the crossing point.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{PeriodError, Result};
use crate::numerics::{c, fmt_c, is_finite, ComplexValue, Path, QuadratureConfig, Segment};

const CHEB_N: usize = 32;
const MAX_DEPTH: usize = 60;
const MIN_PANEL: f64 = 1e-12;
const LETTER_TOL: f64 = 1e-13;
const SWEEP_STEPS: usize = 4099;

struct Cheb {
    /// Nodes on [-1, 1].
    nodes: [f64; CHEB_N],
    /// values → antiderivative (from -1) at nodes.
    integ: Vec<[f64; CHEB_N]>,
    /// values → integral over [-1, 1].
    total: [f64; CHEB_N],
    /// values → coefficients c_{N-1}, c_{N-2}.
    tail: [[f64; CHEB_N]; 2],
    /// values → c_0.
    c0: [f64; CHEB_N],
}

fn cheb() -> &'static Cheb {
    static CELL: OnceLock<Cheb> = OnceLock::new();
    CELL.get_or_init(|| {
        let n = CHEB_N;
        let theta: Vec<f64> = (0..n).map(|j| PI * (2 * j + 1) as f64 / (2 * n) as f64).collect();
        let mut nodes = [0.0; CHEB_N];
        for j in 0..n {
            nodes[j] = theta[j].cos();
        }
        let mut integ = vec![[0.0; CHEB_N]; n];
        let mut total = [0.0; CHEB_N];
        let mut tail = [[0.0; CHEB_N]; 2];
        let mut c0 = [0.0; CHEB_N];
        for col in 0..n {
            // coefficients of the interpolant of the unit vector e_col
            let mut coef = vec![0.0; n];
            for (k, ck) in coef.iter_mut().enumerate() {
                *ck = 2.0 / n as f64 * (k as f64 * theta[col]).cos();
            }
            coef[0] *= 0.5;
            tail[0][col] = coef[n - 1];
            tail[1][col] = coef[n - 2];
            c0[col] = coef[0];
            let mut anti = vec![0.0; n + 1];
            anti[1] += coef[0];
            if n > 1 {
                anti[2] += coef[1] / 4.0;
            }
            for k in 2..n {
                anti[k + 1] += coef[k] / (2.0 * (k + 1) as f64);
                anti[k - 1] -= coef[k] / (2.0 * (k - 1) as f64);
            }
            let at_minus: f64 = anti
                .iter()
                .enumerate()
                .map(|(k, a)| if k % 2 == 0 { *a } else { -*a })
                .sum();
            let at_plus: f64 = anti.iter().sum();
            total[col] = at_plus - at_minus;
            for row in 0..n {
                let v: f64 = anti
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (k as f64 * theta[row]).cos())
                    .sum();
                integ[row][col] = v - at_minus;
            }
        }
        Cheb {
            nodes,
            integ,
            total,
            tail,
            c0,
        }
    })
}

fn check_letters(letters: &[ComplexValue]) -> Result<()> {
    for a in letters {
        if !is_finite(*a) {
            return Err(PeriodError::SingularOnPath {
                at: format!("non-finite letter {}", fmt_c(*a)),
            });
        }
    }
    Ok(())
}

/// Classification of letters relative to a concrete path.
struct LetterInfo {
    /// letters that require panel refinement
    refine: Vec<ComplexValue>,
}

fn classify_letters(letters: &[ComplexValue], pieces: &[Segment]) -> Result<LetterInfo> {
    let n = letters.len();
    let start = pieces[0].start();
    let end = pieces.last().unwrap().end();
    let scale = pieces.iter().map(|s| s.length()).sum::<f64>().max(1.0);
    let mut refine = Vec::new();
    for (i, &a) in letters.iter().enumerate() {
        let at_start = (a - start).norm() <= LETTER_TOL * scale;
        let at_end = (a - end).norm() <= LETTER_TOL * scale;
        if at_start {
            if i == 0 {
                return Err(PeriodError::SingularOnPath {
                    at: format!("first letter {} equals the path start (divergent)", fmt_c(a)),
                });
            }
            // removable: F_{i-1} vanishes to first order at the start
            continue;
        }
        if at_end && i == n - 1 {
            return Err(PeriodError::SingularOnPath {
                at: format!("last letter {} equals the path end (divergent)", fmt_c(a)),
            });
        }
        if !at_end {
            let d = pieces
                .iter()
                .map(|s| s.nearest(a).0)
                .fold(f64::INFINITY, f64::min);
            if d <= LETTER_TOL * scale {
                return Err(PeriodError::SingularOnPath {
                    at: format!("letter {} lies on the path", fmt_c(a)),
                });
            }
        }
        refine.push(a);
    }
    Ok(LetterInfo { refine })
}

fn panel_tol(cfg: &QuadratureConfig) -> f64 {
    (cfg.abs_tol.min(cfg.rel_tol) * 1e-2).clamp(2e-15, 1e-8)
}

/// Iterated integral ∫ Π dz/(z - a_i) along the concatenated pieces.
pub(crate) fn iterated_integral(
    letters: &[ComplexValue],
    pieces: &[Segment],
    cfg: &QuadratureConfig,
) -> Result<ComplexValue> {
    cfg.validate()?;
    check_letters(letters)?;
    if letters.is_empty() {
        return Ok(c(1.0, 0.0));
    }
    if pieces.is_empty() {
        return Err(PeriodError::InvalidPath("empty path".into()));
    }
    let info = classify_letters(letters, pieces)?;
    let mut state = vec![c(0.0, 0.0); letters.len() + 1];
    state[0] = c(1.0, 0.0);
    let tol = panel_tol(cfg);
    for seg in pieces {
        panel(seg, 0.0, 1.0, letters, &info, &mut state, tol, 0)?;
    }
    let v = state[letters.len()];
    if !is_finite(v) {
        return Err(PeriodError::SingularOnPath {
            at: "non-finite iterated integral".into(),
        });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn panel(
    seg: &Segment,
    u0: f64,
    u1: f64,
    letters: &[ComplexValue],
    info: &LetterInfo,
    state: &mut [ComplexValue],
    tol: f64,
    depth: usize,
) -> Result<()> {
    let width = u1 - u0;
    let can_split = depth < MAX_DEPTH && width > MIN_PANEL;
    if can_split {
        let sub = seg.sub(u0, u1);
        let len = sub.length();
        let too_close = info.refine.iter().any(|&a| sub.nearest(a).0 < len);
        if too_close {
            let mid = 0.5 * (u0 + u1);
            panel(seg, u0, mid, letters, info, state, tol, depth + 1)?;
            return panel(seg, mid, u1, letters, info, state, tol, depth + 1);
        }
    }
    let ch = cheb();
    let half = 0.5 * width;
    let mid = 0.5 * (u0 + u1);
    let mut z = [c(0.0, 0.0); CHEB_N];
    let mut dz = [c(0.0, 0.0); CHEB_N];
    for j in 0..CHEB_N {
        let u = mid + half * ch.nodes[j];
        z[j] = seg.point(u);
        dz[j] = seg.derivative(u) * half;
    }
    let n = letters.len();
    let mut prev = [c(1.0, 0.0); CHEB_N];
    let mut ends = vec![c(0.0, 0.0); n + 1];
    ends[0] = state[0];
    let mut ok = true;
    // rounding of the node positions limits the attainable relative accuracy
    let mut cond: f64 = 1.0;
    for k in 1..=n {
        let a = letters[k - 1];
        let mut vals = [c(0.0, 0.0); CHEB_N];
        for j in 0..CHEB_N {
            let d = z[j] - a;
            cond = cond.max(z[j].norm().max(a.norm()) / d.norm());
            vals[j] = prev[j] * dz[j] / d;
        }
        if can_split {
            let t1: ComplexValue = (0..CHEB_N).map(|j| vals[j] * ch.tail[0][j]).sum();
            let t2: ComplexValue = (0..CHEB_N).map(|j| vals[j] * ch.tail[1][j]).sum();
            let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(
                ((0..CHEB_N).map(|j| vals[j] * ch.c0[j]).sum::<ComplexValue>()).norm(),
            );
            let floor = tol.max(4.0 * f64::EPSILON * cond);
            if t1.norm() + t2.norm() > floor * scale.max(1e-300) && t1.norm() + t2.norm() > 1e-300 {
                ok = false;
                break;
            }
        }
        let mut next = [c(0.0, 0.0); CHEB_N];
        for (row, nx) in next.iter_mut().enumerate() {
            let s: ComplexValue = (0..CHEB_N).map(|j| vals[j] * ch.integ[row][j]).sum();
            *nx = state[k] + s;
        }
        let tot: ComplexValue = (0..CHEB_N).map(|j| vals[j] * ch.total[j]).sum();
        ends[k] = state[k] + tot;
        prev = next;
    }
    if !ok {
        let m = 0.5 * (u0 + u1);
        panel(seg, u0, m, letters, info, state, tol, depth + 1)?;
        return panel(seg, m, u1, letters, info, state, tol, depth + 1);
    }
    state[1..=n].copy_from_slice(&ends[1..=n]);
    Ok(())
}

/// Word a₁…a_n of a hyperlogarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperlogWord {
    pub a: Vec<ComplexValue>,
}

impl HyperlogWord {
    pub fn new(a: Vec<ComplexValue>) -> Result<Self> {
        if a.is_empty() {
            return Err(PeriodError::InvalidElement("empty hyperlogarithm word".into()));
        }
        check_letters(&a)?;
        Ok(HyperlogWord { a })
    }
}

/// Index word m₁…m_n of a multiple polylogarithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexWord {
    pub m: Vec<u32>,
}

impl IndexWord {
    pub fn new(m: Vec<u32>) -> Result<Self> {
        if m.is_empty() || m.contains(&0) {
            return Err(PeriodError::InvalidElement(format!("index word {m:?}")));
        }
        Ok(IndexWord { m })
    }

    pub fn weight(&self) -> u32 {
        self.m.iter().sum()
    }
}

/// A closed loop in the parameter space moving parameter `param`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLoop {
    pub param: usize,
    pub path: Path,
}

/// Branch selection: a base path from 0 to 1 plus parameter loops traversed
/// (in order) before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub base_path: Path,
    pub loops: Vec<ParamLoop>,
}

impl BranchSpec {
    pub fn new(base_path: Path, loops: Vec<ParamLoop>) -> Result<Self> {
        let tol = 1e-12;
        if base_path.start().norm() > tol || (base_path.end() - c(1.0, 0.0)).norm() > tol {
            return Err(PeriodError::InvalidPath(format!(
                "base path must run from 0 to 1, got {} -> {}",
                fmt_c(base_path.start()),
                fmt_c(base_path.end())
            )));
        }
        for l in &loops {
            if !l.path.is_closed() {
                return Err(PeriodError::InvalidPath("parameter loop is not closed".into()));
            }
        }
        Ok(BranchSpec { base_path, loops })
    }

    /// Straight path 0 → 1 without loops.
    pub fn straight() -> Self {
        BranchSpec {
            base_path: Path::unit_interval(),
            loops: Vec::new(),
        }
    }

    pub fn with_loops(&self, loops: Vec<ParamLoop>) -> Self {
        BranchSpec {
            base_path: self.base_path.clone(),
            loops,
        }
    }

    pub fn describe(&self) -> String {
        let base = if self.base_path == Path::unit_interval() {
            "straight 0->1".to_string()
        } else {
            let pts: Vec<String> = self
                .base_path
                .pieces()
                .iter()
                .map(|s| fmt_c(s.start()))
                .chain(std::iter::once(fmt_c(self.base_path.end())))
                .collect();
            format!("path {}", pts.join(" -> "))
        };
        if self.loops.is_empty() {
            base
        } else {
            let l: Vec<String> = self
                .loops
                .iter()
                .map(|l| format!("loop(param {} from {})", l.param, fmt_c(l.path.start())))
                .collect();
            format!("{base}; {}", l.join(", "))
        }
    }
}

fn admissible(path: &Path, letters: &[ComplexValue], margin: f64) -> bool {
    let pieces = path.pieces();
    let n = letters.len();
    let start = path.start();
    let end = path.end();
    letters.iter().enumerate().all(|(i, &a)| {
        if (a - start).norm() <= LETTER_TOL {
            i > 0
        } else if (a - end).norm() <= LETTER_TOL {
            i + 1 < n
        } else {
            pieces.iter().all(|s| s.nearest(a).0 > margin)
        }
    })
}

/// Principal base path for a word: the straight segment when admissible,
/// otherwise a two-segment detour through 1/2 + h·i (upper detours first).
pub fn principal_path(letters: &[ComplexValue]) -> Result<Path> {
    check_letters(letters)?;
    let straight = Path::unit_interval();
    if admissible(&straight, letters, 1e-9) {
        return Ok(straight);
    }
    for h in [0.5, -0.5, 0.25, -0.25, 1.0, -1.0, 0.1, -0.1, 2.0, -2.0] {
        let p = Path::polyline(&[c(0.0, 0.0), c(0.5, h), c(1.0, 0.0)])?;
        if admissible(&p, letters, 1e-3) {
            return Ok(p);
        }
    }
    Err(PeriodError::SingularOnPath {
        at: "no admissible principal path".into(),
    })
}

pub fn principal_branch(letters: &[ComplexValue]) -> Result<BranchSpec> {
    Ok(BranchSpec {
        base_path: principal_path(letters)?,
        loops: Vec::new(),
    })
}

fn cross(a: ComplexValue, b: ComplexValue) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Crossings of the step u → v with a path piece: (μ on piece, tangent there).
fn step_crossings(piece: &Segment, u: ComplexValue, v: ComplexValue, last: bool) -> Vec<(f64, ComplexValue)> {
    let r = v - u;
    let mut out = Vec::new();
    let mu_ok = |mu: f64| mu >= 0.0 && (mu < 1.0 || (last && mu <= 1.0));
    match *piece {
        Segment::Line { start, end } => {
            let t = end - start;
            let den = cross(r, t);
            if den.abs() <= 1e-300 {
                return out;
            }
            let w = start - u;
            let lam = cross(w, t) / den;
            let mu = cross(w, r) / den;
            if lam > 0.0 && lam <= 1.0 && mu_ok(mu) {
                out.push((mu, t));
            }
        }
        Segment::Arc {
            center,
            radius,
            angle_start,
            angle_end,
        } => {
            let w = u - center;
            let aa = r.norm_sqr();
            if aa == 0.0 {
                return out;
            }
            let bb = 2.0 * (w.conj() * r).re;
            let cc = w.norm_sqr() - radius * radius;
            let disc = bb * bb - 4.0 * aa * cc;
            if disc < 0.0 {
                return out;
            }
            let sq = disc.sqrt();
            let sweep = angle_end - angle_start;
            for lam in [(-bb - sq) / (2.0 * aa), (-bb + sq) / (2.0 * aa)] {
                if !(lam > 0.0 && lam <= 1.0) {
                    continue;
                }
                let p = u + r * lam;
                let phi = (p - center).arg();
                let turns = (sweep.abs() / (2.0 * PI)).ceil() as i64 + 1;
                for k in -turns..=turns {
                    let mu = (phi + 2.0 * PI * k as f64 - angle_start) / sweep;
                    if mu_ok(mu) {
                        out.push((mu, piece.derivative(mu)));
                    }
                }
            }
        }
    }
    out
}

fn segments_intersect(p0: ComplexValue, p1: ComplexValue, q0: ComplexValue, q1: ComplexValue) -> bool {
    let r = p1 - p0;
    let t = q1 - q0;
    let den = cross(r, t);
    if den.abs() <= 1e-300 {
        return false;
    }
    let w = q0 - p0;
    let lam = cross(w, t) / den;
    let mu = cross(w, r) / den;
    (0.0..=1.0).contains(&lam) && (0.0..=1.0).contains(&mu)
}

fn in_triangle(p: ComplexValue, a: ComplexValue, b: ComplexValue, cc: ComplexValue) -> bool {
    let d1 = cross(b - a, p - a);
    let d2 = cross(cc - b, p - b);
    let d3 = cross(a - cc, p - cc);
    let area = cross(b - a, cc - a).abs();
    if area <= 1e-300 {
        return false;
    }
    (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0)
}

fn seg_point_distance(p0: ComplexValue, p1: ComplexValue, z: ComplexValue) -> f64 {
    Segment::line(p0, p1).nearest(z).0
}

#[derive(Debug, Clone)]
struct Lasso {
    piece: usize,
    mu: f64,
    anchor: ComplexValue,
    letter: usize,
    ccw: bool,
}

/// Sweep the parameters around the loops, recording lassos, and return the
/// deformed path (as pieces) for the final letter positions.
fn deform(
    base: &Path,
    params: &[ComplexValue],
    letters_of: &dyn Fn(&[ComplexValue]) -> Vec<ComplexValue>,
    loops: &[ParamLoop],
) -> Result<Vec<Segment>> {
    let base_pieces = base.pieces();
    let mut lassos: Vec<Lasso> = Vec::new();
    let mut p = params.to_vec();
    let mut cur = letters_of(&p);
    check_letters(&cur)?;
    let letter_scale = cur.iter().map(|a| a.norm()).fold(1.0, f64::max);
    for lp in loops {
        if lp.param >= p.len() {
            return Err(PeriodError::UnsupportedContinuation(format!(
                "loop moves parameter {} but only {} exist",
                lp.param,
                p.len()
            )));
        }
        let s = lp.path.start();
        if (s - p[lp.param]).norm() > 1e-10 * p[lp.param].norm().max(1.0) {
            return Err(PeriodError::UnsupportedContinuation(format!(
                "loop starts at {} but parameter {} is {}",
                fmt_c(s),
                lp.param,
                fmt_c(p[lp.param])
            )));
        }
        if !lp.path.is_closed() {
            return Err(PeriodError::InvalidPath("parameter loop is not closed".into()));
        }
        for seg in lp.path.pieces() {
            for k in 1..=SWEEP_STEPS {
                let u = k as f64 / SWEEP_STEPS as f64;
                p[lp.param] = seg.point(u);
                let next = letters_of(&p);
                check_letters(&next)?;
                for i in 0..cur.len() {
                    let (a0, a1) = (cur[i], next[i]);
                    if a0 == a1 {
                        continue;
                    }
                    for j in 0..cur.len() {
                        if j != i
                            && (cur[j] - a0).norm() > LETTER_TOL * letter_scale
                            && seg_point_distance(a0, a1, cur[j]) <= LETTER_TOL * letter_scale
                        {
                            return Err(PeriodError::SingularOnPath {
                                at: format!("letters {i} and {j} collide during continuation"),
                            });
                        }
                    }
                    for l in &lassos {
                        if l.letter == i {
                            for (j, &b) in cur.iter().enumerate() {
                                if j != i
                                    && (b - a0).norm() > LETTER_TOL * letter_scale
                                    && in_triangle(b, l.anchor, a0, a1)
                                {
                                    return Err(PeriodError::UnsupportedContinuation(format!(
                                        "tether of letter {i} sweeps over letter {j}"
                                    )));
                                }
                            }
                        } else {
                            let other = cur[l.letter];
                            if (other - a0).norm() > LETTER_TOL * letter_scale
                                && segments_intersect(a0, a1, l.anchor, other)
                            {
                                return Err(PeriodError::UnsupportedContinuation(format!(
                                    "letter {i} crosses the tether of letter {}",
                                    l.letter
                                )));
                            }
                        }
                    }
                    let npieces = base_pieces.len();
                    for (pi, piece) in base_pieces.iter().enumerate() {
                        for (mu, tangent) in step_crossings(piece, a0, a1, pi + 1 == npieces) {
                            let ccw = (tangent.conj() * (a1 - a0)).im < 0.0;
                            lassos.push(Lasso {
                                piece: pi,
                                mu,
                                anchor: piece.point(mu),
                                letter: i,
                                ccw,
                            });
                        }
                    }
                    cur[i] = a1;
                }
            }
        }
        // snap back to the exact start value of the closed loop
        p[lp.param] = s;
        let snapped = letters_of(&p);
        cur = snapped;
    }
    materialize(&base_pieces, lassos, &cur)
}

fn materialize(base: &[Segment], mut lassos: Vec<Lasso>, letters: &[ComplexValue]) -> Result<Vec<Segment>> {
    // stable by insertion order for equal positions
    lassos.sort_by(|x, y| (x.piece, x.mu).partial_cmp(&(y.piece, y.mu)).unwrap());
    let mut out = Vec::new();
    let mut idx = 0;
    for (pi, piece) in base.iter().enumerate() {
        let mut u = 0.0;
        while idx < lassos.len() && lassos[idx].piece == pi {
            let l = &lassos[idx];
            if l.mu > u {
                out.push(piece.sub(u, l.mu));
            }
            u = l.mu;
            let a = letters[l.letter];
            let others = letters
                .iter()
                .filter(|b| (**b - a).norm() > LETTER_TOL)
                .map(|b| (*b - a).norm())
                .fold(f64::INFINITY, f64::min);
            let d = l.anchor - a;
            let mut r = (0.3 * others).min(0.25);
            if d.norm() > 0.0 {
                r = r.min(0.5 * d.norm());
            }
            if !(r > 0.0) {
                return Err(PeriodError::UnsupportedContinuation(
                    "lasso has no room around its letter".into(),
                ));
            }
            let dir = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
            let p1 = a + dir * r;
            let th = dir.arg();
            let sweep = if l.ccw { 2.0 * PI } else { -2.0 * PI };
            out.push(Segment::line(l.anchor, p1));
            out.push(Segment::arc(a, r, th, th + sweep));
            out.push(Segment::line(p1, l.anchor));
            idx += 1;
        }
        if u < 1.0 {
            out.push(piece.sub(u, 1.0));
        }
    }
    Ok(out)
}

/// Evaluate a parametric word: letters depend on parameters, continued along
/// the branch loops.
pub(crate) fn evaluate_family(
    params: &[ComplexValue],
    letters_of: &dyn Fn(&[ComplexValue]) -> Vec<ComplexValue>,
    branch: &BranchSpec,
    cfg: &QuadratureConfig,
) -> Result<ComplexValue> {
    let letters = letters_of(params);
    let pieces = if branch.loops.is_empty() {
        branch.base_path.pieces()
    } else {
        deform(&branch.base_path, params, letters_of, &branch.loops)?
    };
    iterated_integral(&letters, &pieces, cfg)
}

/// Hyperlogarithm I_n(a₁,…,a_n) along the branch.
pub fn hyperlog(word: &HyperlogWord, branch: &BranchSpec, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    let id = |p: &[ComplexValue]| p.to_vec();
    evaluate_family(&word.a, &id, branch, cfg)
}

/// Hyperlogarithm word and sign representing Li_m(x):
/// Li_{m₁…m_n}(x₁…x_n) = (-1)^n I(a₁, 0^{m₁-1}, …, a_n, 0^{m_n-1}), a_i = 1/(x_i⋯x_n).
pub fn li_letters(m: &IndexWord, x: &[ComplexValue]) -> Vec<ComplexValue> {
    let n = m.m.len();
    let mut out = Vec::new();
    for i in 0..n {
        let prod: ComplexValue = x[i..].iter().product();
        out.push(prod.inv());
        for _ in 1..m.m[i] {
            out.push(c(0.0, 0.0));
        }
    }
    out
}

fn li_sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Multiple polylogarithm via its iterated-integral representation.
pub fn li_via_integral(
    m: &IndexWord,
    x: &[ComplexValue],
    branch: &BranchSpec,
    cfg: &QuadratureConfig,
) -> Result<ComplexValue> {
    if x.len() != m.m.len() {
        return Err(PeriodError::DimensionMismatch {
            expected: m.m.len(),
            got: x.len(),
        });
    }
    check_letters(x)?;
    if x.iter().any(|v| v.norm() == 0.0) {
        if branch.loops.is_empty() {
            return Ok(c(0.0, 0.0));
        }
        return Err(PeriodError::OnSingularDivisor("zero argument with continuation loops".into()));
    }
    let mm = m.clone();
    let f = move |p: &[ComplexValue]| li_letters(&mm, p);
    let v = evaluate_family(x, &f, branch, cfg)?;
    Ok(v * li_sign(m.m.len()))
}

/// Li_{m}(x) on its principal branch.
pub fn li_principal(m: &IndexWord, x: &[ComplexValue], cfg: &QuadratureConfig) -> Result<ComplexValue> {
    if x.iter().any(|v| v.norm() == 0.0) {
        return Ok(c(0.0, 0.0));
    }
    let letters = li_letters(m, x);
    li_via_integral(m, x, &principal_branch(&letters)?, cfg)
}

/// Li₁,₁(x, y). Accepts the boundary xy = 1 (first letter at the path end),
/// where the iterated integral still converges.
pub fn li11(x: ComplexValue, y: ComplexValue, branch: &BranchSpec, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(PeriodError::OnSingularDivisor("x = 0 or y = 0".into()));
    }
    if (y - c(1.0, 0.0)).norm() <= LETTER_TOL {
        return Err(PeriodError::OnSingularDivisor("y = 1".into()));
    }
    li_via_integral(&IndexWord { m: vec![1, 1] }, &[x, y], branch, cfg)
}

/// Li₂(x).
pub fn li2(x: ComplexValue, branch: &BranchSpec, cfg: &QuadratureConfig) -> Result<ComplexValue> {
    li_via_integral(&IndexWord { m: vec![2] }, &[x], branch, cfg)
}

/// Truncated nested series Σ_{0<k₁<…<k_n} Π x_i^{k_i}/k_i^{m_i}.
pub fn li_series(m: &IndexWord, x: &[ComplexValue], tol: f64) -> Result<ComplexValue> {
    let n = m.m.len();
    if x.len() != n {
        return Err(PeriodError::DimensionMismatch { expected: n, got: x.len() });
    }
    check_letters(x)?;
    if !(tol > 0.0) {
        return Err(PeriodError::InvalidConfig(format!("series tolerance {tol}")));
    }
    let radii: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    for (i, &r) in radii.iter().enumerate() {
        if r > 1.0 + 1e-15 {
            return Err(PeriodError::Divergent(format!("|x_{}| = {r} > 1", i + 1)));
        }
    }
    let last = radii[n - 1];
    if (last - 1.0).abs() <= 1e-15 {
        if m.m[n - 1] < 2 {
            return Err(PeriodError::Divergent(format!(
                "|x_{n}| = 1 with m_{n} = 1 (harmonic tail)"
            )));
        }
        if (x[n - 1] - c(1.0, 0.0)).norm() > 1e-15 {
            return Err(PeriodError::Divergent(
                "unit-modulus boundary point other than 1 is not supported by the series engine".into(),
            ));
        }
        if radii[..n - 1].iter().any(|&r| r >= 1.0) {
            return Err(PeriodError::Divergent(
                "only the last coordinate may sit on the unit circle".into(),
            ));
        }
        return li_series_boundary(m, x, tol);
    }
    if radii[..n - 1].iter().any(|&r| r > 1.0) {
        return Err(PeriodError::Divergent("inner coordinate outside the unit disc".into()));
    }
    let cap = 1_000_000usize;
    let mut s = vec![c(0.0, 0.0); n + 1];
    let mut sabs = vec![0.0f64; n + 1];
    s[0] = c(1.0, 0.0);
    sabs[0] = 1.0;
    let mut pw: Vec<ComplexValue> = vec![c(1.0, 0.0); n];
    let mut pwa: Vec<f64> = vec![1.0; n];
    for k in 1..=cap {
        let kf = k as f64;
        for j in (1..=n).rev() {
            pw[j - 1] *= x[j - 1];
            pwa[j - 1] *= radii[j - 1];
            let denom = kf.powi(m.m[j - 1] as i32);
            let prev = s[j - 1];
            s[j] += pw[j - 1] / denom * prev;
            sabs[j] += pwa[j - 1] / denom * sabs[j - 1];
        }
        // bound on the remaining terms: next hyperplane sum over a geometric tail
        let nxt = (kf + 1.0).powi(m.m[n - 1] as i32);
        let bound = pwa[n - 1] * last / nxt * sabs[n - 1] / (1.0 - last);
        if k >= n && bound < tol / 2.0 {
            return Ok(s[n]);
        }
    }
    Err(PeriodError::NonConvergent {
        estimate: fmt_c(s[n]),
        error: f64::NAN,
    })
}

fn partial_sums_at(m: &IndexWord, x: &[ComplexValue], checkpoints: &[usize]) -> Vec<ComplexValue> {
    let n = m.m.len();
    let mut s = vec![c(0.0, 0.0); n + 1];
    s[0] = c(1.0, 0.0);
    let mut pw: Vec<ComplexValue> = vec![c(1.0, 0.0); n];
    let mut out = Vec::with_capacity(checkpoints.len());
    let maxk = *checkpoints.last().unwrap();
    let mut ci = 0;
    // Kahan compensation for the outermost sum
    let mut comp = c(0.0, 0.0);
    for k in 1..=maxk {
        let kf = k as f64;
        for j in (1..=n).rev() {
            pw[j - 1] *= x[j - 1];
            let term = pw[j - 1] / kf.powi(m.m[j - 1] as i32) * s[j - 1];
            if j == n {
                let y = term - comp;
                let t = s[j] + y;
                comp = (t - s[j]) - y;
                s[j] = t;
            } else {
                s[j] += term;
            }
        }
        if ci < checkpoints.len() && k == checkpoints[ci] {
            out.push(s[n]);
            ci += 1;
        }
    }
    out
}

/// Boundary case x_n = 1: Richardson extrapolation of partial sums in 1/N.
fn li_series_boundary(m: &IndexWord, x: &[ComplexValue], tol: f64) -> Result<ComplexValue> {
    let levels = 8;
    let n0 = 2000usize;
    let checkpoints: Vec<usize> = (0..levels).map(|k| n0 << k).collect();
    let sums = partial_sums_at(m, x, &checkpoints);
    let mut table: Vec<Vec<ComplexValue>> = Vec::new();
    let mut best = sums[0];
    let mut best_diff = f64::INFINITY;
    for k in 0..levels {
        let mut row = vec![sums[k]];
        for j in 1..=k {
            let f = 2f64.powi(j as i32);
            let v = row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (f - 1.0);
            row.push(v);
        }
        if k > 0 {
            let diff = (row[k] - table[k - 1][k - 1]).norm();
            if diff < best_diff {
                best_diff = diff;
                best = row[k];
            }
        }
        table.push(row);
    }
    if best_diff <= tol.max(1e-14) {
        Ok(best)
    } else {
        Err(PeriodError::NonConvergent {
            estimate: fmt_c(best),
            error: best_diff,
        })
    }
}

/// Functions whose monodromy is tracked explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolylogFunction {
    /// Li₁(1/a) = -I₁(a); parameters (a).
    Li1Inverse,
    /// Li₂(c) = -I₂(1/c, 0); parameters (c).
    Li2,
    /// Li₁,₁(b/a, 1/b) = I₂(a, b); parameters (a, b).
    Li11Ratio,
}

impl PolylogFunction {
    pub fn arity(&self) -> usize {
        match self {
            PolylogFunction::Li1Inverse | PolylogFunction::Li2 => 1,
            PolylogFunction::Li11Ratio => 2,
        }
    }

    pub fn letters(&self, p: &[ComplexValue]) -> Vec<ComplexValue> {
        match self {
            PolylogFunction::Li1Inverse => vec![p[0]],
            PolylogFunction::Li2 => vec![p[0].inv(), c(0.0, 0.0)],
            PolylogFunction::Li11Ratio => vec![p[0], p[1]],
        }
    }

    pub fn sign(&self) -> f64 {
        match self {
            PolylogFunction::Li11Ratio => 1.0,
            _ => -1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolylogFunction::Li1Inverse => "li1inv",
            PolylogFunction::Li2 => "li2",
            PolylogFunction::Li11Ratio => "li11ratio",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "li1inv" => Ok(PolylogFunction::Li1Inverse),
            "li2" => Ok(PolylogFunction::Li2),
            "li11ratio" => Ok(PolylogFunction::Li11Ratio),
            other => Err(PeriodError::Parse(format!("unknown function {other}"))),
        }
    }

    /// Value at the parameters along the branch.
    pub fn evaluate(&self, params: &[ComplexValue], branch: &BranchSpec, cfg: &QuadratureConfig) -> Result<ComplexValue> {
        if params.len() != self.arity() {
            return Err(PeriodError::DimensionMismatch {
                expected: self.arity(),
                got: params.len(),
            });
        }
        let me = *self;
        let f = move |p: &[ComplexValue]| me.letters(p);
        Ok(evaluate_family(params, &f, branch, cfg)? * self.sign())
    }
}

/// Change of the function's value after continuation along `loop_path`,
/// which moves the first parameter; `held` fixes the remaining ones.
pub fn monodromy_increment(
    function: PolylogFunction,
    loop_path: &Path,
    held: &[ComplexValue],
    cfg: &QuadratureConfig,
) -> Result<ComplexValue> {
    monodromy_increment_loops(function, std::slice::from_ref(loop_path), held, cfg)
}

/// As [`monodromy_increment`], traversing several loops in sequence.
pub fn monodromy_increment_loops(
    function: PolylogFunction,
    loops: &[Path],
    held: &[ComplexValue],
    cfg: &QuadratureConfig,
) -> Result<ComplexValue> {
    if held.len() + 1 != function.arity() {
        return Err(PeriodError::DimensionMismatch {
            expected: function.arity() - 1,
            got: held.len(),
        });
    }
    let first = loops
        .first()
        .ok_or_else(|| PeriodError::InvalidPath("no loop given".into()))?;
    let mut params = vec![first.start()];
    params.extend_from_slice(held);
    let base = principal_path(&function.letters(&params))?;
    let plain = BranchSpec {
        base_path: base,
        loops: Vec::new(),
    };
    let looped = plain.with_loops(
        loops
            .iter()
            .map(|p| ParamLoop {
                param: 0,
                path: p.clone(),
            })
            .collect(),
    );
    let before = function.evaluate(&params, &plain, cfg)?;
    let after = function.evaluate(&params, &looped, cfg)?;
    Ok(after - before)
}
