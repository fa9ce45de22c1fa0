//! Complex values, integration contours and adaptive Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PeriodError, Result};

pub type ComplexValue = Complex64;

/// 2πi.
pub const TWO_PI_I: ComplexValue = Complex64::new(0.0, 2.0 * PI);

/// Endpoint coincidence tolerance for path construction.
pub const ENDPOINT_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> ComplexValue {
    Complex64::new(re, im)
}

pub fn is_finite(z: ComplexValue) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

pub(crate) fn fmt_c(z: ComplexValue) -> String {
    format!("{}{:+}i", z.re, z.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub singular_shrink_levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 20_000,
            singular_shrink_levels: 0,
        }
    }
}

impl QuadratureConfig {
    pub fn new(
        abs_tol: f64,
        rel_tol: f64,
        max_subdivisions: usize,
        singular_shrink_levels: usize,
    ) -> Result<Self> {
        let cfg = QuadratureConfig {
            abs_tol,
            rel_tol,
            max_subdivisions,
            singular_shrink_levels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 1e-15) || !self.abs_tol.is_finite() {
            return Err(PeriodError::InvalidConfig(format!("abs_tol = {}", self.abs_tol)));
        }
        if !(self.rel_tol >= 1e-15) || !self.rel_tol.is_finite() {
            return Err(PeriodError::InvalidConfig(format!("rel_tol = {}", self.rel_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(PeriodError::InvalidConfig("max_subdivisions = 0".into()));
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    pub fn with_shrink_levels(mut self, levels: usize) -> Self {
        self.singular_shrink_levels = levels;
        self
    }
}

// Gauss–Kronrod 10/21 nodes and weights (QUADPACK).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err;
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

struct Panel {
    a: f64,
    b: f64,
    value: ComplexValue,
    error: f64,
    resabs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> ComplexValue>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<ComplexValue> {
        let v = f(x);
        if is_finite(v) {
            Ok(v)
        } else {
            Err(PeriodError::SingularOnPath { at: format!("t = {x}") })
        }
    };
    let fc = eval(center)?;
    let mut res_g = Complex64::new(0.0, 0.0);
    let mut res_k = fc * WGK[10];
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [Complex64::new(0.0, 0.0); 10];
    let mut fv2 = [Complex64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = eval(center - x)?;
        let f2 = eval(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let s = f1 + f2;
        res_k += s * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            res_g += s * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let h = half.abs();
    let value = res_k * half;
    let err = rescale_error(((res_k - res_g) * half).norm(), resabs * h, resasc * h);
    Ok(Panel {
        a,
        b,
        value,
        error: err,
        resabs: resabs * h,
    })
}

/// Adaptive Gauss–Kronrod (10/21) integral of a complex-valued function over [a, b].
pub fn integrate_interval<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<ComplexValue>
where
    F: Fn(f64) -> ComplexValue,
{
    integrate_interval_with_error(f, a, b, cfg).map(|(v, _)| v)
}

/// As [`integrate_interval`], also returning the error estimate.
pub fn integrate_interval_with_error<F>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<(ComplexValue, f64)>
where
    F: Fn(f64) -> ComplexValue,
{
    cfg.validate()?;
    if !a.is_finite() || !b.is_finite() {
        return Err(PeriodError::InvalidConfig("infinite integration bound".into()));
    }
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let first = gk21(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut total_abs = first.resabs;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut count = 1usize;
    let min_width = 4.0 * f64::EPSILON * (a.abs().max(b.abs()).max(1.0));
    loop {
        // below 50·eps·∫|f| the estimate is pure roundoff; bisecting cannot improve it
        let target = cfg
            .abs_tol
            .max(cfg.rel_tol * total.norm())
            .max(100.0 * f64::EPSILON * total_abs);
        if total_err <= target {
            return Ok((total, total_err));
        }
        if count >= cfg.max_subdivisions {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        if (worst.b - worst.a).abs() < min_width {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk21(&f, worst.a, mid)?;
        let right = gk21(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.resabs + right.resabs - worst.resabs;
        heap.push(left);
        heap.push(right);
        count += 1;
        if count % 64 == 0 {
            // resum to limit drift from incremental updates
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
            total_abs = heap.iter().map(|p| p.resabs).sum();
        }
    }
    total = heap.iter().map(|p| p.value).sum();
    total_err = heap.iter().map(|p| p.error).sum();
    total_abs = heap.iter().map(|p| p.resabs).sum();
    if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.norm()).max(100.0 * f64::EPSILON * total_abs) {
        return Ok((total, total_err));
    }
    Err(PeriodError::NonConvergent {
        estimate: fmt_c(total),
        error: total_err,
    })
}

/// One piece of a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line {
        start: ComplexValue,
        end: ComplexValue,
    },
    Arc {
        center: ComplexValue,
        radius: f64,
        angle_start: f64,
        angle_end: f64,
    },
}

impl Segment {
    pub fn line(start: ComplexValue, end: ComplexValue) -> Self {
        Segment::Line { start, end }
    }

    pub fn arc(center: ComplexValue, radius: f64, angle_start: f64, angle_end: f64) -> Self {
        Segment::Arc {
            center,
            radius,
            angle_start,
            angle_end,
        }
    }

    /// Point at local parameter u ∈ [0, 1].
    pub fn point(&self, u: f64) -> ComplexValue {
        match *self {
            Segment::Line { start, end } => start + (end - start) * u,
            Segment::Arc {
                center,
                radius,
                angle_start,
                angle_end,
            } => {
                let th = angle_start + (angle_end - angle_start) * u;
                center + Complex64::from_polar(radius, th)
            }
        }
    }

    /// dz/du.
    pub fn derivative(&self, u: f64) -> ComplexValue {
        match *self {
            Segment::Line { start, end } => end - start,
            Segment::Arc {
                radius,
                angle_start,
                angle_end,
                ..
            } => {
                let sweep = angle_end - angle_start;
                let th = angle_start + sweep * u;
                Complex64::new(0.0, sweep) * Complex64::from_polar(radius, th)
            }
        }
    }

    pub fn start(&self) -> ComplexValue {
        self.point(0.0)
    }

    pub fn end(&self) -> ComplexValue {
        match *self {
            Segment::Line { end, .. } => end,
            _ => self.point(1.0),
        }
    }

    pub fn reversed(&self) -> Segment {
        match *self {
            Segment::Line { start, end } => Segment::Line { start: end, end: start },
            Segment::Arc {
                center,
                radius,
                angle_start,
                angle_end,
            } => Segment::Arc {
                center,
                radius,
                angle_start: angle_end,
                angle_end: angle_start,
            },
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => (end - start).norm(),
            Segment::Arc {
                radius,
                angle_start,
                angle_end,
                ..
            } => radius * (angle_end - angle_start).abs(),
        }
    }

    /// Restriction to the local parameter range [u0, u1].
    pub fn sub(&self, u0: f64, u1: f64) -> Segment {
        match *self {
            Segment::Line { .. } => Segment::Line {
                start: self.point(u0),
                end: self.point(u1),
            },
            Segment::Arc {
                center,
                radius,
                angle_start,
                angle_end,
            } => {
                let sweep = angle_end - angle_start;
                Segment::Arc {
                    center,
                    radius,
                    angle_start: angle_start + sweep * u0,
                    angle_end: angle_start + sweep * u1,
                }
            }
        }
    }

    /// Distance from z to the trace, with the local parameter of the nearest point.
    pub fn nearest(&self, z: ComplexValue) -> (f64, f64) {
        match *self {
            Segment::Line { start, end } => {
                let d = end - start;
                let len2 = d.norm_sqr();
                let u = if len2 == 0.0 {
                    0.0
                } else {
                    (((z - start) * d.conj()).re / len2).clamp(0.0, 1.0)
                };
                ((z - self.point(u)).norm(), u)
            }
            Segment::Arc {
                center,
                radius,
                angle_start,
                angle_end,
            } => {
                let sweep = angle_end - angle_start;
                let w = z - center;
                let mut best = {
                    let d0 = (z - self.point(0.0)).norm();
                    let d1 = (z - self.point(1.0)).norm();
                    if d0 <= d1 {
                        (d0, 0.0)
                    } else {
                        (d1, 1.0)
                    }
                };
                if w.norm() > 0.0 {
                    let th = w.arg();
                    let turns = (sweep.abs() / (2.0 * PI)).ceil() as i64 + 1;
                    for k in -turns..=turns {
                        let cand = th + 2.0 * PI * k as f64;
                        let u = (cand - angle_start) / sweep;
                        if (0.0..=1.0).contains(&u) {
                            let d = (w.norm() - radius).abs();
                            if d < best.0 {
                                best = (d, u);
                            }
                        }
                    }
                } else {
                    best = (radius, 0.0);
                }
                best
            }
        }
    }
}

/// A piecewise contour of line segments and circular arcs.
///
/// Reversal is recorded as a flag so that integrals over a reversed path are
/// the exact negation of the forward integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    segments: Vec<Segment>,
    #[serde(default)]
    reversed: bool,
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(PeriodError::InvalidPath("empty path".into()));
        }
        for s in &segments {
            match *s {
                Segment::Arc {
                    center,
                    radius,
                    angle_start,
                    angle_end,
                } => {
                    if !(radius > 0.0) || !radius.is_finite() {
                        return Err(PeriodError::InvalidPath(format!("arc radius {radius}")));
                    }
                    if !is_finite(center) || !angle_start.is_finite() || !angle_end.is_finite() {
                        return Err(PeriodError::InvalidPath("non-finite arc data".into()));
                    }
                }
                Segment::Line { start, end } => {
                    if !is_finite(start) || !is_finite(end) {
                        return Err(PeriodError::InvalidPath("non-finite segment endpoint".into()));
                    }
                }
            }
        }
        for w in segments.windows(2) {
            let (e, s) = (w[0].end(), w[1].start());
            if (e - s).norm() > ENDPOINT_TOL * e.norm().max(1.0) {
                return Err(PeriodError::EndpointMismatch(format!(
                    "{} vs {}",
                    fmt_c(e),
                    fmt_c(s)
                )));
            }
        }
        Ok(Path {
            segments,
            reversed: false,
        })
    }

    pub fn segment(start: ComplexValue, end: ComplexValue) -> Self {
        Path {
            segments: vec![Segment::line(start, end)],
            reversed: false,
        }
    }

    /// Polyline through the given vertices.
    pub fn polyline(points: &[ComplexValue]) -> Result<Self> {
        if points.len() < 2 {
            return Err(PeriodError::InvalidPath("polyline needs two points".into()));
        }
        Path::new(points.windows(2).map(|w| Segment::line(w[0], w[1])).collect())
    }

    /// Straight path from 0 to 1.
    pub fn unit_interval() -> Self {
        Path::segment(c(0.0, 0.0), c(1.0, 0.0))
    }

    /// Stored (unoriented) segments.
    pub fn raw_segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Segments in traversal order.
    pub fn pieces(&self) -> Vec<Segment> {
        if self.reversed {
            self.segments.iter().rev().map(|s| s.reversed()).collect()
        } else {
            self.segments.clone()
        }
    }

    pub fn start(&self) -> ComplexValue {
        if self.reversed {
            self.segments.last().unwrap().end()
        } else {
            self.segments[0].start()
        }
    }

    pub fn end(&self) -> ComplexValue {
        if self.reversed {
            self.segments[0].start()
        } else {
            self.segments.last().unwrap().end()
        }
    }

    pub fn is_closed(&self) -> bool {
        (self.start() - self.end()).norm() <= ENDPOINT_TOL * self.start().norm().max(1.0)
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// Minimal distance from z to the trace.
    pub fn distance_to(&self, z: ComplexValue) -> f64 {
        self.segments
            .iter()
            .map(|s| s.nearest(z).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Each segment split into k pieces of equal parameter length.
    pub fn subdivided(&self, k: usize) -> Path {
        let k = k.max(1);
        let mut segs = Vec::with_capacity(self.segments.len() * k);
        for s in &self.segments {
            for j in 0..k {
                segs.push(s.sub(j as f64 / k as f64, (j + 1) as f64 / k as f64));
            }
        }
        Path {
            segments: segs,
            reversed: self.reversed,
        }
    }

    /// Translate every point by w.
    pub fn translated(&self, w: ComplexValue) -> Path {
        let segments = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Line { start, end } => Segment::line(start + w, end + w),
                Segment::Arc {
                    center,
                    radius,
                    angle_start,
                    angle_end,
                } => Segment::arc(center + w, radius, angle_start, angle_end),
            })
            .collect();
        Path {
            segments,
            reversed: self.reversed,
        }
    }
}

/// Closed single-arc loop starting at center + radius.
pub fn make_loop(center: ComplexValue, radius: f64, counterclockwise: bool) -> Result<Path> {
    let sweep = if counterclockwise { 2.0 * PI } else { -2.0 * PI };
    Path::new(vec![Segment::arc(center, radius, 0.0, sweep)])
}

/// Trace concatenation p then q.
pub fn concat(p: &Path, q: &Path) -> Result<Path> {
    let mut segs = p.pieces();
    segs.extend(q.pieces());
    let (e, s) = (p.end(), q.start());
    if (e - s).norm() > ENDPOINT_TOL * e.norm().max(1.0) {
        return Err(PeriodError::EndpointMismatch(format!("{} vs {}", fmt_c(e), fmt_c(s))));
    }
    Path::new(segs)
}

/// Orientation reversal.
pub fn reverse(p: &Path) -> Path {
    Path {
        segments: p.segments.clone(),
        reversed: !p.reversed,
    }
}

/// ∫_path g(z) dz.
pub fn integrate_path<G>(g: G, path: &Path, cfg: &QuadratureConfig) -> Result<ComplexValue>
where
    G: Fn(ComplexValue) -> ComplexValue,
{
    cfg.validate()?;
    let n = path.segments.len() as f64;
    let seg_cfg = QuadratureConfig {
        abs_tol: (cfg.abs_tol / n).max(1e-15),
        ..*cfg
    };
    let mut total = Complex64::new(0.0, 0.0);
    for s in &path.segments {
        let v = integrate_interval(|u| g(s.point(u)) * s.derivative(u), 0.0, 1.0, &seg_cfg)
            .map_err(|e| match e {
                PeriodError::SingularOnPath { at } => PeriodError::SingularOnPath {
                    at: format!("segment parameter {at}"),
                },
                other => other,
            })?;
        total += v;
    }
    Ok(if path.reversed { -total } else { total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_reproduces_polynomials() {
        let cfg = QuadratureConfig::default();
        let v = integrate_interval(|t| c(t.powi(7), 0.0), 0.0, 2.0, &cfg).unwrap();
        assert!((v.re - 32.0).abs() < 1e-12);
    }

    #[test]
    fn ln2() {
        let cfg = QuadratureConfig::default();
        let v = integrate_interval(|t| c(1.0 / t, 0.0), 1.0, 2.0, &cfg).unwrap();
        assert!((v.re - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn sqrt_endpoint_needs_subdivision() {
        let cfg = QuadratureConfig::default().with_tol(1e-11);
        let v = integrate_interval(|t| c((1.0 - t * t).max(0.0).sqrt(), 0.0), -1.0, 1.0, &cfg)
            .unwrap();
        assert!((v.re - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn nan_integrand_is_reported() {
        let cfg = QuadratureConfig::default();
        let r = integrate_interval(|_| c(f64::NAN, 0.0), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(PeriodError::SingularOnPath { .. })));
    }

    #[test]
    fn exhausted_subdivisions() {
        let cfg = QuadratureConfig::new(1e-15, 1e-15, 3, 0).unwrap();
        let r = integrate_interval(|t| c(t.abs().sqrt().recip(), 0.0), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(PeriodError::NonConvergent { .. })));
    }

    #[test]
    fn invalid_config() {
        assert!(QuadratureConfig::new(1e-16, 1e-10, 10, 0).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-10, 0, 0).is_err());
    }

    #[test]
    fn arc_nearest() {
        let s = Segment::arc(c(0.0, 0.0), 1.0, 0.0, PI);
        let (d, u) = s.nearest(c(0.0, 2.0));
        assert!((d - 1.0).abs() < 1e-15 && (u - 0.5).abs() < 1e-15);
        let (d, _) = s.nearest(c(0.0, -2.0));
        assert!((d - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn path_validation() {
        assert!(Path::new(vec![]).is_err());
        assert!(Path::new(vec![Segment::arc(c(0.0, 0.0), 0.0, 0.0, 1.0)]).is_err());
        let r = Path::new(vec![
            Segment::line(c(0.0, 0.0), c(1.0, 0.0)),
            Segment::line(c(1.0, 1e-9), c(2.0, 0.0)),
        ]);
        assert!(matches!(r, Err(PeriodError::EndpointMismatch(_))));
    }
}
