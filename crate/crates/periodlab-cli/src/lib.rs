//! Command-line front end. Every handler records the library operations it
//! calls, so the registry below can be checked against actual dispatch.

use std::collections::BTreeSet;
use std::fs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use periodlab::derham::{
    basis_punctured_line, basis_quadric, parse_points, reduce_punctured_line, reduce_quadric, PuncturedLinePair,
    QuadricFormJson, QuadricRing, RelativeElementJson,
};
use periodlab::elliptic::{
    eisenstein, lattice_json, periods_from_curve, reduce_tau, tau_invariant, unimodular_change, wp, wp_prime,
    EllipticCurveQ, Lattice, DEFAULT_CUTOFF,
};
use periodlab::exact::{fmt_q, parse_q};
use periodlab::hodge::{
    build_vmhs, default_t_sequence, exact_matrix_punctured_line, exp_two_pi_i, monodromy_from_continuation,
    monodromy_logarithm, t_a1, t_origin, triple_coproduct, verify_exact_matrix, ExactMatrixJson, LimitStep,
};
use periodlab::numerics::{c, concat, make_loop, reverse, ComplexValue, Path, QuadratureConfig};
use periodlab::periods::{
    det_shape_check, dlog_principal_branch, homology_cycles_punctured_line, period_matrix_dlog,
    period_matrix_punctured_line, period_quadric,
};
use periodlab::polylog::{
    hyperlog, li11, li2, li_letters, li_series, li_via_integral, monodromy_increment, principal_branch, BranchSpec,
    HyperlogWord, IndexWord, ParamLoop, PolylogFunction,
};
use periodlab::semialg::{naive_period_report, product_region, FormJson, RegionJson};
use periodlab::PeriodError;

pub const SCHEMA_VERSION: &str = "v1";
pub const TOL_ENV: &str = "PERIODLAB_TOL";

/// Library operation → the one subcommand that reaches it.
pub const REGISTRY: &[(&str, &str)] = &[
    ("numerics.integrate_interval", "naive"),
    ("numerics.integrate_path", "periods punctured-line"),
    ("numerics.make_loop", "monodromy increment"),
    ("numerics.concat", "monodromy increment"),
    ("numerics.reverse", "monodromy increment"),
    ("semialg.contains", "naive"),
    ("semialg.naive_period", "naive"),
    ("semialg.product_region", "naive"),
    ("polylog.li_series", "polylog"),
    ("polylog.li_via_integral", "polylog"),
    ("polylog.li2", "polylog"),
    ("polylog.li11", "polylog"),
    ("polylog.hyperlog", "hyperlog"),
    ("polylog.monodromy_increment", "monodromy increment"),
    ("derham.basis_punctured_line", "reduce"),
    ("derham.reduce_punctured_line", "reduce"),
    ("derham.basis_quadric", "reduce"),
    ("derham.reduce_quadric", "reduce"),
    ("periods.homology_cycles_punctured_line", "periods punctured-line"),
    ("periods.period_matrix_punctured_line", "periods punctured-line"),
    ("periods.det_shape_check", "periods punctured-line"),
    ("periods.period_quadric", "periods quadric"),
    ("periods.period_matrix_dlog", "periods dlog"),
    ("hodge.triple_coproduct", "coproduct"),
    ("hodge.monodromy_logarithm", "monodromy log"),
    ("hodge.monodromy_from_continuation", "monodromy continuation"),
    ("hodge.build_vmhs", "limit-mhs"),
    ("hodge.limit_mhs", "limit-mhs"),
    ("hodge.limit_period_matrix", "limit-mhs"),
    ("elliptic.eisenstein", "elliptic"),
    ("elliptic.wp", "elliptic"),
    ("elliptic.wp_prime", "elliptic"),
    ("elliptic.periods_from_curve", "elliptic"),
    ("elliptic.tau_invariant", "elliptic"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "periodlab", version, about = "Numerical and exact periods")]
pub struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Absolute quadrature tolerance (overrides PERIODLAB_TOL)
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Relative quadrature tolerance
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    /// Maximum number of adaptive subdivisions
    #[arg(long, global = true)]
    pub max_subdivisions: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Naïve period ∫_G ω over a semi-algebraic region
    Naive(NaiveArgs),
    /// Multiple polylogarithm Li_m(x)
    Polylog(PolylogArgs),
    /// Hyperlogarithm I(a₁,…,a_n) along a polyline from 0 to 1
    Hyperlog(HyperlogArgs),
    /// Monodromy of polylogarithms and of the dlog period matrix
    #[command(subcommand)]
    Monodromy(MonodromyCmd),
    /// Reduce a form to cohomology coordinates
    Reduce(ReduceArgs),
    /// Period matrices
    #[command(subcommand)]
    Periods(PeriodsCmd),
    /// Triple coproduct of an entry of an exact period matrix
    Coproduct(CoproductArgs),
    /// Limit mixed Hodge structure of the dlog family
    LimitMhs(LimitArgs),
    /// Lattices, Eisenstein series, ℘ and curve periods
    Elliptic(EllipticArgs),
}

#[derive(Debug, Args)]
pub struct NaiveArgs {
    /// Region JSON file {vars, tree, box, orientation}
    #[arg(long)]
    pub region: String,
    /// Form JSON file {vars, num, den}
    #[arg(long)]
    pub form: Option<String>,
    /// Second factor for a product region
    #[arg(long, requires = "times_form")]
    pub times_region: Option<String>,
    #[arg(long, requires = "times_region")]
    pub times_form: Option<String>,
    /// Shrink levels for forms with poles on the boundary (0 = proper mode)
    #[arg(long, default_value_t = 0)]
    pub shrink: usize,
    /// Only test membership of this comma-separated point
    #[arg(long, allow_hyphen_values = true)]
    pub contains: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LiMethod {
    Integral,
    Series,
}

#[derive(Debug, Args)]
pub struct PolylogArgs {
    /// Index word, e.g. 1,1
    #[arg(long)]
    pub index: String,
    /// Arguments, comma-separated complex numbers
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, value_enum, default_value = "integral")]
    pub method: LiMethod,
    /// Truncation tolerance for the series
    #[arg(long, default_value_t = 1e-15)]
    pub series_tol: f64,
}

#[derive(Debug, Args)]
pub struct HyperlogArgs {
    /// Letters a₁,…,a_n
    #[arg(long, allow_hyphen_values = true)]
    pub word: String,
    /// Intermediate polyline vertices between 0 and 1 (default: principal path)
    #[arg(long, allow_hyphen_values = true)]
    pub via: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum MonodromyCmd {
    /// Change of Li₁(1/a), Li₂(c) or Li₁,₁(b/a,1/b) around a loop in the first parameter
    Increment(IncrementArgs),
    /// Continue the dlog period matrix around a loop and recognize T
    Continuation(ContinuationArgs),
    /// Logarithm N of a local monodromy matrix
    Log(LogArgs),
}

#[derive(Debug, Args)]
pub struct IncrementArgs {
    /// li1inv, li2 or li11ratio
    #[arg(long)]
    pub function: String,
    #[arg(long, allow_hyphen_values = true)]
    pub center: String,
    #[arg(long)]
    pub radius: f64,
    /// Remaining parameters, held fixed
    #[arg(long, allow_hyphen_values = true)]
    pub held: Option<String>,
    /// Number of traversals
    #[arg(long, default_value_t = 1)]
    pub times: usize,
    #[arg(long)]
    pub clockwise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct ContinuationArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// Parameter moved by the loop; the loop starts at its value
    #[arg(long, value_enum)]
    pub param: Param,
    #[arg(long, allow_hyphen_values = true)]
    pub center: String,
    #[arg(long)]
    pub clockwise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Divisor {
    A1,
    Origin,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    #[arg(long, value_enum)]
    pub at: Divisor,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Divisor points of the punctured line, e.g. 1,2
    #[arg(long, allow_hyphen_values = true, conflicts_with = "quadric")]
    pub points: Option<String>,
    /// Conic x² a + y² b = 1 given as a,b
    #[arg(long, allow_hyphen_values = true)]
    pub quadric: Option<String>,
    /// Element as inline JSON, or @file
    #[arg(long)]
    pub element: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum PeriodsCmd {
    /// Period matrix of (G_m, D) in the cycles × forms layout
    PuncturedLine(PuncturedArgs),
    /// Period of y dx on the conic ax² + by² = 1
    Quadric(QuadricArgs),
    /// The 4×4 dlog period matrix at (a, b)
    Dlog(DlogArgs),
}

#[derive(Debug, Args)]
pub struct PuncturedArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "alpha")]
    pub beta: Option<String>,
    /// Explicit divisor points (instead of 1, α, β)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "alpha")]
    pub points: Option<String>,
    /// Also recognize (det P/(2πi)ⁿ)² as a rational
    #[arg(long)]
    pub shape: Option<i32>,
}

#[derive(Debug, Args)]
pub struct QuadricArgs {
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
}

#[derive(Debug, Args)]
pub struct DlogArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
}

#[derive(Debug, Args)]
pub struct CoproductArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "alpha")]
    pub beta: Option<String>,
    /// Exact matrix JSON file {atoms, entries, numeric}
    #[arg(long, conflicts_with = "alpha")]
    pub matrix: Option<String>,
    /// Entry i,j (cycles × forms)
    #[arg(long)]
    pub entry: String,
    /// Power of 2πi in the normalization P/(2πi)ⁿ
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub n: i32,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// Base point a of the variation
    #[arg(long, allow_hyphen_values = true, default_value = "2")]
    pub a: String,
    /// Comma-separated limit steps: a1 or a1,origin
    #[arg(long, default_value = "a1")]
    pub steps: String,
    /// Local-coordinate sequence t
    #[arg(long)]
    pub t: Option<String>,
}

#[derive(Debug, Args)]
pub struct EllipticArgs {
    #[arg(long, allow_hyphen_values = true, requires = "omega2", conflicts_with = "g4")]
    pub omega1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega2: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "g6")]
    pub g4: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub g6: Option<String>,
    /// Evaluate ℘ and ℘′ here (lattice input only)
    #[arg(long, allow_hyphen_values = true, requires = "omega1")]
    pub z: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(PeriodError),
}

impl From<PeriodError> for CliError {
    fn from(e: PeriodError) -> Self {
        match e {
            PeriodError::Parse(m) | PeriodError::InvalidConfig(m) => CliError::Usage(m),
            e => CliError::Domain(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    /// library operations the handler called
    pub ops: BTreeSet<&'static str>,
    /// registry name of the subcommand, when parsing succeeded
    pub subcommand: Option<&'static str>,
}

struct Ctx {
    cfg: QuadratureConfig,
    ops: BTreeSet<&'static str>,
}

impl Ctx {
    fn op(&mut self, name: &'static str) {
        self.ops.insert(name);
    }
}

// ---------------------------------------------------------------------------
// parsing helpers

pub fn parse_complex(s: &str) -> CliResult<ComplexValue> {
    let t: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    let bad = || CliError::Usage(format!("cannot parse complex number '{s}'"));
    if t.is_empty() {
        return Err(bad());
    }
    let num = |x: &str| -> CliResult<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    let Some(body) = t.strip_suffix('i') else {
        return Ok(c(t.parse::<f64>().map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(c(body[..k].parse::<f64>().map_err(|_| bad())?, num(&body[k..])?)),
        None => Ok(c(0.0, num(body)?)),
    }
}

fn parse_complex_list(s: &str) -> CliResult<Vec<ComplexValue>> {
    s.split(',').map(parse_complex).collect()
}

fn parse_f64_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse number '{x}'"))))
        .collect()
}

fn read_text(arg: &str) -> CliResult<String> {
    fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("cannot read {arg}: {e}")))
}

fn read_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid {what} JSON: {e}")))
}

fn cjson(z: ComplexValue) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn punctured_pair(alpha: &Option<String>, beta: &Option<String>, points: &Option<String>) -> CliResult<PuncturedLinePair> {
    let pts = match (alpha, points) {
        (Some(a), _) => {
            let mut v = vec![parse_q("1")?, parse_q(a)?];
            if let Some(b) = beta {
                v.push(parse_q(b)?);
            }
            v
        }
        (None, Some(p)) => parse_points(p)?,
        (None, None) => return Err(CliError::Usage("give --alpha [--beta] or --points".into())),
    };
    Ok(PuncturedLinePair::standard(pts)?)
}

// ---------------------------------------------------------------------------
// handlers

fn naive(a: &NaiveArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let rj: RegionJson = read_json(&read_text(&a.region)?, "region")?;
    let region = rj.to_region()?;
    if let Some(p) = &a.contains {
        ctx.op("semialg.contains");
        let parts: Vec<&str> = p.split(',').collect();
        let exact: Option<Vec<_>> = parts.iter().map(|s| parse_q(s).ok()).collect();
        let inside = match exact {
            Some(x) => region.set.contains_exact(&x)?,
            None => region.set.contains(&parse_f64_list(p)?)?,
        };
        return Ok(json!({"contains": inside, "point": parts, "vars": rj.vars}));
    }
    let fpath = a.form.as_ref().ok_or_else(|| CliError::Usage("--form is required unless --contains is given".into()))?;
    let form = read_json::<FormJson>(&read_text(fpath)?, "form")?.to_form()?;
    let (region, form) = match (&a.times_region, &a.times_form) {
        (Some(r2), Some(f2)) => {
            ctx.op("semialg.product_region");
            let g2 = read_json::<RegionJson>(&read_text(r2)?, "region")?.to_region()?;
            let w2 = read_json::<FormJson>(&read_text(f2)?, "form")?.to_form()?;
            product_region(&region, &form, &g2, &w2)?
        }
        _ => (region, form),
    };
    ctx.op("semialg.naive_period");
    ctx.op("numerics.integrate_interval");
    let cfg = ctx.cfg.with_shrink_levels(a.shrink);
    let rep = naive_period_report(&region, &form, &cfg)?;
    let mut out = json!({
        "value": cjson(rep.value),
        "error": rep.error,
        "tol": cfg.abs_tol,
        "dimension": region.dimension,
        "mode": if a.shrink == 0 { "proper" } else { "improper" },
    });
    if a.shrink > 0 {
        out["levels"] = json!(rep
            .levels
            .iter()
            .map(|(e, v)| json!({"eps": e, "value": cjson(*v)}))
            .collect::<Vec<_>>());
        out["extrapolated"] = json!(rep.extrapolated.iter().map(|v| cjson(*v)).collect::<Vec<_>>());
        out["residuals"] = json!(rep.residuals);
    }
    Ok(out)
}

fn polylog(a: &PolylogArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let m: Vec<u32> = a
        .index
        .split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| CliError::Usage(format!("bad index '{s}'"))))
        .collect::<CliResult<_>>()?;
    let word = IndexWord::new(m.clone())?;
    let x = parse_complex_list(&a.x)?;
    let (value, branch) = match a.method {
        LiMethod::Series => {
            ctx.op("polylog.li_series");
            (li_series(&word, &x, a.series_tol)?, "series".to_string())
        }
        LiMethod::Integral => {
            if x.len() != m.len() {
                return Err(CliError::Domain(PeriodError::DimensionMismatch {
                    expected: m.len(),
                    got: x.len(),
                }));
            }
            let br = principal_branch(&li_letters(&word, &x))?;
            let v = match m.as_slice() {
                [2] => {
                    ctx.op("polylog.li2");
                    li2(x[0], &br, &ctx.cfg)?
                }
                [1, 1] => {
                    ctx.op("polylog.li11");
                    li11(x[0], x[1], &br, &ctx.cfg)?
                }
                _ => {
                    ctx.op("polylog.li_via_integral");
                    li_via_integral(&word, &x, &br, &ctx.cfg)?
                }
            };
            (v, br.describe())
        }
    };
    Ok(json!({
        "index": m,
        "x": x.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
        "value": cjson(value),
        "branch": branch,
        "tol": ctx.cfg.abs_tol,
    }))
}

fn hyperlog_cmd(a: &HyperlogArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let letters = parse_complex_list(&a.word)?;
    let word = HyperlogWord::new(letters.clone())?;
    let branch = match &a.via {
        Some(v) => {
            let mut pts = vec![c(0.0, 0.0)];
            pts.extend(parse_complex_list(v)?);
            pts.push(c(1.0, 0.0));
            BranchSpec::new(Path::polyline(&pts)?, vec![])?
        }
        None => principal_branch(&letters)?,
    };
    ctx.op("polylog.hyperlog");
    let v = hyperlog(&word, &branch, &ctx.cfg)?;
    Ok(json!({
        "word": letters.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
        "value": cjson(v),
        "branch": branch.describe(),
        "tol": ctx.cfg.abs_tol,
    }))
}

fn monodromy(cmd: &MonodromyCmd, ctx: &mut Ctx) -> CliResult<Value> {
    match cmd {
        MonodromyCmd::Increment(a) => {
            let f = PolylogFunction::parse(&a.function)?;
            let center = parse_complex(&a.center)?;
            let held = match &a.held {
                Some(h) => parse_complex_list(h)?,
                None => vec![],
            };
            if a.times == 0 {
                return Err(CliError::Usage("--times must be positive".into()));
            }
            ctx.op("numerics.make_loop");
            let mut one = make_loop(center, a.radius, true)?;
            if a.clockwise {
                ctx.op("numerics.reverse");
                one = reverse(&one);
            }
            let mut path = one.clone();
            for _ in 1..a.times {
                ctx.op("numerics.concat");
                path = concat(&path, &one)?;
            }
            ctx.op("polylog.monodromy_increment");
            let d = monodromy_increment(f, &path, &held, &ctx.cfg)?;
            Ok(json!({
                "function": f.name(),
                "start": cjson(path.start()),
                "held": held.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
                "increment": cjson(d),
                "tol": ctx.cfg.abs_tol,
            }))
        }
        MonodromyCmd::Continuation(a) => {
            let (pa, pb) = (parse_complex(&a.a)?, parse_complex(&a.b)?);
            let center = parse_complex(&a.center)?;
            let (idx, start) = match a.param {
                Param::A => (0, pa),
                Param::B => (1, pb),
            };
            let radius = (start - center).norm();
            let arg = (start - center).arg();
            let sweep = if a.clockwise { -2.0 } else { 2.0 } * std::f64::consts::PI;
            let path = Path::new(vec![periodlab::numerics::Segment::arc(center, radius, arg, arg + sweep)])?;
            ctx.op("hodge.monodromy_from_continuation");
            let chk = monodromy_from_continuation(pa, pb, &ParamLoop { param: idx, path }, &ctx.cfg)?;
            Ok(json!({
                "base": chk.base.to_json(),
                "continued": chk.continued.to_json(),
                "monodromy": chk.monodromy.to_json(),
                "residual": chk.residual,
            }))
        }
        MonodromyCmd::Log(a) => {
            let t = match a.at {
                Divisor::A1 => t_a1(),
                Divisor::Origin => t_origin(),
            };
            ctx.op("hodge.monodromy_logarithm");
            let n = monodromy_logarithm(&t)?;
            let back = exp_two_pi_i(&n)?;
            Ok(json!({
                "T": t.to_json(),
                "N": n.to_json(),
                "round_trip": back == t.entries,
            }))
        }
    }
}

fn reduce(a: &ReduceArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let element_text = match &a.element {
        Some(e) if e.starts_with('@') => Some(read_text(&e[1..])?),
        Some(e) => Some(e.clone()),
        None => None,
    };
    if let Some(q) = &a.quadric {
        let ab: Vec<&str> = q.split(',').collect();
        if ab.len() != 2 {
            return Err(CliError::Usage("--quadric expects a,b".into()));
        }
        let ring = QuadricRing::new(parse_q(ab[0])?, parse_q(ab[1])?)?;
        ctx.op("derham.basis_quadric");
        let basis = basis_quadric(&ring);
        let mut out = json!({"basis": basis.labels, "variety": format!("{}x^2 + {}y^2 = 1", ab[0], ab[1])});
        if let Some(t) = element_text {
            let form = read_json::<QuadricFormJson>(&t, "element")?.to_form()?;
            ctx.op("derham.reduce_quadric");
            let r = reduce_quadric(&ring, &form)?;
            out["coordinates"] = r.to_json();
            out["zero"] = json!(r.is_zero());
        }
        return Ok(out);
    }
    let pair = punctured_pair(&None, &None, &a.points)?;
    ctx.op("derham.basis_punctured_line");
    let basis = basis_punctured_line(&pair)?;
    let mut out = json!({
        "basis": basis.labels,
        "divisor": pair.divisor_points.iter().map(fmt_q).collect::<Vec<_>>(),
    });
    if let Some(t) = element_text {
        let e = read_json::<RelativeElementJson>(&t, "element")?.to_element(pair.m())?;
        ctx.op("derham.reduce_punctured_line");
        let r = reduce_punctured_line(&pair, &e)?;
        out["coordinates"] = r.to_json();
        out["zero"] = json!(r.is_zero());
    }
    Ok(out)
}

fn periods(cmd: &PeriodsCmd, ctx: &mut Ctx) -> CliResult<Value> {
    match cmd {
        PeriodsCmd::PuncturedLine(a) => {
            let pair = punctured_pair(&a.alpha, &a.beta, &a.points)?;
            ctx.op("periods.homology_cycles_punctured_line");
            let cycles = homology_cycles_punctured_line(&pair)?;
            ctx.op("periods.period_matrix_punctured_line");
            ctx.op("numerics.integrate_path");
            let p = period_matrix_punctured_line(&pair, &ctx.cfg)?.transposed();
            let det = p.det()?;
            let mut out = json!({
                "layout": "cycles x forms",
                "cycles": cycles.iter().map(|g| g.label.clone()).collect::<Vec<_>>(),
                "matrix": p.to_json(),
                "det": cjson(det),
            });
            if let Some(n) = a.shape {
                ctx.op("periods.det_shape_check");
                let s = det_shape_check(&p, n)?;
                out["shape"] = json!({"n": n, "candidate": fmt_q(&s.candidate), "value": cjson(s.value), "residual": s.residual});
            }
            Ok(out)
        }
        PeriodsCmd::Quadric(a) => {
            let ring = QuadricRing::new(parse_q(&a.a)?, parse_q(&a.b)?)?;
            ctx.op("periods.period_quadric");
            let v = period_quadric(&ring, &ctx.cfg)?;
            Ok(json!({"a": a.a, "b": a.b, "form": "y dx", "value": cjson(v), "tol": ctx.cfg.abs_tol}))
        }
        PeriodsCmd::Dlog(a) => {
            let (pa, pb) = (parse_complex(&a.a)?, parse_complex(&a.b)?);
            let br = dlog_principal_branch(pa, pb)?;
            ctx.op("periods.period_matrix_dlog");
            let p = period_matrix_dlog(pa, pb, &br, &ctx.cfg)?;
            Ok(json!({"layout": "forms x cycles", "matrix": p.to_json(), "a": cjson(pa), "b": cjson(pb)}))
        }
    }
}

fn coproduct(a: &CoproductArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let ij: Vec<usize> = a
        .entry
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad entry '{}'", a.entry))))
        .collect::<CliResult<_>>()?;
    let [i, j] = ij[..] else {
        return Err(CliError::Usage("--entry expects i,j".into()));
    };
    let (basis, p) = match &a.matrix {
        Some(path) => {
            let (basis, p, numeric) = read_json::<ExactMatrixJson>(&read_text(path)?, "matrix")?.into_parts()?;
            verify_exact_matrix(&p, &basis, numeric.as_deref())?;
            (basis, p)
        }
        None => {
            let pair = punctured_pair(&a.alpha, &a.beta, &None)?;
            exact_matrix_punctured_line(&pair, &ctx.cfg)?
        }
    };
    if i >= p.len() || j >= p.len() {
        return Err(CliError::Usage(format!("entry ({i},{j}) outside a {}x{} matrix", p.len(), p.len())));
    }
    ctx.op("hodge.triple_coproduct");
    let t = triple_coproduct(&p, i, j, a.n)?;
    Ok(json!({
        "atoms": basis.labels(),
        "entry": [i, j],
        "n": a.n,
        "matrix": p.iter().map(|r| r.iter().map(|e| e.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "coproduct": t.to_json(),
        "contracted": cjson(t.contract(&basis)?),
    }))
}

fn limit(a: &LimitArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let (pa, pb) = (parse_complex(&a.a)?, parse_complex(&a.b)?);
    let steps = a.steps.split(',').map(|s| LimitStep::parse(s.trim())).collect::<Result<Vec<_>, _>>()?;
    let ts = match &a.t {
        Some(t) => parse_f64_list(t)?,
        None => default_t_sequence(),
    };
    let br = dlog_principal_branch(pa, pb)?;
    ctx.op("hodge.build_vmhs");
    let vmhs = build_vmhs(pa, pb, &br, &ctx.cfg)?;
    ctx.op("hodge.limit_mhs");
    ctx.op("hodge.limit_period_matrix");
    let lim = periodlab::hodge::limit_mhs(&vmhs, &steps, &ts, &ctx.cfg)?;
    Ok(json!({
        "steps": steps.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "t": ts,
        "vmhs": vmhs.to_json(),
        "limit": lim.to_json(),
        "entry_3_0": cjson(lim.lattice[0][3]),
    }))
}

fn elliptic(a: &EllipticArgs, ctx: &mut Ctx) -> CliResult<Value> {
    let mut out = Map::new();
    let (curve, source) = match (&a.omega1, &a.g4) {
        (Some(w1), _) => {
            let w2 = a.omega2.as_ref().ok_or_else(|| CliError::Usage("--omega2 required".into()))?;
            let lat = Lattice::new(parse_complex(w1)?, parse_complex(w2)?)?;
            ctx.op("elliptic.eisenstein");
            let g4 = eisenstein(&lat, 2, a.cutoff)?;
            let g6 = eisenstein(&lat, 3, a.cutoff)?;
            out.insert("lattice".into(), lattice_json(&lat));
            out.insert("G4".into(), json!({"value": cjson(g4.value), "tail": g4.tail}));
            out.insert("G6".into(), json!({"value": cjson(g6.value), "tail": g6.tail}));
            if let Some(z) = &a.z {
                let z = parse_complex(z)?;
                ctx.op("elliptic.wp");
                let p = wp(&lat, z, a.cutoff)?;
                ctx.op("elliptic.wp_prime");
                let dp = wp_prime(&lat, z, a.cutoff)?;
                out.insert(
                    "wp".into(),
                    json!({"z": cjson(z), "value": cjson(p.value), "tail": p.tail,
                           "derivative": cjson(dp.value), "derivative_tail": dp.tail}),
                );
            }
            (EllipticCurveQ::new(g4.value, g6.value)?, Some(lat))
        }
        (None, Some(g4)) => {
            let g6 = a.g6.as_ref().ok_or_else(|| CliError::Usage("--g6 required".into()))?;
            (EllipticCurveQ::new(parse_complex(g4)?, parse_complex(g6)?)?, None)
        }
        (None, None) => return Err(CliError::Usage("give --omega1/--omega2 or --g4/--g6".into())),
    };
    let (g2, g3) = curve.g2_g3();
    out.insert("curve".into(), json!({"g2": cjson(g2), "g3": cjson(g3), "discriminant": cjson(curve.discriminant())}));
    ctx.op("elliptic.periods_from_curve");
    let rec = periods_from_curve(&curve, &ctx.cfg)?;
    ctx.op("elliptic.tau_invariant");
    let tau = tau_invariant(rec.omega1, rec.omega2)?;
    let (reduced, _) = reduce_tau(tau)?;
    out.insert("periods".into(), lattice_json(&rec));
    out.insert("tau".into(), cjson(tau));
    out.insert("tau_reduced".into(), cjson(reduced));
    if let Some(lat) = source {
        let change = unimodular_change(&lat, &rec, 1e-6);
        out.insert("round_trip".into(), json!({"recovered": change.is_some(), "change": change}));
    }
    Ok(Value::Object(out))
}

// ---------------------------------------------------------------------------
// output

/// Round every float to 15 significant digits.
fn round15(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r: f64 = format!("{x:.14e}").parse().unwrap_or(x);
            json!(r)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round15).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round15(v))).collect()),
        v => v,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(o) => o.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&key(&i.to_string()), x, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn render(schema: &str, v: Value, format: Format) -> String {
    let mut v = round15(v);
    if let Value::Object(o) = &mut v {
        o.insert("schema".into(), json!(schema));
    }
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&v).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            let mut w = csv::Writer::from_writer(vec![]);
            let _ = w.write_record(["schema", "key", "value"]);
            for (k, x) in rows.iter().filter(|(k, _)| k != "schema") {
                let _ = w.write_record([schema, k.as_str(), x.as_str()]);
            }
            String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
        }
    }
}

fn config(cli: &Cli, env_tol: Option<&str>) -> CliResult<QuadratureConfig> {
    let mut cfg = QuadratureConfig::default();
    if let Some(t) = env_tol {
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{TOL_ENV}='{t}' is not a number")))?;
        cfg = cfg.with_abs_tol(t);
    }
    if let Some(t) = cli.abs_tol {
        cfg = cfg.with_abs_tol(t);
    }
    if let Some(t) = cli.rel_tol {
        cfg.rel_tol = t;
    }
    if let Some(m) = cli.max_subdivisions {
        cfg.max_subdivisions = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Naive(_) => "naive",
        Command::Polylog(_) => "polylog",
        Command::Hyperlog(_) => "hyperlog",
        Command::Monodromy(MonodromyCmd::Increment(_)) => "monodromy increment",
        Command::Monodromy(MonodromyCmd::Continuation(_)) => "monodromy continuation",
        Command::Monodromy(MonodromyCmd::Log(_)) => "monodromy log",
        Command::Reduce(_) => "reduce",
        Command::Periods(PeriodsCmd::PuncturedLine(_)) => "periods punctured-line",
        Command::Periods(PeriodsCmd::Quadric(_)) => "periods quadric",
        Command::Periods(PeriodsCmd::Dlog(_)) => "periods dlog",
        Command::Coproduct(_) => "coproduct",
        Command::LimitMhs(_) => "limit-mhs",
        Command::Elliptic(_) => "elliptic",
    }
}

/// Run with explicit argv and PERIODLAB_TOL value.
pub fn run_with_env<I, T>(argv: I, env_tol: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut outcome = Outcome {
        code: 0,
        stdout: String::new(),
        stderr: String::new(),
        ops: BTreeSet::new(),
        subcommand: None,
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            if e.use_stderr() {
                outcome.code = 2;
                outcome.stderr = rendered;
            } else {
                outcome.stdout = rendered;
            }
            return outcome;
        }
    };
    let name = subcommand_name(&cli.command);
    outcome.subcommand = Some(name);
    let cfg = match config(&cli, env_tol) {
        Ok(c) => c,
        Err(e) => {
            outcome.code = e.exit_code();
            outcome.stderr = format!("{e}\n");
            return outcome;
        }
    };
    let mut ctx = Ctx {
        cfg,
        ops: BTreeSet::new(),
    };
    let result = match &cli.command {
        Command::Naive(a) => naive(a, &mut ctx),
        Command::Polylog(a) => polylog(a, &mut ctx),
        Command::Hyperlog(a) => hyperlog_cmd(a, &mut ctx),
        Command::Monodromy(m) => monodromy(m, &mut ctx),
        Command::Reduce(a) => reduce(a, &mut ctx),
        Command::Periods(p) => periods(p, &mut ctx),
        Command::Coproduct(a) => coproduct(a, &mut ctx),
        Command::LimitMhs(a) => limit(a, &mut ctx),
        Command::Elliptic(a) => elliptic(a, &mut ctx),
    };
    outcome.ops = ctx.ops;
    match result {
        Ok(v) => {
            let schema = format!("periodlab.{}.{SCHEMA_VERSION}", name.replace(' ', "."));
            outcome.stdout = render(&schema, v, cli.format);
        }
        Err(e) => {
            outcome.code = e.exit_code();
            outcome.stderr = format!("{e}\n");
        }
    }
    outcome
}

pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env = std::env::var(TOL_ENV).ok();
    run_with_env(argv, env.as_deref())
}
