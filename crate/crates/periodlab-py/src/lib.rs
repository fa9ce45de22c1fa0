//! Python bindings. Build with `maturin develop --features extension-module`.
//!
//! Complex results come back as Python `complex`; structured results
//! (period matrices, limit MHS) as the same JSON text the CLI prints.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use periodlab::derham::PuncturedLinePair;
use periodlab::elliptic::{self, Lattice};
use periodlab::exact::parse_q;
use periodlab::hodge::{self, LimitStep};
use periodlab::numerics::QuadratureConfig;
use periodlab::periods;
use periodlab::polylog::{self, HyperlogWord, IndexWord};
use periodlab::semialg::{self, FormJson, RegionJson};
use periodlab::PeriodError;

fn err(e: PeriodError) -> PyErr {
    match e {
        PeriodError::Parse(m) | PeriodError::InvalidConfig(m) => PyValueError::new_err(m),
        e => PyArithmeticError::new_err(e.to_string()),
    }
}

fn cfg(tol: Option<f64>) -> PyResult<QuadratureConfig> {
    let c = match tol {
        Some(t) => QuadratureConfig::default().with_abs_tol(t),
        None => QuadratureConfig::default(),
    };
    c.validate().map_err(err)?;
    Ok(c)
}

/// Li_m(x) on the principal branch.
#[pyfunction]
#[pyo3(signature = (m, x, tol=None))]
pub fn li(m: Vec<u32>, x: Vec<Complex64>, tol: Option<f64>) -> PyResult<Complex64> {
    let word = IndexWord::new(m).map_err(err)?;
    polylog::li_principal(&word, &x, &cfg(tol)?).map_err(err)
}

/// Truncated nested series for Li_m(x).
#[pyfunction]
#[pyo3(signature = (m, x, tol=1e-15))]
pub fn li_series(m: Vec<u32>, x: Vec<Complex64>, tol: f64) -> PyResult<Complex64> {
    let word = IndexWord::new(m).map_err(err)?;
    polylog::li_series(&word, &x, tol).map_err(err)
}

/// I(a₁,…,a_n) along the principal path from 0 to 1.
#[pyfunction]
#[pyo3(signature = (letters, tol=None))]
pub fn hyperlog(letters: Vec<Complex64>, tol: Option<f64>) -> PyResult<Complex64> {
    let word = HyperlogWord::new(letters.clone()).map_err(err)?;
    let branch = polylog::principal_branch(&letters).map_err(err)?;
    polylog::hyperlog(&word, &branch, &cfg(tol)?).map_err(err)
}

/// ∫_G ω for JSON region and form documents.
#[pyfunction]
#[pyo3(signature = (region, form, shrink_levels=0, tol=None))]
pub fn naive_period(region: &str, form: &str, shrink_levels: usize, tol: Option<f64>) -> PyResult<Complex64> {
    let r: RegionJson = serde_json::from_str(region).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let f: FormJson = serde_json::from_str(form).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let c = cfg(tol)?.with_shrink_levels(shrink_levels);
    semialg::naive_period(&r.to_region().map_err(err)?, &f.to_form().map_err(err)?, &c).map_err(err)
}

/// Period matrix of (G_m, {1, α, β…}) as JSON, cycles × forms.
#[pyfunction]
#[pyo3(signature = (points, tol=None))]
pub fn punctured_line_periods(points: Vec<String>, tol: Option<f64>) -> PyResult<String> {
    let pts = points.iter().map(|p| parse_q(p)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let pair = PuncturedLinePair::standard(pts).map_err(err)?;
    let p = periods::period_matrix_punctured_line(&pair, &cfg(tol)?).map_err(err)?;
    Ok(p.transposed().to_json().to_string())
}

/// Limit MHS of the dlog family at b, as JSON.
#[pyfunction]
#[pyo3(signature = (b, steps, a=Complex64::new(2.0, 0.0), tol=None))]
pub fn limit_mhs(b: Complex64, steps: Vec<String>, a: Complex64, tol: Option<f64>) -> PyResult<String> {
    let c = cfg(tol)?;
    let steps = steps.iter().map(|s| LimitStep::parse(s)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let br = periods::dlog_principal_branch(a, b).map_err(err)?;
    let vmhs = hodge::build_vmhs(a, b, &br, &c).map_err(err)?;
    let lim = hodge::limit_mhs(&vmhs, &steps, &hodge::default_t_sequence(), &c).map_err(err)?;
    Ok(lim.to_json().to_string())
}

#[pyfunction]
#[pyo3(signature = (omega1, omega2, k, cutoff=elliptic::DEFAULT_CUTOFF))]
pub fn eisenstein(omega1: Complex64, omega2: Complex64, k: u32, cutoff: usize) -> PyResult<Complex64> {
    let lat = Lattice::new(omega1, omega2).map_err(err)?;
    Ok(elliptic::eisenstein(&lat, k, cutoff).map_err(err)?.value)
}

/// (℘(z), ℘′(z)).
#[pyfunction]
#[pyo3(signature = (omega1, omega2, z, cutoff=elliptic::DEFAULT_CUTOFF))]
pub fn wp(omega1: Complex64, omega2: Complex64, z: Complex64, cutoff: usize) -> PyResult<(Complex64, Complex64)> {
    let lat = Lattice::new(omega1, omega2).map_err(err)?;
    let p = elliptic::wp(&lat, z, cutoff).map_err(err)?.value;
    let dp = elliptic::wp_prime(&lat, z, cutoff).map_err(err)?.value;
    Ok((p, dp))
}

#[pyfunction]
pub fn tau_invariant(omega1: Complex64, omega2: Complex64) -> PyResult<Complex64> {
    elliptic::tau_invariant(omega1, omega2).map_err(err)
}

#[pymodule]
fn periodlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(li, m)?)?;
    m.add_function(wrap_pyfunction!(li_series, m)?)?;
    m.add_function(wrap_pyfunction!(hyperlog, m)?)?;
    m.add_function(wrap_pyfunction!(naive_period, m)?)?;
    m.add_function(wrap_pyfunction!(punctured_line_periods, m)?)?;
    m.add_function(wrap_pyfunction!(limit_mhs, m)?)?;
    m.add_function(wrap_pyfunction!(eisenstein, m)?)?;
    m.add_function(wrap_pyfunction!(wp, m)?)?;
    m.add_function(wrap_pyfunction!(tau_invariant, m)?)?;
    Ok(())
}
