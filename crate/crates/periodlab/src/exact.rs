//! Exact rational and Gaussian-rational scalars.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{PeriodError, Result};
use crate::numerics::ComplexValue;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parse "p", "p/q", or a finite decimal such as "-0.25" into an exact rational.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    if t.is_empty() {
        return Err(PeriodError::Parse("empty rational".into()));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|e| PeriodError::Parse(format!("{s}: {e}")))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| PeriodError::Parse(format!("{s}: {e}")))?;
        if d.is_zero() {
            return Err(PeriodError::Parse(format!("{s}: zero denominator")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip_abs = ip.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if ip_abs.is_empty() { "0" } else { ip_abs }, fp);
        let n = BigInt::from_str(&digits).map_err(|e| PeriodError::Parse(format!("{s}: {e}")))?;
        let d = BigInt::from(10).pow(fp.len() as u32);
        let v = BigRational::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n = BigInt::from_str(t).map_err(|e| PeriodError::Parse(format!("{s}: {e}")))?;
    Ok(BigRational::from_integer(n))
}

pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Element of ℚ(i).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct QI {
    pub re: Q,
    pub im: Q,
}

impl QI {
    pub fn new(re: Q, im: Q) -> Self {
        QI { re, im }
    }

    pub fn real(re: Q) -> Self {
        QI { re, im: Q::zero() }
    }

    pub fn int(n: i64) -> Self {
        QI::real(qi(n))
    }

    pub fn i() -> Self {
        QI { re: Q::zero(), im: Q::one() }
    }

    pub fn conj(&self) -> Self {
        QI { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn norm_sqr(&self) -> Q {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn to_complex(&self) -> ComplexValue {
        ComplexValue::new(q_to_f64(&self.re), q_to_f64(&self.im))
    }

    pub fn inv(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n.is_zero() {
            return Err(PeriodError::InvalidElement("division by zero".into()));
        }
        Ok(QI { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn scale(&self, s: &Q) -> Self {
        QI { re: &self.re * s, im: &self.im * s }
    }

    /// Parse "p/q", "a+bi" style strings with rational parts, or a pair of strings.
    pub fn parse(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(body) = t.strip_suffix('i') {
            // split at the last sign that is not leading and not after '/'
            let bytes = body.as_bytes();
            let mut cut = None;
            for k in (1..bytes.len()).rev() {
                if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'/' && bytes[k - 1] != b'e' {
                    cut = Some(k);
                    break;
                }
            }
            let (re, im) = match cut {
                Some(k) => (&body[..k], &body[k..]),
                None => ("0", body),
            };
            let im = match im {
                "" | "+" => "1",
                "-" => "-1",
                other => other,
            };
            let im = im.trim_start_matches('+');
            return Ok(QI { re: parse_q(re)?, im: parse_q(im)? });
        }
        Ok(QI::real(parse_q(&t)?))
    }
}

impl fmt::Display for QI {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", fmt_q(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}i", fmt_q(&self.im))
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            write!(f, "{}{}{}i", fmt_q(&self.re), sign, fmt_q(&self.im.abs()))
        }
    }
}

impl Zero for QI {
    fn zero() -> Self {
        QI::default()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for QI {
    fn one() -> Self {
        QI::real(Q::one())
    }
}

impl From<Q> for QI {
    fn from(x: Q) -> Self {
        QI::real(x)
    }
}

impl Add for QI {
    type Output = QI;
    fn add(self, o: QI) -> QI {
        QI { re: self.re + o.re, im: self.im + o.im }
    }
}
impl<'a> Add<&'a QI> for &'a QI {
    type Output = QI;
    fn add(self, o: &QI) -> QI {
        QI { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}
impl AddAssign for QI {
    fn add_assign(&mut self, o: QI) {
        self.re += o.re;
        self.im += o.im;
    }
}
impl Sub for QI {
    type Output = QI;
    fn sub(self, o: QI) -> QI {
        QI { re: self.re - o.re, im: self.im - o.im }
    }
}
impl<'a> Sub<&'a QI> for &'a QI {
    type Output = QI;
    fn sub(self, o: &QI) -> QI {
        QI { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}
impl SubAssign for QI {
    fn sub_assign(&mut self, o: QI) {
        self.re -= o.re;
        self.im -= o.im;
    }
}
impl Mul for QI {
    type Output = QI;
    fn mul(self, o: QI) -> QI {
        &self * &o
    }
}
impl<'a> Mul<&'a QI> for &'a QI {
    type Output = QI;
    fn mul(self, o: &QI) -> QI {
        QI {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}
impl MulAssign for QI {
    fn mul_assign(&mut self, o: QI) {
        *self = &*self * &o;
    }
}
impl Div for QI {
    type Output = QI;
    /// Panics on division by zero; use [`QI::inv`] for a checked inverse.
    fn div(self, o: QI) -> QI {
        &self * &o.inv().expect("division by zero in QI")
    }
}
impl Neg for QI {
    type Output = QI;
    fn neg(self) -> QI {
        QI { re: -self.re, im: -self.im }
    }
}

/// Exact Gaussian elimination: solve A x = b over ℚ(i). Returns None if singular.
pub fn solve_qi(mut a: Vec<Vec<QI>>, mut b: Vec<QI>) -> Option<Vec<QI>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].inv().ok()?;
        for k in col..n {
            a[col][k] = &a[col][k] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n {
                    let t = &f * &a[col][k];
                    a[r][k] = &a[r][k] - &t;
                }
                let t = &f * &b[col];
                b[r] = &b[r] - &t;
            }
        }
    }
    Some(b)
}
