//! Coefficient fields: exact complex rationals and double-precision complex numbers.
//!
//! Both backends implement [`Scalar`]. Generic code is written once against the
//! trait, and the two backends can never meet in one expression because they are
//! distinct types.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Which arithmetic a coefficient type uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Float => f.write_str("float"),
        }
    }
}

/// A commutative field of coefficients.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + AddAssign
    + for<'a> AddAssign<&'a Self>
    + SubAssign
    + MulAssign
{
    const BACKEND: Backend;

    fn from_i64(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_rationals(re: &BigRational, im: &BigRational) -> Self;

    /// The imaginary unit.
    fn imag_unit() -> Self;

    fn to_c64(&self) -> Complex64;

    /// Pivot preference for elimination. Exact values only distinguish zero from
    /// nonzero; floats prefer the largest modulus.
    fn pivot_score(&self) -> f64;

    /// Whether the value counts as zero relative to `scale`. Exact: exactly zero.
    fn negligible(&self, scale: f64) -> bool;

    /// A square root that stays inside the field, if one exists. Floats return the
    /// principal branch.
    fn sqrt_in_field(&self) -> Option<Self>;

    /// Equality for exact values, closeness within `tol` (absolute + relative) for floats.
    fn close_to(&self, other: &Self, tol: f64) -> bool;

    /// Sign of the value when it is real.
    fn real_sign(&self) -> Option<Ordering>;

    /// Text form used in reports: `p/q`, `p/q+r/si` (floats use decimal parts).
    fn to_text(&self) -> String;

    /// Real and imaginary parts as plain real literals (`p/q` or decimals).
    fn text_parts(&self) -> (String, String);

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }
}

/// Exact complex number with arbitrary-precision rational parts.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

/// Shorthand for the exact backend.
pub type Exact = ExactComplex;
/// Shorthand for the float backend.
pub type Float = Complex64;

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Self { re, im: BigRational::zero() }
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -self.im.clone() }
    }

    fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator/denominator may individually overflow f64
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn exact_sqrt_rational(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer();
    let d = r.denom();
    let sn = n.sqrt();
    let sd = d.sqrt();
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

impl fmt::Debug for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Formats as `p/q`, `p/q+r/si`, `r/si`.
impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", self.re);
        }
        let mag = self.im.abs();
        let imag = if mag.is_one() { "i".to_string() } else { format!("{mag}i") };
        if self.re.is_zero() {
            if self.im.is_negative() {
                write!(f, "-{imag}")
            } else {
                write!(f, "{imag}")
            }
        } else {
            let sign = if self.im.is_negative() { '-' } else { '+' };
            write!(f, "{}{}{}", self.re, sign, imag)
        }
    }
}

impl Zero for ExactComplex {
    fn zero() -> Self {
        Self::default()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for ExactComplex {
    fn one() -> Self {
        Self::real(BigRational::one())
    }
}

impl<'a> Add<&'a ExactComplex> for ExactComplex {
    type Output = ExactComplex;
    fn add(mut self, rhs: &'a ExactComplex) -> ExactComplex {
        self += rhs;
        self
    }
}

impl Add for ExactComplex {
    type Output = ExactComplex;
    fn add(self, rhs: ExactComplex) -> ExactComplex {
        self + &rhs
    }
}

impl<'a> AddAssign<&'a ExactComplex> for ExactComplex {
    fn add_assign(&mut self, rhs: &'a ExactComplex) {
        self.re += &rhs.re;
        if !rhs.im.is_zero() {
            self.im += &rhs.im;
        }
    }
}

impl AddAssign for ExactComplex {
    fn add_assign(&mut self, rhs: ExactComplex) {
        *self += &rhs;
    }
}

impl<'a> Sub<&'a ExactComplex> for ExactComplex {
    type Output = ExactComplex;
    fn sub(mut self, rhs: &'a ExactComplex) -> ExactComplex {
        self -= rhs.clone();
        self
    }
}

impl Sub for ExactComplex {
    type Output = ExactComplex;
    fn sub(mut self, rhs: ExactComplex) -> ExactComplex {
        self -= rhs;
        self
    }
}

impl SubAssign for ExactComplex {
    fn sub_assign(&mut self, rhs: ExactComplex) {
        self.re -= rhs.re;
        if !rhs.im.is_zero() {
            self.im -= rhs.im;
        }
    }
}

impl<'a> Mul<&'a ExactComplex> for ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: &'a ExactComplex) -> ExactComplex {
        if self.im.is_zero() && rhs.im.is_zero() {
            return ExactComplex::real(self.re * &rhs.re);
        }
        let re = &self.re * &rhs.re - &self.im * &rhs.im;
        let im = &self.re * &rhs.im + &self.im * &rhs.re;
        ExactComplex { re, im }
    }
}

impl Mul for ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: ExactComplex) -> ExactComplex {
        self * &rhs
    }
}

impl MulAssign for ExactComplex {
    fn mul_assign(&mut self, rhs: ExactComplex) {
        *self = std::mem::take(self) * &rhs;
    }
}

impl Div for ExactComplex {
    type Output = ExactComplex;
    fn div(self, rhs: ExactComplex) -> ExactComplex {
        assert!(!rhs.is_zero(), "division of exact coefficient by zero");
        if rhs.im.is_zero() {
            return ExactComplex { re: self.re / &rhs.re, im: self.im / &rhs.re };
        }
        let den = rhs.norm_sqr();
        let num = self * rhs.conj();
        ExactComplex { re: num.re / &den, im: num.im / den }
    }
}

impl Neg for ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex { re: -self.re, im: -self.im }
    }
}

impl Scalar for ExactComplex {
    const BACKEND: Backend = Backend::Exact;

    fn from_i64(n: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(n)))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_rationals(re: &BigRational, im: &BigRational) -> Self {
        Self { re: re.clone(), im: im.clone() }
    }

    fn imag_unit() -> Self {
        Self { re: BigRational::zero(), im: BigRational::one() }
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    fn pivot_score(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }

    fn negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }

    fn sqrt_in_field(&self) -> Option<Self> {
        if self.im.is_zero() {
            if self.re.is_negative() {
                exact_sqrt_rational(&-self.re.clone()).map(|s| Self { re: BigRational::zero(), im: s })
            } else {
                exact_sqrt_rational(&self.re).map(Self::real)
            }
        } else {
            // (a+bi)^2 = z with a = sqrt((|z|+re)/2)
            let modulus = exact_sqrt_rational(&self.norm_sqr())?;
            let two = BigRational::from_integer(BigInt::from(2));
            let a = exact_sqrt_rational(&((&modulus + &self.re) / &two))?;
            let b = exact_sqrt_rational(&((&modulus - &self.re) / &two))?;
            let b = if self.im.is_negative() { -b } else { b };
            Some(Self { re: a, im: b })
        }
    }

    fn close_to(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn real_sign(&self) -> Option<Ordering> {
        if self.im.is_zero() {
            Some(self.re.cmp(&BigRational::zero()))
        } else {
            None
        }
    }

    fn to_text(&self) -> String {
        self.to_string()
    }

    fn text_parts(&self) -> (String, String) {
        (self.re.to_string(), self.im.to_string())
    }
}

impl Scalar for Complex64 {
    const BACKEND: Backend = Backend::Float;

    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }

    fn from_rationals(re: &BigRational, im: &BigRational) -> Self {
        Complex64::new(rational_to_f64(re), rational_to_f64(im))
    }

    fn imag_unit() -> Self {
        Complex64::i()
    }

    fn to_c64(&self) -> Complex64 {
        *self
    }

    fn pivot_score(&self) -> f64 {
        self.norm()
    }

    fn negligible(&self, scale: f64) -> bool {
        self.norm() <= 1e-13 * scale.max(1e-300)
    }

    fn sqrt_in_field(&self) -> Option<Self> {
        Some(self.sqrt())
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        let diff = (self - other).norm();
        diff <= tol * (1.0 + self.norm().max(other.norm()))
    }

    fn real_sign(&self) -> Option<Ordering> {
        if self.im.abs() > 1e-12 * (1.0 + self.re.abs()) {
            None
        } else {
            self.re.partial_cmp(&0.0)
        }
    }

    fn to_text(&self) -> String {
        if self.im == 0.0 {
            format!("{}", self.re)
        } else if self.re == 0.0 {
            format!("{}i", self.im)
        } else if self.im < 0.0 {
            format!("{}-{}i", self.re, -self.im)
        } else {
            format!("{}+{}i", self.re, self.im)
        }
    }

    fn text_parts(&self) -> (String, String) {
        (format!("{}", self.re), format!("{}", self.im))
    }
}

/// Converts an exact value to the float backend.
pub fn to_float(c: &Exact) -> Float {
    c.to_c64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    #[test]
    fn display_forms() {
        assert_eq!(q(105, 2).to_string(), "105/2");
        assert_eq!(q(-3, 1).to_string(), "-3");
        let z = q(1, 2) + Exact::imag_unit() * q(3, 4);
        assert_eq!(z.to_string(), "1/2+3/4i");
        assert_eq!((-Exact::imag_unit()).to_string(), "-i");
        assert_eq!((Exact::imag_unit() * q(2, 1)).to_string(), "2i");
    }

    #[test]
    fn complex_division_round_trips() {
        let a = q(1, 3) + Exact::imag_unit() * q(-2, 5);
        let b = q(7, 2) + Exact::imag_unit() * q(1, 9);
        let c = a.clone() / b.clone();
        assert_eq!(c * b, a);
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(q(9, 4).sqrt_in_field(), Some(q(3, 2)));
        assert_eq!(q(2, 1).sqrt_in_field(), None);
        assert_eq!(q(-4, 1).sqrt_in_field(), Some(Exact::imag_unit() * q(2, 1)));
        // (1+2i)^2 = -3+4i
        let z = q(-3, 1) + Exact::imag_unit() * q(4, 1);
        assert_eq!(z.sqrt_in_field(), Some(q(1, 1) + Exact::imag_unit() * q(2, 1)));
    }

    #[test]
    fn float_closeness_is_relative() {
        let a = Complex64::new(1e6, 0.0);
        let b = Complex64::new(1e6 + 1e-4, 0.0);
        assert!(a.close_to(&b, 1e-9));
        assert!(!a.close_to(&Complex64::new(1e6 + 10.0, 0.0), 1e-9));
    }
}
