//! Extended-precision real and complex arithmetic.
//!
//! Reals are MPFR floats (`rug::Float`) with a caller-chosen significand
//! width. Complex numbers are carried as a pair of such reals; every result
//! inherits the precision of its left operand.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use rug::float::{Constant, ParseFloatError};
use rug::ops::Pow;
use rug::Float;

/// Default significand width in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// Environment variable that overrides the default precision.
pub const PRECISION_ENV: &str = "NEVAC_PRECISION_BITS";

/// Precision from `NEVAC_PRECISION_BITS` if set and valid, else the default.
pub fn default_precision() -> u32 {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<u32>().ok())
        .filter(|&p| p >= 53)
        .unwrap_or(DEFAULT_PRECISION_BITS)
}

pub fn real(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// Parses decimal text straight into a float of the given precision.
pub fn parse_real(prec: u32, text: &str) -> Result<Float, ParseFloatError> {
    Float::parse(text.trim()).map(|p| Float::with_val(prec, p))
}

/// Unit roundoff 2^(1-prec).
pub fn ulp(prec: u32) -> Float {
    Float::with_val(prec, 1u32) >> (prec - 1)
}

/// Formats a real with `digits` significant decimal digits in scientific notation.
pub fn format_real(x: &Float, digits: usize) -> String {
    x.to_string_radix(10, Some(digits))
}

#[derive(Clone, PartialEq)]
pub struct BigComplex {
    pub re: Float,
    pub im: Float,
}

impl BigComplex {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 0.0)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(prec, 1.0, 0.0)
    }

    pub fn i(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 1.0)
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Self {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Self::from_f64(prec, z.re, z.im)
    }

    pub fn from_real(x: Float) -> Self {
        let im = Float::new(x.prec());
        Self { re: x, im }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.hypot_ref(&self.im))
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        Self {
            re: Float::with_val(p, &self.re * s),
            im: Float::with_val(p, &self.im * s),
        }
    }

    /// Multiplies by i.
    pub fn mul_i(&self) -> Self {
        Self {
            re: -self.im.clone(),
            im: self.re.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Integer power by repeated squaring.
    pub fn powu(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.prec());
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    pub fn recip(&self) -> Self {
        Self::one(self.prec()) / self
    }
}

impl fmt::Debug for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} + {}i)",
            format_real(&self.re, 20),
            format_real(&self.im, 20)
        )
    }
}

impl<'a> Add<&'a BigComplex> for &'a BigComplex {
    type Output = BigComplex;
    fn add(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec();
        BigComplex {
            re: Float::with_val(p, &self.re + &rhs.re),
            im: Float::with_val(p, &self.im + &rhs.im),
        }
    }
}

impl<'a> Sub<&'a BigComplex> for &'a BigComplex {
    type Output = BigComplex;
    fn sub(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec();
        BigComplex {
            re: Float::with_val(p, &self.re - &rhs.re),
            im: Float::with_val(p, &self.im - &rhs.im),
        }
    }
}

impl<'a> Mul<&'a BigComplex> for &'a BigComplex {
    type Output = BigComplex;
    fn mul(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec();
        let ac = Float::with_val(p, &self.re * &rhs.re);
        let bd = Float::with_val(p, &self.im * &rhs.im);
        let ad = Float::with_val(p, &self.re * &rhs.im);
        let bc = Float::with_val(p, &self.im * &rhs.re);
        BigComplex {
            re: ac - bd,
            im: ad + bc,
        }
    }
}

impl<'a> Div<&'a BigComplex> for &'a BigComplex {
    type Output = BigComplex;
    fn div(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec();
        let den = rhs.norm_sqr();
        let num = self * &rhs.conj();
        BigComplex {
            re: Float::with_val(p, &num.re / &den),
            im: Float::with_val(p, &num.im / &den),
        }
    }
}

impl Add for BigComplex {
    type Output = BigComplex;
    fn add(self, rhs: BigComplex) -> BigComplex {
        &self + &rhs
    }
}

impl Sub for BigComplex {
    type Output = BigComplex;
    fn sub(self, rhs: BigComplex) -> BigComplex {
        &self - &rhs
    }
}

impl Mul for BigComplex {
    type Output = BigComplex;
    fn mul(self, rhs: BigComplex) -> BigComplex {
        &self * &rhs
    }
}

impl Div for BigComplex {
    type Output = BigComplex;
    fn div(self, rhs: BigComplex) -> BigComplex {
        &self / &rhs
    }
}

impl Div<&BigComplex> for BigComplex {
    type Output = BigComplex;
    fn div(self, rhs: &BigComplex) -> BigComplex {
        &self / rhs
    }
}

impl Neg for BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        BigComplex {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        -(self.clone())
    }
}

/// Relative distance |a - b| / |b| (absolute when b = 0).
pub fn rel_err(a: &BigComplex, b: &BigComplex) -> Float {
    let diff = (a - b).abs();
    let scale = b.abs();
    if scale.is_zero() {
        diff
    } else {
        diff / scale
    }
}

/// 2^e at the given precision.
pub fn pow2(prec: u32, e: i32) -> Float {
    Float::with_val(prec, 2u32).pow(e)
}
