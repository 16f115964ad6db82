//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Only the operations needed by Gram
//! accumulation and Cholesky factorization are provided.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn mul_f64s(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        DoubleDouble { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::ZERO;
        }
        // one Newton step on the double approximation
        let x = self.hi.sqrt();
        let xx = DoubleDouble::mul_f64s(x, x);
        let corr = (self - xx).hi / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, corr);
        DoubleDouble { hi, lo }
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Natural logarithm, accurate to double precision of the full value.
    pub fn ln(self) -> f64 {
        self.hi.ln() + self.lo / self.hi
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * DoubleDouble::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * DoubleDouble::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

/// Complex number with double-double parts.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct ComplexDd {
    pub re: DoubleDouble,
    pub im: DoubleDouble,
}

impl ComplexDd {
    pub const ZERO: ComplexDd = ComplexDd {
        re: DoubleDouble::ZERO,
        im: DoubleDouble::ZERO,
    };

    pub fn from_c64(z: Complex64) -> Self {
        ComplexDd {
            re: DoubleDouble::from_f64(z.re),
            im: DoubleDouble::from_f64(z.im),
        }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Self {
        ComplexDd {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> DoubleDouble {
        self.re * self.re + self.im * self.im
    }

    /// `conj(a) * b` computed from plain doubles with exact products.
    pub fn conj_mul_c64(a: Complex64, b: Complex64) -> Self {
        let re = DoubleDouble::mul_f64s(a.re, b.re) + DoubleDouble::mul_f64s(a.im, b.im);
        let im = DoubleDouble::mul_f64s(a.re, b.im) - DoubleDouble::mul_f64s(a.im, b.re);
        ComplexDd { re, im }
    }

    pub fn scale(self, s: DoubleDouble) -> Self {
        ComplexDd {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

impl Add for ComplexDd {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ComplexDd {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for ComplexDd {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        ComplexDd {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Mul for ComplexDd {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        ComplexDd {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_double() {
        // (1 + 2^-60) - 1 vanishes in f64 but not in double-double
        let a = DoubleDouble::from_f64(1.0) + DoubleDouble::from_f64(2f64.powi(-60));
        let b = a - DoubleDouble::from_f64(1.0);
        assert_eq!(b.to_f64(), 2f64.powi(-60));
    }

    #[test]
    fn division_and_sqrt() {
        let three = DoubleDouble::from_f64(3.0);
        let third = DoubleDouble::from_f64(1.0) / three;
        let back = third * three;
        assert!((back - DoubleDouble::from_f64(1.0)).to_f64().abs() < 1e-30);
        let two = DoubleDouble::from_f64(2.0);
        let r = two.sqrt();
        assert!((r * r - two).to_f64().abs() < 1e-30);
    }
}
