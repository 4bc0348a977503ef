//! Scalar abstraction over `f32`/`f64`.
//!
//! Transcendentals route through `libm` so the crate stays `no_std` and the
//! same bits come out on every platform.

use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::run::Dtype;

/// Floating-point scalar the trainer is generic over.
pub trait Real:
    Copy
    + PartialOrd
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    const ZERO: Self;
    const ONE: Self;
    const DTYPE: Dtype;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn max(self, other: Self) -> Self;
    fn is_finite(self) -> bool;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const DTYPE: Dtype = Dtype::F32;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        libm::expf(self)
    }
    fn ln(self) -> Self {
        libm::logf(self)
    }
    fn sqrt(self) -> Self {
        libm::sqrtf(self)
    }
    fn abs(self) -> Self {
        libm::fabsf(self)
    }
    fn powi(self, n: i32) -> Self {
        let mut acc = 1.0f32;
        for _ in 0..n.unsigned_abs() {
            acc *= self;
        }
        if n < 0 {
            1.0 / acc
        } else {
            acc
        }
    }
    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const DTYPE: Dtype = Dtype::F64;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        libm::exp(self)
    }
    fn ln(self) -> Self {
        libm::log(self)
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    fn abs(self) -> Self {
        libm::fabs(self)
    }
    fn powi(self, n: i32) -> Self {
        let mut acc = 1.0f64;
        for _ in 0..n.unsigned_abs() {
            acc *= self;
        }
        if n < 0 {
            1.0 / acc
        } else {
            acc
        }
    }
    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// `ln` for plain f64 call sites in analysis code (always f64 there).
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `exp` for plain f64 call sites.
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// `sqrt` for plain f64 call sites.
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `|x|` for plain f64 call sites.
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `floor` for plain f64 call sites.
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
