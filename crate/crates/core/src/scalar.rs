//! Floating-point scalar abstraction used by every rigorous computation.
//!
//! All enclosures are generic over [`Scalar`]; `f64` is the working type of
//! the pipeline and `f32` is supported for coarse experiments and tests.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A binary IEEE 754 floating-point type with round-to-nearest arithmetic.
///
/// Directed rounding is obtained from round-to-nearest results by exact
/// error terms (`two_sum`, fused multiply-add residuals); the trait only
/// supplies the neighbour functions and the thresholds where those error
/// terms stop being exact.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Unit roundoff `2^-p` for a `p`-bit significand.
    const UNIT_ROUNDOFF: Self;

    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Largest representable value strictly smaller than `self`.
    fn next_down(self) -> Self;

    /// Magnitude below which residuals of products and quotients may be
    /// inexact because of gradual underflow.
    fn residual_floor() -> Self;

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits every scalar type")
    }

    fn from_f64_nearest(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f64 {
    const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

    fn next_up(self) -> f64 {
        f64::next_up(self)
    }

    fn next_down(self) -> f64 {
        f64::next_down(self)
    }

    fn residual_floor() -> f64 {
        // 2^-969: products above this keep their full residual representable.
        f64::MIN_POSITIVE / f64::EPSILON
    }
}

impl Scalar for f32 {
    const UNIT_ROUNDOFF: f32 = f32::EPSILON / 2.0;

    fn next_up(self) -> f32 {
        f32::next_up(self)
    }

    fn next_down(self) -> f32 {
        f32::next_down(self)
    }

    fn residual_floor() -> f32 {
        f32::MIN_POSITIVE / f32::EPSILON
    }
}

/// Error-free transformation of a sum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum<T: Scalar>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a + b` rounded toward negative infinity.
#[inline]
pub fn add_down<T: Scalar>(a: T, b: T) -> T {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if e < T::zero() {
        s.next_down()
    } else {
        s
    }
}

/// `a + b` rounded toward positive infinity.
#[inline]
pub fn add_up<T: Scalar>(a: T, b: T) -> T {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return s;
    }
    if e > T::zero() {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down<T: Scalar>(a: T, b: T) -> T {
    add_down(a, -b)
}

#[inline]
pub fn sub_up<T: Scalar>(a: T, b: T) -> T {
    add_up(a, -b)
}

/// Residual `a*b - p` when it is exactly representable.
#[inline]
fn product_residual<T: Scalar>(a: T, b: T, p: T) -> Option<T> {
    if p.is_finite() && p.abs() >= T::residual_floor() {
        Some(a.mul_add(b, -p))
    } else {
        None
    }
}

#[inline]
pub fn mul_down<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() || b == T::zero() {
        return T::zero();
    }
    let p = a * b;
    match product_residual(a, b, p) {
        Some(r) if r >= T::zero() => p,
        _ => p.next_down(),
    }
}

#[inline]
pub fn mul_up<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() || b == T::zero() {
        return T::zero();
    }
    let p = a * b;
    match product_residual(a, b, p) {
        Some(r) if r <= T::zero() => p,
        _ => p.next_up(),
    }
}

/// `a/b - q`, up to a positive factor, from the exact remainder `a - q*b`.
#[inline]
fn quotient_offset<T: Scalar>(a: T, b: T, q: T) -> Option<T> {
    if q.is_finite() && q.abs() >= T::residual_floor() {
        let r = (-q).mul_add(b, a);
        Some(if b > T::zero() { r } else { -r })
    } else {
        None
    }
}

#[inline]
pub fn div_down<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() {
        return T::zero();
    }
    let q = a / b;
    match quotient_offset(a, b, q) {
        Some(d) if d >= T::zero() => q,
        _ => q.next_down(),
    }
}

#[inline]
pub fn div_up<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() {
        return T::zero();
    }
    let q = a / b;
    match quotient_offset(a, b, q) {
        Some(d) if d <= T::zero() => q,
        _ => q.next_up(),
    }
}

#[inline]
pub fn sqrt_down<T: Scalar>(x: T) -> T {
    let s = x.sqrt();
    if x == T::zero() || x == T::one() {
        return s;
    }
    if s.abs() < T::residual_floor() {
        return s.next_down().max(T::zero());
    }
    // x - s^2 < 0 means s overshoots the true root.
    if (-s).mul_add(s, x) < T::zero() {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up<T: Scalar>(x: T) -> T {
    let s = x.sqrt();
    if x == T::zero() || x == T::one() {
        return s;
    }
    if s.abs() < T::residual_floor() {
        return s.next_up();
    }
    if (-s).mul_add(s, x) > T::zero() {
        s.next_up()
    } else {
        s
    }
}
