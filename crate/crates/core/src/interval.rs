//! Closed intervals with outward-rounded arithmetic.
//!
//! Every operation returns an enclosure of the exact image of its operands.
//! Arithmetic and square roots are rounded outward exactly (one directed
//! rounding per endpoint). `ln` and `exp` rely on the platform `libm`
//! (`log`/`exp`, documented error below 1 ulp) and widen the round-to-nearest
//! result by two ulps on each side.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: String, hi: String },
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("domain error: {0}")]
    DomainError(&'static str),
    #[error("result not representable as a finite interval")]
    Overflow,
}

/// A closed interval `[lo, hi]` with finite representable endpoints.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Result of the elementary set operations on a pair of intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetOps<T> {
    pub intersect: Option<Interval<T>>,
    pub hull: Interval<T>,
    pub intersects: bool,
    pub subset_of_interior: bool,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError::InvalidBounds {
                lo: lo.to_string(),
                hi: hi.to_string(),
            })
        }
    }

    /// The point interval `[x, x]`.
    pub fn point(x: T) -> Self {
        assert!(x.is_finite(), "point interval needs a finite value");
        Self { lo: x, hi: x }
    }

    fn checked(lo: T, hi: T) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() {
            debug_assert!(lo <= hi);
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError::Overflow)
        }
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    /// Width rounded upward.
    pub fn width(&self) -> T {
        scalar::sub_up(self.hi, self.lo)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Round-to-nearest midpoint, always inside the interval.
    pub fn mid(&self) -> T {
        let m = self.lo * T::half() + self.hi * T::half();
        m.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(T::zero())
    }

    /// `other ⊆ self`.
    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// `self` lies in the interior of `other`.
    pub fn subset_of_interior(&self, other: &Self) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn set_ops(&self, other: &Self) -> SetOps<T> {
        SetOps {
            intersect: self.intersect(other),
            hull: self.hull(other),
            intersects: self.intersects(other),
            subset_of_interior: self.subset_of_interior(other),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, IntervalError> {
        Self::checked(
            scalar::add_down(self.lo, other.lo),
            scalar::add_up(self.hi, other.hi),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self, IntervalError> {
        Self::checked(
            scalar::sub_down(self.lo, other.hi),
            scalar::sub_up(self.hi, other.lo),
        )
    }

    pub fn mul(&self, other: &Self) -> Result<Self, IntervalError> {
        let (a, b, c, d) = (self.lo, self.hi, other.lo, other.hi);
        let lo = scalar::mul_down(a, c)
            .min(scalar::mul_down(a, d))
            .min(scalar::mul_down(b, c))
            .min(scalar::mul_down(b, d));
        let hi = scalar::mul_up(a, c)
            .max(scalar::mul_up(a, d))
            .max(scalar::mul_up(b, c))
            .max(scalar::mul_up(b, d));
        Self::checked(lo, hi)
    }

    pub fn div(&self, other: &Self) -> Result<Self, IntervalError> {
        if other.contains_zero() {
            return Err(IntervalError::DivisionByZeroInterval);
        }
        let (a, b, c, d) = (self.lo, self.hi, other.lo, other.hi);
        let lo = scalar::div_down(a, c)
            .min(scalar::div_down(a, d))
            .min(scalar::div_down(b, c))
            .min(scalar::div_down(b, d));
        let hi = scalar::div_up(a, c)
            .max(scalar::div_up(a, d))
            .max(scalar::div_up(b, c))
            .max(scalar::div_up(b, d));
        Self::checked(lo, hi)
    }

    /// Scaling by a representable constant.
    pub fn scale(&self, k: T) -> Result<Self, IntervalError> {
        self.mul(&Self::point(k))
    }

    /// Enclosure of `{x² : x ∈ self}`; never negative.
    pub fn sqr(&self) -> Result<Self, IntervalError> {
        let (lo, hi) = if self.lo >= T::zero() {
            (
                scalar::mul_down(self.lo, self.lo),
                scalar::mul_up(self.hi, self.hi),
            )
        } else if self.hi <= T::zero() {
            (
                scalar::mul_down(self.hi, self.hi),
                scalar::mul_up(self.lo, self.lo),
            )
        } else {
            let m = (-self.lo).max(self.hi);
            (T::zero(), scalar::mul_up(m, m))
        };
        Self::checked(lo.max(T::zero()), hi)
    }

    pub fn abs(&self) -> Self {
        if self.lo >= T::zero() {
            *self
        } else if self.hi <= T::zero() {
            self.neg()
        } else {
            Self {
                lo: T::zero(),
                hi: (-self.lo).max(self.hi),
            }
        }
    }

    pub fn sqrt(&self) -> Result<Self, IntervalError> {
        if self.lo < T::zero() {
            return Err(IntervalError::DomainError("sqrt of negative values"));
        }
        Self::checked(scalar::sqrt_down(self.lo), scalar::sqrt_up(self.hi))
    }

    pub fn ln(&self) -> Result<Self, IntervalError> {
        if self.lo <= T::zero() {
            return Err(IntervalError::DomainError("ln of non-positive values"));
        }
        let lo = if self.lo == T::one() {
            T::zero()
        } else {
            self.lo.ln().next_down().next_down()
        };
        let hi = if self.hi == T::one() {
            T::zero()
        } else {
            self.hi.ln().next_up().next_up()
        };
        Self::checked(lo, hi)
    }

    pub fn exp(&self) -> Result<Self, IntervalError> {
        let lo = if self.lo == T::zero() {
            T::one()
        } else {
            self.lo.exp().next_down().next_down().max(T::zero())
        };
        let hi = if self.hi == T::zero() {
            T::one()
        } else {
            self.hi.exp().next_up().next_up()
        };
        Self::checked(lo, hi)
    }

    /// Splits at the representable number nearest to the exact midpoint.
    ///
    /// Returns `None` when no representable number lies strictly inside.
    pub fn split_at_midpoint(&self) -> Option<(Self, Self)> {
        // lo/2 and hi/2 are exact away from the subnormal range, so the sum
        // is the correctly rounded midpoint.
        let p = self.lo * T::half() + self.hi * T::half();
        (self.lo < p && p < self.hi).then_some((
            Self { lo: self.lo, hi: p },
            Self { lo: p, hi: self.hi },
        ))
    }
}

pub fn arith<T: Scalar>(
    op: ArithOp,
    a: &Interval<T>,
    b: &Interval<T>,
) -> Result<Interval<T>, IntervalError> {
    match op {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
        ArithOp::Div => a.div(b),
    }
}

impl<T: fmt::Debug> fmt::Debug for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl<T: fmt::Display> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

// Rust's float Display is the shortest string that round-trips.
impl<T: Scalar> Serialize for Interval<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.lo.to_string(), self.hi.to_string()].serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Interval<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(deserializer)?;
        let parse = |s: &str| {
            T::from_str(s).map_err(|_| D::Error::custom(format!("bad endpoint {s:?}")))
        };
        Interval::new(parse(&lo)?, parse(&hi)?).map_err(D::Error::custom)
    }
}

impl<T: Scalar> FromStr for Interval<T> {
    type Err = IntervalError;

    /// Parses `LO:HI` or a single value `X` (the point interval).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IntervalError::InvalidBounds {
            lo: s.to_string(),
            hi: String::new(),
        };
        let parse = |t: &str| T::from_str(t.trim()).map_err(|_| bad());
        match s.split_once(':') {
            Some((lo, hi)) => Interval::new(parse(lo)?, parse(hi)?),
            None => {
                let x = parse(s)?;
                Interval::new(x, x)
            }
        }
    }
}
