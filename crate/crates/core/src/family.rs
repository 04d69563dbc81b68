//! Map families: outer enclosures of `f_a`, `Df_a` and `f_a^{-1}` over a
//! parameter set, and the critical neighbourhood they are certified outside.

use thiserror::Error;

use crate::interval::{Interval, IntervalError};
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid critical neighbourhood radius: {0}")]
    InvalidDelta(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// A finite union of open intervals with pairwise disjoint closures.
///
/// Components are stored by their endpoints, sorted left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalNeighbourhood<T> {
    components: Vec<Interval<T>>,
}

impl<T: Scalar> CriticalNeighbourhood<T> {
    /// Builds a neighbourhood from open components `(lo, hi)`, checking that
    /// closures are disjoint and lie strictly inside `domain`.
    pub fn new(mut components: Vec<Interval<T>>, domain: &Interval<T>) -> Result<Self, FamilyError> {
        components.sort_by(|a, b| a.lo().partial_cmp(&b.lo()).unwrap());
        for c in &components {
            if c.is_point() {
                return Err(FamilyError::InvalidDelta(format!("empty component {c}")));
            }
            if !(domain.lo() < c.lo() && c.hi() < domain.hi()) {
                return Err(FamilyError::InvalidDelta(format!(
                    "component {c} not contained in {domain}"
                )));
            }
        }
        for pair in components.windows(2) {
            if pair[0].hi() >= pair[1].lo() {
                return Err(FamilyError::InvalidDelta(format!(
                    "components {} and {} have overlapping closures",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { components })
    }

    /// The empty neighbourhood.
    pub fn empty() -> Self {
        Self { components: Vec::new() }
    }

    pub fn components(&self) -> &[Interval<T>] {
        &self.components
    }

    /// True if the closed interval `j` meets some open component.
    pub fn meets(&self, j: &Interval<T>) -> bool {
        self.components
            .iter()
            .any(|c| j.lo() < c.hi() && c.lo() < j.hi())
    }

    /// True if the point `x` lies in some open component.
    pub fn contains_point(&self, x: T) -> bool {
        self.components.iter().any(|c| c.lo() < x && x < c.hi())
    }

    /// The closed components of `domain ∖ Δ`, left to right.
    pub fn complement_in(&self, domain: &Interval<T>) -> Vec<Interval<T>> {
        let mut pieces = Vec::with_capacity(self.components.len() + 1);
        let mut left = domain.lo();
        for c in &self.components {
            pieces.push(Interval::new(left, c.lo()).expect("component inside domain"));
            left = c.hi();
        }
        pieces.push(Interval::new(left, domain.hi()).expect("component inside domain"));
        pieces
    }
}

/// The contract every map family supplies.
///
/// Enclosures are taken over all parameters in [`MapFamily::parameters`].
pub trait MapFamily<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    /// The phase space `I`.
    fn domain(&self) -> Interval<T>;

    /// The parameter set `ω`; a point interval encodes a single map.
    fn parameters(&self) -> Interval<T>;

    /// Critical points, independent of the parameter.
    fn critical_points(&self) -> Vec<T>;

    /// Outer enclosure of `{f_a(x) : a ∈ ω, x ∈ j}`.
    fn image(&self, j: &Interval<T>) -> Result<Interval<T>, FamilyError>;

    /// Outer enclosure of `{Df_a(x) : a ∈ ω, x ∈ j}`.
    fn derivative(&self, j: &Interval<T>) -> Result<Interval<T>, FamilyError>;

    /// Enclosures of the preimage of `j`, one per monotone branch, each
    /// clipped to the domain. Empty branches are omitted.
    fn preimage_branches(&self, j: &Interval<T>) -> Vec<Interval<T>>;

    /// The same family restricted to another parameter set.
    fn with_parameters(&self, omega: Interval<T>) -> Self
    where
        Self: Sized;

    /// Plain floating-point evaluation, for non-rigorous sampling only.
    fn eval_point(&self, a: T, x: T) -> T;

    /// Plain floating-point derivative, for non-rigorous use only.
    fn derivative_point(&self, a: T, x: T) -> T;

    /// `Δ = ⋃ (c - δ, c + δ)`, computed outward.
    fn critical_neighbourhood(&self, delta: T) -> Result<CriticalNeighbourhood<T>, FamilyError> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(FamilyError::InvalidDelta(format!("delta must be positive, got {delta}")));
        }
        let components = self
            .critical_points()
            .into_iter()
            .map(|c| Interval::new(scalar::sub_down(c, delta), scalar::add_up(c, delta)))
            .collect::<Result<Vec<_>, _>>()?;
        CriticalNeighbourhood::new(components, &self.domain())
    }

    fn check_in_domain(&self, j: &Interval<T>) -> Result<(), FamilyError> {
        if self.domain().contains_interval(j) {
            Ok(())
        } else {
            Err(FamilyError::DomainError(format!(
                "{j} is not contained in the domain {}",
                self.domain()
            )))
        }
    }
}

/// The quadratic family `f_a(x) = a - x²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFamily<T> {
    omega: Interval<T>,
    domain: Interval<T>,
}

impl<T: Scalar> QuadraticFamily<T> {
    /// The family on the default domain `[-2, 2]`.
    pub fn new(omega: Interval<T>) -> Self {
        let two = T::two();
        Self {
            omega,
            domain: Interval::new(-two, two).expect("valid domain"),
        }
    }

    pub fn with_domain(omega: Interval<T>, domain: Interval<T>) -> Self {
        Self { omega, domain }
    }

    /// A single map `f_a`.
    pub fn at(a: T) -> Self {
        Self::new(Interval::point(a))
    }
}

impl<T: Scalar> MapFamily<T> for QuadraticFamily<T> {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn domain(&self) -> Interval<T> {
        self.domain
    }

    fn parameters(&self) -> Interval<T> {
        self.omega
    }

    fn critical_points(&self) -> Vec<T> {
        vec![T::zero()]
    }

    fn image(&self, j: &Interval<T>) -> Result<Interval<T>, FamilyError> {
        self.check_in_domain(j)?;
        Ok(self.omega.sub(&j.sqr()?)?)
    }

    fn derivative(&self, j: &Interval<T>) -> Result<Interval<T>, FamilyError> {
        self.check_in_domain(j)?;
        Ok(j.scale(-T::two())?)
    }

    fn preimage_branches(&self, j: &Interval<T>) -> Vec<Interval<T>> {
        // x = ±sqrt(a - y)
        let lo = scalar::sub_down(self.omega.lo(), j.hi());
        let hi = scalar::sub_up(self.omega.hi(), j.lo());
        if hi < T::zero() || !lo.is_finite() || !hi.is_finite() {
            return Vec::new();
        }
        let radicand = Interval::new(lo.max(T::zero()), hi).expect("ordered bounds");
        let root = match radicand.sqrt() {
            Ok(r) => r,
            Err(_) => return Vec::new(),
        };
        let negative = root.neg();
        let left_half = Interval::new(self.domain.lo().min(T::zero()), T::zero()).ok();
        let right_half = Interval::new(T::zero(), self.domain.hi().max(T::zero())).ok();
        let mut branches = Vec::with_capacity(2);
        if let Some(b) = left_half
            .and_then(|h| negative.intersect(&h))
            .and_then(|b| b.intersect(&self.domain))
        {
            branches.push(b);
        }
        if let Some(b) = right_half
            .and_then(|h| root.intersect(&h))
            .and_then(|b| b.intersect(&self.domain))
        {
            branches.push(b);
        }
        branches
    }

    fn with_parameters(&self, omega: Interval<T>) -> Self {
        Self {
            omega,
            domain: self.domain,
        }
    }

    fn eval_point(&self, a: T, x: T) -> T {
        a - x * x
    }

    fn derivative_point(&self, _a: T, x: T) -> T {
        -T::two() * x
    }
}
