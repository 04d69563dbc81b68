//! Interval Newton proofs of periodic orbits and the upper bound on the
//! expansion exponent they provide.

use serde::Serialize;
use thiserror::Error;

use crate::family::{CriticalNeighbourhood, FamilyError, MapFamily};
use crate::interval::{Interval, IntervalError};
use crate::scalar::{self, Scalar};

/// Extra Newton steps applied to the contracted enclosure before the
/// exponent is bounded.
const TIGHTENING_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitFailure {
    #[error("the Newton derivative enclosure contains zero")]
    NewtonDerivativeContainsZero,
    #[error("the Newton image is not inside the seed")]
    NoContraction,
    #[error("the derivative of the iterate contains zero")]
    DerivativeContainsZero,
    #[error("iterate {0} may meet the critical neighbourhood")]
    HitsCriticalNeighbourhood(usize),
    #[error("iterate {0} left the domain")]
    ExplodedEnclosure(usize),
    #[error("orbit proofs need a single parameter value")]
    ParameterInterval,
    #[error("period must be positive")]
    ZeroPeriod,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// A proven period-`n` orbit through the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCertificate<T: Scalar> {
    pub seed: Interval<T>,
    pub period: usize,
    /// `ln |(f^n)'| / n` on the orbit, bounded above.
    pub lambda_max: T,
    /// Enclosures of the orbit points `x, f(x), …, f^{n-1}(x)`.
    pub orbit: Vec<Interval<T>>,
}

/// `[seed, f(seed), …, f^n(seed)]`, stopping with
/// [`OrbitFailure::ExplodedEnclosure`] once an iterate leaves the domain.
pub fn iterate_enclosure<T: Scalar, F: MapFamily<T>>(
    family: &F,
    seed: &Interval<T>,
    n: usize,
) -> Result<Vec<Interval<T>>, OrbitFailure> {
    let domain = family.domain();
    if !domain.contains_interval(seed) {
        return Err(OrbitFailure::ExplodedEnclosure(0));
    }
    let mut iterates = Vec::with_capacity(n + 1);
    iterates.push(*seed);
    for i in 1..=n {
        let next = family.image(&iterates[i - 1])?;
        if !domain.contains_interval(&next) {
            return Err(OrbitFailure::ExplodedEnclosure(i));
        }
        iterates.push(next);
    }
    Ok(iterates)
}

/// `(f^n)'` over `iterates[0]` by the chain rule along `iterates[..n]`.
fn chain_derivative<T: Scalar, F: MapFamily<T>>(
    family: &F,
    iterates: &[Interval<T>],
    n: usize,
) -> Result<Interval<T>, OrbitFailure> {
    let mut d = Interval::point(T::one());
    for j in &iterates[..n] {
        d = d.mul(&family.derivative(j)?)?;
    }
    Ok(d)
}

/// One interval Newton step for `g(x) = x - f^n(x)` on `x`.
///
/// Returns the Newton image and `(f^n)'` over `x`.
fn newton_step<T: Scalar, F: MapFamily<T>>(
    family: &F,
    x: &Interval<T>,
    n: usize,
) -> Result<(Interval<T>, Interval<T>), OrbitFailure> {
    let x0 = Interval::point(x.mid());
    let image = iterate_enclosure(family, &x0, n)?[n];
    let g0 = x0.sub(&image)?;
    let derivative = chain_derivative(family, &iterate_enclosure(family, x, n)?, n)?;
    let dg = Interval::point(T::one()).sub(&derivative)?;
    if dg.contains_zero() {
        return Err(OrbitFailure::NewtonDerivativeContainsZero);
    }
    Ok((x0.sub(&g0.div(&dg)?)?, derivative))
}

/// Attempts to prove that the seed contains exactly one point of period `n`
/// (not necessarily minimal) whose orbit avoids `delta`.
pub fn prove_periodic_orbit<T: Scalar, F: MapFamily<T>>(
    family: &F,
    delta: &CriticalNeighbourhood<T>,
    seed: &Interval<T>,
    n: usize,
) -> Result<OrbitCertificate<T>, OrbitFailure> {
    if n == 0 {
        return Err(OrbitFailure::ZeroPeriod);
    }
    if !family.parameters().is_point() {
        return Err(OrbitFailure::ParameterInterval);
    }
    let (newton, derivative) = newton_step(family, seed, n)?;
    if !newton.subset_of_interior(seed) {
        return Err(OrbitFailure::NoContraction);
    }
    if derivative.contains_zero() {
        return Err(OrbitFailure::DerivativeContainsZero);
    }
    let seed_orbit = iterate_enclosure(family, seed, n)?;
    if let Some(i) = (1..=n).find(|&i| delta.meets(&seed_orbit[i])) {
        return Err(OrbitFailure::HitsCriticalNeighbourhood(i));
    }

    // The periodic point lies in every Newton image; shrink onto it.
    let mut x = newton;
    for _ in 0..TIGHTENING_STEPS {
        let next = match newton_step(family, &x, n) {
            Ok((nx, _)) => nx.intersect(&x),
            Err(_) => None,
        };
        match next {
            Some(nx) if nx != x => x = nx,
            _ => break,
        }
    }
    let orbit = iterate_enclosure(family, &x, n)?;
    let derivative = chain_derivative(family, &orbit, n)?;
    let growth = derivative.abs().ln()?.hi();
    let lambda_max = scalar::div_up(growth, T::from_count(n));
    Ok(OrbitCertificate {
        seed: *seed,
        period: n,
        lambda_max,
        orbit: orbit[..n].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::QuadraticFamily;

    fn iv(lo: f64, hi: f64) -> Interval<f64> {
        Interval::new(lo, hi).unwrap()
    }

    fn setup(a: f64) -> (QuadraticFamily<f64>, CriticalNeighbourhood<f64>) {
        let f = QuadraticFamily::at(a);
        let d = f.critical_neighbourhood(0.001).unwrap();
        (f, d)
    }

    #[test]
    fn fixed_point_of_chebyshev_map() {
        let (f, d) = setup(2.0);
        let cert = prove_periodic_orbit(&f, &d, &iv(0.99, 1.01), 1).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(cert.lambda_max >= ln2 && cert.lambda_max <= ln2 + 1e-9, "{}", cert.lambda_max);
        assert!(cert.orbit[0].contains(1.0));
        assert_eq!(cert.period, 1);
    }

    #[test]
    fn iterate_examples() {
        let f = QuadraticFamily::at(2.0);
        let it = iterate_enclosure(&f, &iv(1.0, 1.0), 2).unwrap();
        assert_eq!(it, vec![iv(1.0, 1.0); 3]);
        let it = iterate_enclosure(&f, &iv(0.5, 0.5), 1).unwrap();
        assert!(it[1].contains(1.75));
        let g = QuadraticFamily::at(2.5);
        assert_eq!(
            iterate_enclosure(&g, &iv(0.0, 0.0), 3),
            Err(OrbitFailure::ExplodedEnclosure(1))
        );
    }

    #[test]
    fn failure_reasons() {
        // x = -2 is a fixed point of f_2 with derivative 4; seed away from it
        let (f, d) = setup(2.0);
        assert_eq!(
            prove_periodic_orbit(&f, &d, &iv(0.3, 0.4), 1),
            Err(OrbitFailure::NoContraction)
        );
        // g' = 1 + 2x vanishes at x = -1/2
        assert_eq!(
            prove_periodic_orbit(&f, &d, &iv(-0.6, -0.4), 1),
            Err(OrbitFailure::NewtonDerivativeContainsZero)
        );
        // f_0 fixes 0 with derivative 0, so g' = 1 and Newton contracts
        let g = QuadraticFamily::at(0.0);
        let e = CriticalNeighbourhood::empty();
        assert_eq!(
            prove_periodic_orbit(&g, &e, &iv(-0.1, 0.1), 1),
            Err(OrbitFailure::DerivativeContainsZero)
        );
        // f_{1/2} fixes (sqrt 3 - 1) / 2, which lies inside a
        // neighbourhood of radius 1/2
        let h = QuadraticFamily::at(0.5);
        let wide = h.critical_neighbourhood(0.5).unwrap();
        let fixed = (-1.0 + 3.0_f64.sqrt()) / 2.0;
        assert_eq!(
            prove_periodic_orbit(&h, &wide, &iv(fixed - 0.01, fixed + 0.01), 1),
            Err(OrbitFailure::HitsCriticalNeighbourhood(1))
        );
        let wide_omega = QuadraticFamily::new(iv(1.9, 2.0));
        assert_eq!(
            prove_periodic_orbit(&wide_omega, &d, &iv(0.99, 1.01), 1),
            Err(OrbitFailure::ParameterInterval)
        );
        assert_eq!(
            prove_periodic_orbit(&f, &d, &iv(0.99, 1.01), 0),
            Err(OrbitFailure::ZeroPeriod)
        );
    }

    #[test]
    fn period_two_orbit() {
        // f_2 has the 2-cycle (1 ± sqrt 5) / 2 with multiplier -4
        let (f, d) = setup(2.0);
        let p = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let cert = prove_periodic_orbit(&f, &d, &iv(p - 1e-4, p + 1e-4), 2).unwrap();
        let expected = 4.0_f64.ln() / 2.0;
        assert!(cert.lambda_max >= expected && cert.lambda_max - expected < 1e-9);
    }
}
