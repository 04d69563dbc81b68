mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unifexp::expansion::{
    expansion_lower_bound, expansion_uniform_baseline, ExpansionCertificate, RefinementConfig,
    StopReason,
};
use unifexp::orbit::{iterate_enclosure, prove_periodic_orbit, OrbitCertificate};
use unifexp::{Interval64, MapFamily, Quadratic64};

fn refined(omega: Interval64, delta: f64, k: usize, with_c: bool) -> ExpansionCertificate<f64> {
    let cfg = RefinementConfig {
        with_c,
        ..RefinementConfig::with_max_size(k)
    };
    expansion_lower_bound(&Quadratic64::new(omega), delta, &cfg).unwrap()
}

fn iv(lo: f64, hi: f64) -> Interval64 {
    Interval64::new(lo, hi).unwrap()
}

#[test]
fn bounds_hold_along_sampled_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for omega in [iv(1.5, 1.5), iv(1.7, 1.7), iv(1.9, 1.9), iv(1.99, 2.0), iv(2.0, 2.0)] {
        let cert = refined(omega, 0.01, 300, true);
        let c = cert.c.expect("C requested");
        assert!(c > 0.0 && c <= 1.0);
        if !cert.lambda.is_finite() {
            continue;
        }
        let (checked, bad) = trajectory_violations(&mut rng, &omega, 0.01, cert.lambda, c, 300);
        assert!(checked >= 300, "{omega:?}: only {checked} trajectories");
        assert!(bad.is_empty(), "{omega:?}: {bad:#?}");
    }
}

#[test]
fn refinement_trace_and_certificate_are_consistent() {
    for a in [1.6, 1.8, 1.95, 2.0] {
        let cert = refined(Interval64::point(a), 0.001, 400, false);
        assert!(cert.trace.windows(2).all(|w| w[0].size <= w[1].size));
        assert_eq!(cert.trace.last().unwrap().size, cert.final_partition_size);
        assert_eq!(cert.trace.last().unwrap().lambda, cert.lambda);
        assert_eq!(cert.iterations, cert.trace.len());
        assert!(cert.final_partition_size <= 400);
        if cert.stop_reason == StopReason::SizeLimit {
            assert_eq!(cert.final_partition_size, 400);
        }
        if let Some(m) = cert.lambda_max {
            assert!(cert.lambda <= m, "{a}: {} > {m}", cert.lambda);
        }
        if let Some(gap) = cert.cycle_gap {
            assert!(gap >= 0.0);
        }
    }
}

#[test]
fn identical_inputs_give_identical_certificates() {
    let strip = |c: ExpansionCertificate<f64>| {
        let mut v = c.to_json();
        v.as_object_mut().unwrap().remove("elapsed_s");
        v
    };
    let first = strip(refined(iv(1.7, 1.72), 0.001, 300, true));
    let second = strip(refined(iv(1.7, 1.72), 0.001, 300, true));
    assert_eq!(first, second);
}

#[test]
fn chebyshev_bound_stays_below_ln_2() {
    for k in [50, 200, 600] {
        let cert = refined(Interval64::point(2.0), 0.001, k, false);
        assert!(cert.lambda <= std::f64::consts::LN_2 + 1e-12, "{k}: {}", cert.lambda);
    }
    let cert = expansion_uniform_baseline(&Quadratic64::at(2.0), 0.001, 2000, false).unwrap();
    assert!(cert.lambda <= std::f64::consts::LN_2 + 1e-12);
}

#[test]
fn refinement_improves_on_its_start() {
    let cert = refined(Interval64::point(1.9), 0.001, 500, false);
    let first = cert.trace.first().unwrap().lambda;
    assert!(cert.trace.iter().any(|t| t.lambda > first));
}

/// A period-`n` point of `f_a` found by plain Newton iteration.
fn periodic_point(a: f64, n: usize, mut x: f64) -> Option<f64> {
    let f = Quadratic64::at(a);
    for _ in 0..100 {
        let (mut y, mut d) = (x, 1.0);
        for _ in 0..n {
            d *= f.derivative_point(a, y);
            y = f.eval_point(a, y);
        }
        let step = (y - x) / (d - 1.0);
        x -= step;
        if !x.is_finite() || x.abs() > 2.0 {
            return None;
        }
        if step.abs() < 1e-15 {
            return Some(x);
        }
    }
    None
}

fn some_orbits() -> Vec<(f64, OrbitCertificate<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut found = Vec::new();
    for &a in &[1.7, 1.88516, 1.95, 2.0] {
        let f = Quadratic64::at(a);
        let delta = f.critical_neighbourhood(0.001).unwrap();
        for n in 1..=8 {
            for _ in 0..5 {
                let Some(p) = periodic_point(a, n, rng.gen_range(-2.0..2.0)) else {
                    continue;
                };
                let seed = iv(p - 1e-10, p + 1e-10);
                if let Ok(cert) = prove_periodic_orbit(&f, &delta, &seed, n) {
                    found.push((a, cert));
                    break;
                }
            }
        }
    }
    found
}

#[test]
fn orbit_exponent_is_an_upper_bound() {
    let orbits = some_orbits();
    assert!(orbits.len() >= 16, "only {} orbits proven", orbits.len());
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (a, cert) in &orbits {
        let f = Quadratic64::at(*a);
        let n = cert.period;
        let enclosure = cert.orbit[0];
        for _ in 0..1000 {
            let x = rng.gen_range(enclosure.lo()..=enclosure.hi());
            let iterates = iterate_enclosure(&f, &Interval64::point(x), n).unwrap();
            let mut d = Interval64::point(1.0);
            for j in &iterates[..n] {
                d = d.mul(&f.derivative(j).unwrap()).unwrap();
            }
            let exponent = d.abs().ln().unwrap().hi() / n as f64;
            assert!(exponent <= cert.lambda_max + 1e-12, "a={a} n={n}");
        }
        // the proven enclosure really maps into itself under f^n
        let image = iterate_enclosure(&f, &enclosure, n).unwrap()[n];
        assert!(image.intersects(&enclosure));
    }
}

#[test]
fn orbit_proof_is_stable_under_seed_shrinking() {
    for (a, cert) in some_orbits() {
        let f = Quadratic64::at(a);
        let delta = f.critical_neighbourhood(0.001).unwrap();
        let p = cert.orbit[0].mid();
        let smaller = iv(p - 1e-12, p + 1e-12);
        let again = prove_periodic_orbit(&f, &delta, &smaller, cert.period)
            .unwrap_or_else(|e| panic!("a={a} n={}: {e}", cert.period));
        assert!((again.lambda_max - cert.lambda_max).abs() < 1e-8);
    }
}
