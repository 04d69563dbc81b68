//! Selective partition refinement and the end-to-end certified lower bound
//! on the expansion exponent.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::digraph::{self, Cycle, GraphError, WeightedDigraph};
use crate::family::{CriticalNeighbourhood, FamilyError, MapFamily};
use crate::interval::Interval;
use crate::orbit::{self, OrbitCertificate};
use crate::partition::{self, AdmissiblePartition, PartitionError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig<T> {
    /// Maximal partition size `K`.
    pub max_size: usize,
    pub stall_epsilon: f64,
    pub stall_runs: usize,
    /// Orbit proofs are attempted when the first interval of the minimising
    /// cycle is narrower than this.
    pub orbit_width_threshold: T,
    /// Also compute the constant `C`.
    pub with_c: bool,
}

impl<T: Scalar> Default for RefinementConfig<T> {
    fn default() -> Self {
        Self {
            max_size: 1000,
            stall_epsilon: 1e-10,
            stall_runs: 10,
            orbit_width_threshold: T::one(),
            with_c: false,
        }
    }
}

impl<T: Scalar> RefinementConfig<T> {
    pub fn with_max_size(max_size: usize) -> Self {
        Self {
            max_size,
            ..Self::default()
        }
    }

    fn check(&self, initial: usize) -> Result<(), ExpansionError> {
        if self.max_size < initial {
            return Err(ExpansionError::Config(format!(
                "K = {} is below the initial partition size {initial}",
                self.max_size
            )));
        }
        if !(self.stall_epsilon > 0.0) || self.stall_runs == 0 {
            return Err(ExpansionError::Config(
                "stall_epsilon must be positive and stall_runs at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The partition reached `K` intervals.
    SizeLimit,
    /// No interval on the cycle could be split further.
    NoSplit,
    /// The best bound stopped improving.
    Stalled,
    /// The graph has no cycles; the bound is `+∞`.
    NoCycles,
    /// Fixed partition, no refinement.
    Uniform,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::SizeLimit => "size_limit",
            StopReason::NoSplit => "no_split",
            StopReason::Stalled => "stalled",
            StopReason::NoCycles => "no_cycles",
            StopReason::Uniform => "uniform",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry<T> {
    pub size: usize,
    pub lambda: T,
}

/// Outcome of the refinement loop.
#[derive(Debug, Clone)]
pub struct Refinement<T: Scalar> {
    pub partition: AdmissiblePartition<T>,
    pub graph: WeightedDigraph<T>,
    /// Bound on the final partition.
    pub lambda: T,
    pub cycle: Option<Cycle<T>>,
    pub orbit: Option<OrbitCertificate<T>>,
    pub iterations: usize,
    pub trace: Vec<TraceEntry<T>>,
    pub stop_reason: StopReason,
}

/// Repeatedly splits the intervals along the minimising cycle.
pub fn refine_partition<T: Scalar, F: MapFamily<T>>(
    initial: AdmissiblePartition<T>,
    family: &F,
    delta: &CriticalNeighbourhood<T>,
    cfg: &RefinementConfig<T>,
) -> Result<Refinement<T>, ExpansionError> {
    cfg.check(initial.len())?;
    let point_parameter = family.parameters().is_point();
    let mut p = initial;
    let mut trace = Vec::new();
    let mut best = T::neg_infinity();
    let mut stalled = 0;
    let mut attempted: HashSet<(u64, u64, usize)> = HashSet::new();
    let mut orbit: Option<OrbitCertificate<T>> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let graph = digraph::build_representation(&p, family)?;
        let mcm = digraph::min_cycle_mean_full(&graph);
        let lambda = mcm.lambda;
        trace.push(TraceEntry {
            size: p.len(),
            lambda,
        });
        macro_rules! finish {
            ($reason:expr, $cycle:expr) => {
                return Ok(Refinement {
                    partition: p,
                    graph,
                    lambda,
                    cycle: $cycle,
                    orbit,
                    iterations,
                    trace,
                    stop_reason: $reason,
                })
            };
        }
        let Some(cycle) = mcm.cycle else {
            finish!(StopReason::NoCycles, None);
        };

        let first = p.intervals()[cycle.vertices[0]];
        if point_parameter && first.width() < cfg.orbit_width_threshold {
            let key = (
                first.lo().to_f64_lossy().to_bits(),
                first.hi().to_f64_lossy().to_bits(),
                cycle.len(),
            );
            if attempted.insert(key) {
                if let Ok(cert) = orbit::prove_periodic_orbit(family, delta, &first, cycle.len()) {
                    if orbit.as_ref().is_none_or(|o| cert.lambda_max < o.lambda_max) {
                        orbit = Some(cert);
                    }
                }
            }
        }

        if iterations > 1 {
            let scale = best.abs().to_f64_lossy().max(1e-30);
            let change = (lambda - best).abs().to_f64_lossy() / scale;
            if change < cfg.stall_epsilon {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        best = best.max(lambda);
        if stalled >= cfg.stall_runs {
            finish!(StopReason::Stalled, Some(cycle));
        }
        if p.len() >= cfg.max_size {
            finish!(StopReason::SizeLimit, Some(cycle));
        }

        let room = cfg.max_size - p.len();
        let chosen: BTreeSet<usize> = cycle
            .vertices
            .iter()
            .copied()
            .filter(|&v| p.intervals()[v].split_at_midpoint().is_some())
            .take(room)
            .collect();
        if chosen.is_empty() {
            finish!(StopReason::NoSplit, Some(cycle));
        }
        p = partition::split_elements(&p, &chosen).0;
    }
}

/// Certified lower bound with its provenance.
#[derive(Debug, Clone)]
pub struct ExpansionCertificate<T: Scalar> {
    pub family: String,
    pub omega: Interval<T>,
    pub delta: T,
    pub max_size: usize,
    /// Lower bound on the expansion exponent; `+∞` when the graph is acyclic.
    pub lambda: T,
    pub c: Option<T>,
    /// Smallest upper bound obtained from orbit proofs.
    pub lambda_max: Option<T>,
    pub orbit: Option<OrbitCertificate<T>>,
    pub final_partition_size: usize,
    pub iterations: usize,
    pub elapsed: f64,
    pub trace: Vec<TraceEntry<T>>,
    pub stop_reason: StopReason,
    /// `mean(γ) - λ` for the reported cycle.
    pub cycle_gap: Option<T>,
    pub cycle_length: Option<usize>,
}

fn number<T: Scalar>(x: T) -> Value {
    if x.is_finite() {
        json!(x.to_f64_lossy())
    } else if x > T::zero() {
        json!("inf")
    } else {
        json!("-inf")
    }
}

impl<T: Scalar> ExpansionCertificate<T> {
    /// Flat JSON record.
    pub fn to_json(&self) -> Value {
        json!({
            "family": self.family,
            "omega_lo": number(self.omega.lo()),
            "omega_hi": number(self.omega.hi()),
            "delta": number(self.delta),
            "K": self.max_size,
            "k_final": self.final_partition_size,
            "lambda": number(self.lambda),
            "C": self.c.map(number),
            "lambda_max": self.lambda_max.map(number),
            "period": self.orbit.as_ref().map(|o| o.period),
            "orbit_lo": self.orbit.as_ref().map(|o| number(o.seed.lo())),
            "orbit_hi": self.orbit.as_ref().map(|o| number(o.seed.hi())),
            "iterations": self.iterations,
            "stop_reason": self.stop_reason.as_str(),
            "elapsed_s": self.elapsed,
        })
    }

    fn assemble<F: MapFamily<T>>(
        family: &F,
        delta: T,
        max_size: usize,
        refinement: &Refinement<T>,
        with_c: bool,
        started: Instant,
    ) -> Result<Self, ExpansionError> {
        let c = if with_c && refinement.lambda.is_finite() {
            Some(digraph::compute_c(&refinement.graph, refinement.lambda)?)
        } else {
            None
        };
        let cycle = refinement.cycle.as_ref();
        Ok(Self {
            family: family.name().to_string(),
            omega: family.parameters(),
            delta,
            max_size,
            lambda: refinement.lambda,
            c,
            lambda_max: refinement.orbit.as_ref().map(|o| o.lambda_max),
            orbit: refinement.orbit.clone(),
            final_partition_size: refinement.partition.len(),
            iterations: refinement.iterations,
            elapsed: started.elapsed().as_secs_f64(),
            trace: refinement.trace.clone(),
            stop_reason: refinement.stop_reason,
            cycle_gap: cycle.map(|cy| cy.mean - refinement.lambda),
            cycle_length: cycle.map(|cy| cy.len()),
        })
    }
}

/// Initial partition size: at least 9 and one per component of `I ∖ Δ`.
pub fn initial_size<T: Scalar>(domain: &Interval<T>, delta: &CriticalNeighbourhood<T>) -> usize {
    delta.complement_in(domain).len().max(9)
}

/// Certifies a bound starting from `p0`, refining it when `refine` is given
/// and using it as is otherwise. Also returns the final partition and graph.
pub fn certify<T: Scalar, F: MapFamily<T>>(
    family: &F,
    delta: T,
    p0: AdmissiblePartition<T>,
    refine: Option<&RefinementConfig<T>>,
    with_c: bool,
) -> Result<(ExpansionCertificate<T>, Refinement<T>), ExpansionError> {
    let started = Instant::now();
    let (refinement, max_size) = match refine {
        Some(cfg) => {
            let nbhd = family.critical_neighbourhood(delta)?;
            (refine_partition(p0, family, &nbhd, cfg)?, cfg.max_size)
        }
        None => {
            let graph = digraph::build_representation(&p0, family)?;
            let mcm = digraph::min_cycle_mean_full(&graph);
            let k = p0.len();
            let refinement = Refinement {
                lambda: mcm.lambda,
                stop_reason: if mcm.cycle.is_some() {
                    StopReason::Uniform
                } else {
                    StopReason::NoCycles
                },
                cycle: mcm.cycle,
                trace: vec![TraceEntry {
                    size: k,
                    lambda: mcm.lambda,
                }],
                partition: p0,
                graph,
                orbit: None,
                iterations: 1,
            };
            (refinement, k)
        }
    };
    let cert = ExpansionCertificate::assemble(family, delta, max_size, &refinement, with_c, started)?;
    Ok((cert, refinement))
}

/// Full pipeline from a uniform partition of `initial_size` intervals.
pub fn expansion_lower_bound<T: Scalar, F: MapFamily<T>>(
    family: &F,
    delta: T,
    cfg: &RefinementConfig<T>,
) -> Result<ExpansionCertificate<T>, ExpansionError> {
    let nbhd = family.critical_neighbourhood(delta)?;
    let domain = family.domain();
    let p0 = partition::uniform_partition(&domain, &nbhd, initial_size(&domain, &nbhd))?;
    Ok(certify(family, delta, p0, Some(cfg), cfg.with_c)?.0)
}

/// Bound from a fixed partition without refinement.
pub fn expansion_on_partition<T: Scalar, F: MapFamily<T>>(
    family: &F,
    delta: T,
    p: AdmissiblePartition<T>,
    with_c: bool,
) -> Result<ExpansionCertificate<T>, ExpansionError> {
    Ok(certify(family, delta, p, None, with_c)?.0)
}

/// Bound on a uniform partition of `k` intervals.
pub fn expansion_uniform_baseline<T: Scalar, F: MapFamily<T>>(
    family: &F,
    delta: T,
    k: usize,
    with_c: bool,
) -> Result<ExpansionCertificate<T>, ExpansionError> {
    let nbhd = family.critical_neighbourhood(delta)?;
    let p = partition::uniform_partition(&family.domain(), &nbhd, k)?;
    expansion_on_partition(family, delta, p, with_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::QuadraticFamily;

    #[test]
    fn size_cap_is_respected() {
        let f = QuadraticFamily::at(1.9);
        let nbhd = f.critical_neighbourhood(0.01).unwrap();
        let p0 = partition::uniform_partition(&f.domain(), &nbhd, 10).unwrap();
        let cfg = RefinementConfig::with_max_size(10);
        let r = refine_partition(p0, &f, &nbhd, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.partition.len(), 10);
        assert_eq!(r.stop_reason, StopReason::SizeLimit);

        let p0 = partition::uniform_partition(&f.domain(), &nbhd, 10).unwrap();
        let r = refine_partition(p0, &f, &nbhd, &RefinementConfig::with_max_size(57)).unwrap();
        assert!(r.partition.len() <= 57);
    }

    #[test]
    fn rejects_small_k() {
        let f = QuadraticFamily::at(1.9);
        let nbhd = f.critical_neighbourhood(0.01).unwrap();
        let p0 = partition::uniform_partition(&f.domain(), &nbhd, 10).unwrap();
        let cfg = RefinementConfig::with_max_size(5);
        assert!(matches!(
            refine_partition(p0, &f, &nbhd, &cfg),
            Err(ExpansionError::Config(_))
        ));
    }

    #[test]
    fn trace_sizes_grow() {
        let f = QuadraticFamily::at(1.95);
        let cert = expansion_lower_bound(&f, 0.01, &RefinementConfig::with_max_size(200)).unwrap();
        assert!(cert.trace.windows(2).all(|w| w[0].size <= w[1].size));
        assert_eq!(cert.trace.last().unwrap().lambda, cert.lambda);
        assert!(cert.final_partition_size <= 200);
    }

    #[test]
    fn json_fields() {
        let f = QuadraticFamily::at(2.0);
        let cert = expansion_uniform_baseline(&f, 0.1, 20, true).unwrap();
        let v = cert.to_json();
        for key in [
            "family", "omega_lo", "omega_hi", "delta", "K", "k_final", "lambda", "C",
            "lambda_max", "period", "orbit_lo", "orbit_hi", "iterations", "stop_reason",
            "elapsed_s",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["stop_reason"], "uniform");
        assert!(v["lambda_max"].is_null());
    }

    #[test]
    fn initial_size_rule() {
        let f = QuadraticFamily::at(2.0);
        let nbhd = f.critical_neighbourhood(0.001).unwrap();
        assert_eq!(initial_size(&f.domain(), &nbhd), 9);
    }
}
