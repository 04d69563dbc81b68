//! Certified lower bounds on the uniform expansion exponent of
//! one-dimensional maps away from their critical points.
//!
//! Every bound is computed with outward-rounded interval arithmetic over a
//! generic [`Scalar`]; the aliases below fix the working precision.

pub mod digraph;
pub mod expansion;
pub mod family;
pub mod interval;
pub mod orbit;
pub mod partition;
pub mod scalar;
pub mod sweep;

pub use digraph::{Cycle, GraphError, MinCycleMean, WeightedDigraph};
pub use family::{CriticalNeighbourhood, FamilyError, MapFamily, QuadraticFamily};
pub use interval::{Interval, IntervalError};
pub use partition::{AdmissiblePartition, Gamma, PartitionError, Provenance};
pub use scalar::Scalar;

pub type Interval64 = Interval<f64>;
pub type Interval32 = Interval<f32>;
pub type Quadratic64 = QuadraticFamily<f64>;
pub type Quadratic32 = QuadraticFamily<f32>;
pub type Partition64 = AdmissiblePartition<f64>;
pub type Digraph64 = WeightedDigraph<f64>;
