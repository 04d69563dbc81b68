//! Admissible partitions of `I ∖ Δ`: uniform, derivative-scaled and
//! split-refined.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;

use thiserror::Error;

use crate::family::{CriticalNeighbourhood, MapFamily};
use crate::interval::Interval;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("{k} intervals cannot cover {components} components of I∖Δ")]
    TooFewIntervals { k: usize, components: usize },
    #[error("component {0} is too narrow for the requested number of intervals")]
    Unrepresentable(String),
}

/// Cell-density functions for derivative-scaled partitions: interval sizes
/// are made roughly proportional to `1 / γ(|f'|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gamma {
    /// `1 / exp(x)`
    InverseExp,
    /// `1`, the uniform partition
    Constant,
    Linear,
    Square,
    Cube,
    Exp,
    /// `exp(exp(x))`
    DoubleExp,
}

impl Gamma {
    pub const ALL: [Gamma; 7] = [
        Gamma::InverseExp,
        Gamma::Constant,
        Gamma::Linear,
        Gamma::Square,
        Gamma::Cube,
        Gamma::Exp,
        Gamma::DoubleExp,
    ];

    pub fn from_index(i: i32) -> Option<Self> {
        Some(match i {
            -1 => Gamma::InverseExp,
            0 => Gamma::Constant,
            1 => Gamma::Linear,
            2 => Gamma::Square,
            3 => Gamma::Cube,
            4 => Gamma::Exp,
            5 => Gamma::DoubleExp,
            _ => return None,
        })
    }

    pub fn index(self) -> i32 {
        match self {
            Gamma::InverseExp => -1,
            Gamma::Constant => 0,
            Gamma::Linear => 1,
            Gamma::Square => 2,
            Gamma::Cube => 3,
            Gamma::Exp => 4,
            Gamma::DoubleExp => 5,
        }
    }

    /// `ln γ(x)` for `x > 0`; working in log space keeps `exp(exp(x))` finite.
    pub fn ln_density(self, x: f64) -> f64 {
        match self {
            Gamma::InverseExp => -x,
            Gamma::Constant => 0.0,
            Gamma::Linear => x.ln(),
            Gamma::Square => 2.0 * x.ln(),
            Gamma::Cube => 3.0 * x.ln(),
            Gamma::Exp => x,
            Gamma::DoubleExp => x.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Uniform,
    DerivativeScaled(Gamma),
    Refined,
}

/// Ordered closed intervals covering `I ∖ Δ` with pairwise disjoint
/// interiors, none containing a critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePartition<T> {
    intervals: Vec<Interval<T>>,
    provenance: Provenance,
}

impl<T: Scalar> AdmissiblePartition<T> {
    /// Wraps intervals without checking admissibility; see [`validate`].
    pub fn from_intervals(intervals: Vec<Interval<T>>, provenance: Provenance) -> Self {
        Self {
            intervals,
            provenance,
        }
    }

    pub fn intervals(&self) -> &[Interval<T>] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Indices of all elements containing `x`: one, or two at a shared endpoint.
    pub fn locate(&self, x: T) -> Vec<usize> {
        let start = self.intervals.partition_point(|iv| iv.hi() < x);
        (start..self.intervals.len())
            .take_while(|&i| self.intervals[i].lo() <= x)
            .collect()
    }

    /// Indices of all elements meeting the closed interval `j`.
    pub fn overlapping(&self, j: &Interval<T>) -> std::ops::Range<usize> {
        let start = self.intervals.partition_point(|iv| iv.hi() < j.lo());
        let end = self.intervals.partition_point(|iv| iv.lo() <= j.hi());
        start..end.max(start)
    }

    /// Writes `index,lo,hi` lines with round-trip decimal endpoints.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,lo,hi")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            writeln!(out, "{i},{},{}", iv.lo(), iv.hi())?;
        }
        Ok(())
    }
}

/// Splits `total` into integer shares proportional to `weights` (largest
/// remainder, ties to the leftmost), each share at least one.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let n = weights.len();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 && sum.is_finite() {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / n as f64; n]
    };
    let mut shares: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = shares.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the leftmost first among equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        shares[i] += 1;
    }
    // every component needs an interval; take from the largest share
    for i in 0..n {
        if shares[i] == 0 {
            let donor = (0..n).max_by_key(|&j| (shares[j], std::cmp::Reverse(j))).unwrap();
            shares[donor] -= 1;
            shares[i] = 1;
        }
    }
    shares
}

fn build_from_breaks<T: Scalar>(
    piece: &Interval<T>,
    breaks: impl IntoIterator<Item = T>,
    out: &mut Vec<Interval<T>>,
) -> Result<(), PartitionError> {
    let mut left = piece.lo();
    for x in breaks {
        if !(left < x && x < piece.hi()) {
            return Err(PartitionError::Unrepresentable(piece.to_string()));
        }
        out.push(Interval::new(left, x).expect("increasing breaks"));
        left = x;
    }
    out.push(Interval::new(left, piece.hi()).expect("increasing breaks"));
    Ok(())
}

/// `k` intervals of nearly equal length covering `domain ∖ delta`.
pub fn uniform_partition<T: Scalar>(
    domain: &Interval<T>,
    delta: &CriticalNeighbourhood<T>,
    k: usize,
) -> Result<AdmissiblePartition<T>, PartitionError> {
    let pieces = delta.complement_in(domain);
    if k < pieces.len() {
        return Err(PartitionError::TooFewIntervals {
            k,
            components: pieces.len(),
        });
    }
    let lengths: Vec<f64> = pieces.iter().map(|p| p.width().to_f64_lossy()).collect();
    let shares = apportion(k, &lengths);
    let mut intervals = Vec::with_capacity(k);
    for (piece, &m) in pieces.iter().zip(&shares) {
        let width = piece.hi() - piece.lo();
        let count = T::from_count(m);
        let breaks = (1..m).map(|i| piece.lo() + width * T::from_count(i) / count);
        build_from_breaks(piece, breaks, &mut intervals)?;
    }
    Ok(AdmissiblePartition::from_intervals(intervals, Provenance::Uniform))
}

/// Cells of the integration mesh per requested interval.
const MESH_CELLS_PER_INTERVAL: usize = 16;

/// Partition whose interval sizes follow `1 / γ(|f'|)`.
///
/// The density `γ(|f'(x)|)` is evaluated (non-rigorously) at cell midpoints
/// of a mesh with `16 k` cells and its cumulative integral is cut into
/// equal masses. Only the geometry is heuristic; admissibility is exact.
pub fn derivative_scaled_partition<T: Scalar, F: MapFamily<T>>(
    family: &F,
    domain: &Interval<T>,
    delta: &CriticalNeighbourhood<T>,
    k: usize,
    gamma: Gamma,
) -> Result<AdmissiblePartition<T>, PartitionError> {
    if gamma == Gamma::Constant {
        let mut p = uniform_partition(domain, delta, k)?;
        p.provenance = Provenance::DerivativeScaled(gamma);
        return Ok(p);
    }
    let pieces = delta.complement_in(domain);
    if k < pieces.len() {
        return Err(PartitionError::TooFewIntervals {
            k,
            components: pieces.len(),
        });
    }
    let a = family.parameters().mid();
    let lengths: Vec<f64> = pieces.iter().map(|p| p.width().to_f64_lossy()).collect();
    let cells = apportion(MESH_CELLS_PER_INTERVAL * k, &lengths);

    // log-masses per cell, per piece
    let mut log_masses: Vec<Vec<f64>> = Vec::with_capacity(pieces.len());
    for (piece, &c) in pieces.iter().zip(&cells) {
        let (lo, hi) = (piece.lo().to_f64_lossy(), piece.hi().to_f64_lossy());
        let h = (hi - lo) / c as f64;
        let masses = (0..c)
            .map(|i| {
                let x = lo + h * (i as f64 + 0.5);
                let slope = family
                    .derivative_point(a, T::from_f64_nearest(x))
                    .to_f64_lossy()
                    .abs();
                gamma.ln_density(slope) + h.ln()
            })
            .collect();
        log_masses.push(masses);
    }
    let peak = log_masses
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let masses: Vec<Vec<f64>> = log_masses
        .iter()
        .map(|v| v.iter().map(|m| (m - peak).exp()).collect())
        .collect();
    let totals: Vec<f64> = masses.iter().map(|v| v.iter().sum()).collect();
    let shares = apportion(k, &totals);

    let mut intervals = Vec::with_capacity(k);
    for ((piece, cell_mass), (&m, &total)) in pieces
        .iter()
        .zip(&masses)
        .zip(shares.iter().zip(&totals))
    {
        let (lo, hi) = (piece.lo().to_f64_lossy(), piece.hi().to_f64_lossy());
        let h = (hi - lo) / cell_mass.len() as f64;
        let mut breaks: Vec<T> = Vec::with_capacity(m.saturating_sub(1));
        let mut cell = 0;
        let mut before = 0.0;
        for j in 1..m {
            let target = total * j as f64 / m as f64;
            while cell + 1 < cell_mass.len() && before + cell_mass[cell] < target {
                before += cell_mass[cell];
                cell += 1;
            }
            let frac = if cell_mass[cell] > 0.0 {
                ((target - before) / cell_mass[cell]).clamp(0.0, 1.0)
            } else {
                0.5
            };
            let mut x = T::from_f64_nearest(lo + h * (cell as f64 + frac));
            // keep breaks strictly increasing and strictly inside the piece
            let floor = breaks.last().copied().unwrap_or(piece.lo());
            if x <= floor {
                x = floor.next_up();
            }
            breaks.push(x);
        }
        // walk back any break that crowded the right end
        let mut ceiling = piece.hi();
        for b in breaks.iter_mut().rev() {
            if *b >= ceiling {
                *b = ceiling.next_down();
            }
            ceiling = *b;
        }
        build_from_breaks(piece, breaks, &mut intervals)?;
    }
    Ok(AdmissiblePartition::from_intervals(
        intervals,
        Provenance::DerivativeScaled(gamma),
    ))
}

/// Replaces each indexed element by its two representable-midpoint halves.
///
/// Elements too narrow to split are kept. Returns the number of splits.
pub fn split_elements<T: Scalar>(
    p: &AdmissiblePartition<T>,
    indices: &BTreeSet<usize>,
) -> (AdmissiblePartition<T>, usize) {
    let mut intervals = Vec::with_capacity(p.len() + indices.len());
    let mut splits = 0;
    for (i, iv) in p.intervals.iter().enumerate() {
        match indices.contains(&i).then(|| iv.split_at_midpoint()).flatten() {
            Some((left, right)) => {
                intervals.push(left);
                intervals.push(right);
                splits += 1;
            }
            None => intervals.push(*iv),
        }
    }
    let provenance = if splits > 0 {
        Provenance::Refined
    } else {
        p.provenance
    };
    (AdmissiblePartition::from_intervals(intervals, provenance), splits)
}

/// Checks the three admissibility conditions against `family` and `delta`.
pub fn validate<T: Scalar, F: MapFamily<T>>(
    p: &AdmissiblePartition<T>,
    family: &F,
    delta: &CriticalNeighbourhood<T>,
) -> bool {
    if p.is_empty() {
        return false;
    }
    let mut sorted = p.intervals.clone();
    sorted.sort_by(|a, b| a.lo().partial_cmp(&b.lo()).unwrap());
    // (a) disjoint interiors
    if sorted.windows(2).any(|w| w[0].hi() > w[1].lo()) {
        return false;
    }
    // (b) no critical points
    let crit = family.critical_points();
    if sorted.iter().any(|iv| crit.iter().any(|&c| iv.contains(c))) {
        return false;
    }
    // (c) covers I ∖ Δ
    let mut blocks: Vec<Interval<T>> = Vec::new();
    for iv in sorted {
        match blocks.last_mut() {
            Some(last) if iv.lo() <= last.hi() => *last = last.hull(&iv),
            _ => blocks.push(iv),
        }
    }
    delta
        .complement_in(&family.domain())
        .iter()
        .all(|piece| blocks.iter().any(|b| b.contains_interval(piece)))
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma:{}", self.index())
    }
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let i: i32 = s.strip_prefix("gamma:").unwrap_or(s).parse().map_err(|_| format!("bad gamma index {s:?}"))?;
        Gamma::from_index(i).ok_or_else(|| format!("gamma index {i} outside -1..=5"))
    }
}
