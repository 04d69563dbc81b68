//! Weighted digraphs representing a map on a partition, and the minimum
//! cycle mean machinery used to bound the expansion exponent.
//!
//! Karp's algorithm is run with outward rounding: path weights `F_k(v)` are
//! tabulated twice, once rounded down and once rounded up, and every Karp
//! quotient is formed as `(F_n(v)↓ - F_k(v)↑) / (n - k)` rounded down. The
//! returned value therefore never exceeds the exact minimum cycle mean, and
//! equals it whenever all sums are exact (e.g. integer weights).

use std::io;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::family::{FamilyError, MapFamily};
use crate::interval::{Interval, IntervalError};
use crate::partition::AdmissiblePartition;
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("partition has no elements")]
    EmptyPartition,
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("graph contains a loop at vertex {0}")]
    LoopPresent(usize),
    #[error("graph has no edges")]
    NoEdges,
    #[error("negative cycle under reduced weights; lambda is not a lower bound")]
    NegativeReducedCycle,
    #[error("invalid edge {source_vertex}->{target_vertex}: {reason}")]
    InvalidEdge {
        source_vertex: usize,
        target_vertex: usize,
        reason: &'static str,
    },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub source: usize,
    pub target: usize,
    pub weight: T,
}

/// A simple weighted digraph on vertices `0..n`, edges sorted by
/// `(source, target)` and indexed by source.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph<T> {
    n: usize,
    edges: Vec<Edge<T>>,
    offsets: Vec<usize>,
}

/// A cycle given by its vertex sequence; the closing edge runs from the last
/// vertex back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle<T> {
    pub vertices: Vec<usize>,
    /// Total weight, rounded upward.
    pub weight: T,
    /// Mean weight, rounded upward.
    pub mean: T,
}

impl<T> Cycle<T> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_loop(&self) -> bool {
        self.vertices.len() == 1
    }
}

impl<T: Scalar> WeightedDigraph<T> {
    pub fn new(n: usize, mut edges: Vec<Edge<T>>) -> Result<Self, GraphError> {
        for e in &edges {
            let invalid = |reason| GraphError::InvalidEdge {
                source_vertex: e.source,
                target_vertex: e.target,
                reason,
            };
            if e.source >= n || e.target >= n {
                return Err(invalid("vertex out of range"));
            }
            if !e.weight.is_finite() {
                return Err(invalid("weight not finite"));
            }
        }
        edges.sort_by_key(|e| (e.source, e.target));
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(GraphError::InvalidEdge {
                source_vertex: w[0].source,
                target_vertex: w[0].target,
                reason: "parallel edge",
            });
        }
        Ok(Self::from_sorted(n, edges))
    }

    fn from_sorted(n: usize, edges: Vec<Edge<T>>) -> Self {
        let mut offsets = vec![0; n + 1];
        for e in &edges {
            offsets[e.source + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        Self { n, edges, offsets }
    }

    /// Convenience constructor from `(source, target, weight)` triples.
    pub fn from_triples(n: usize, triples: &[(usize, usize, T)]) -> Result<Self, GraphError> {
        Self::new(
            n,
            triples
                .iter()
                .map(|&(source, target, weight)| Edge {
                    source,
                    target,
                    weight,
                })
                .collect(),
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn out_edges(&self, v: usize) -> &[Edge<T>] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<T> {
        let out = self.out_edges(source);
        out.binary_search_by_key(&target, |e| e.target)
            .ok()
            .map(|i| out[i].weight)
    }

    pub fn loop_count(&self) -> usize {
        self.edges.iter().filter(|e| e.source == e.target).count()
    }

    /// The same graph without length-1 cycles.
    pub fn remove_loops(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.source != e.target)
            .copied()
            .collect();
        Self::from_sorted(self.n, edges)
    }

    /// Subgraph induced by `vertices` (sorted ascending), relabelled `0..len`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        for &v in vertices {
            for e in self.out_edges(v) {
                if local[e.target] != usize::MAX {
                    edges.push(Edge {
                        source: local[v],
                        target: local[e.target],
                        weight: e.weight,
                    });
                }
            }
        }
        Self::from_sorted(vertices.len(), edges)
    }

    /// Upward-rounded total and mean weight of a closed vertex sequence.
    pub fn cycle(&self, vertices: Vec<usize>) -> Option<Cycle<T>> {
        if vertices.is_empty() {
            return None;
        }
        let mut weight = T::zero();
        for (i, &u) in vertices.iter().enumerate() {
            let v = vertices[(i + 1) % vertices.len()];
            weight = scalar::add_up(weight, self.weight(u, v)?);
        }
        let mean = scalar::div_up(weight, T::from_count(vertices.len()));
        Some(Cycle {
            vertices,
            weight,
            mean,
        })
    }

    /// Writes `src,dst,weight` lines with round-trip decimal weights.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "src,dst,weight")?;
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.source, e.target, e.weight)?;
        }
        Ok(())
    }
}

/// Lower bound of `ln |Df|` over `L(e)`, the part of `from` that can map
/// into `to`.
fn edge_weight<T: Scalar, F: MapFamily<T>>(
    family: &F,
    from: &Interval<T>,
    to: &Interval<T>,
) -> Result<T, GraphError> {
    let transition = family
        .preimage_branches(to)
        .iter()
        .filter_map(|b| b.intersect(from))
        .reduce(|a, b| a.hull(&b))
        .unwrap_or(*from);
    let slope = family.derivative(&transition)?.abs();
    Ok(slope.ln()?.lo())
}

/// Graph representation of `family` on the partition: an edge `i → j`
/// whenever `F(I_i) ∩ I_j ≠ ∅`, weighted by a lower bound of `ln |Df|` on
/// `I_i ∩ F⁻¹(I_j)`.
pub fn build_representation<T: Scalar, F: MapFamily<T>>(
    partition: &AdmissiblePartition<T>,
    family: &F,
) -> Result<WeightedDigraph<T>, GraphError> {
    if partition.is_empty() {
        return Err(GraphError::EmptyPartition);
    }
    let intervals = partition.intervals();
    let mut edges = Vec::with_capacity(3 * intervals.len());
    for (i, from) in intervals.iter().enumerate() {
        let image = family.image(from)?;
        for j in partition.overlapping(&image) {
            edges.push(Edge {
                source: i,
                target: j,
                weight: edge_weight(family, from, &intervals[j])?,
            });
        }
    }
    // edges are generated in (source, target) order
    Ok(WeightedDigraph::from_sorted(intervals.len(), edges))
}

/// Strongly connected components; each sorted ascending, listed by their
/// smallest vertex.
pub fn scc_decompose<T: Scalar>(g: &WeightedDigraph<T>) -> Vec<Vec<usize>> {
    let mut pg: DiGraph<(), ()> = DiGraph::with_capacity(g.n, g.edges.len());
    for _ in 0..g.n {
        pg.add_node(());
    }
    for e in &g.edges {
        pg.add_edge(NodeIndex::new(e.source), NodeIndex::new(e.target), ());
    }
    let mut components: Vec<Vec<usize>> = kosaraju_scc(&pg)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    components.sort_unstable_by_key(|c| c[0]);
    components
}

/// Minimum weight over loops, `+∞` and `None` if there are none.
pub fn min_loop<T: Scalar>(g: &WeightedDigraph<T>) -> (T, Option<Cycle<T>>) {
    let mut best: Option<&Edge<T>> = None;
    for e in g.edges.iter().filter(|e| e.source == e.target) {
        if best.is_none_or(|b| e.weight < b.weight) {
            best = Some(e);
        }
    }
    match best {
        Some(e) => (e.weight, g.cycle(vec![e.source])),
        None => (T::infinity(), None),
    }
}

/// Karp's minimum cycle mean of a strongly connected loop-free graph, with a
/// cycle traced back through the predecessor table.
pub fn karp_min_cycle_mean<T: Scalar>(g: &WeightedDigraph<T>) -> Result<(T, Cycle<T>), GraphError> {
    if g.edges.is_empty() {
        return Err(GraphError::NoEdges);
    }
    if let Some(e) = g.edges.iter().find(|e| e.source == e.target) {
        return Err(GraphError::LoopPresent(e.source));
    }
    if scc_decompose(g).len() != 1 {
        return Err(GraphError::NotStronglyConnected);
    }
    let table = KarpTable::build(g, 0, true);
    let (lambda, cycle) = table.minimum(g);
    Ok((lambda, cycle.expect("cycle requested")))
}

/// Karp's tables for one source vertex.
///
/// Only the last row of the lower path weights is kept; the upper rows are
/// regenerated while the Karp quotients are accumulated, so memory is
/// `O(n)` plus the optional `n × n` predecessor table.
#[derive(Debug, Clone)]
pub struct KarpTable<T> {
    n: usize,
    source: usize,
    /// `F_n(v)` rounded down.
    last_lower: Vec<T>,
    /// `P_k(v)` at `(k - 1) * n + v` for `k = 1..=n`.
    predecessors: Option<Vec<u32>>,
}

impl<T: Scalar> KarpTable<T> {
    /// First stage: path weights from `source` for lengths `1..=n`.
    pub fn build(g: &WeightedDigraph<T>, source: usize, with_predecessors: bool) -> Self {
        let n = g.n;
        let inf = T::infinity();
        let mut prev = vec![inf; n];
        let mut cur = vec![inf; n];
        prev[source] = T::zero();
        let mut predecessors = with_predecessors.then(|| vec![u32::MAX; n * n]);
        for k in 1..=n {
            cur.fill(inf);
            match predecessors.as_mut() {
                Some(pred) => {
                    let row = &mut pred[(k - 1) * n..k * n];
                    for e in &g.edges {
                        let fu = prev[e.source];
                        if fu < inf {
                            let c = scalar::add_down(fu, e.weight);
                            if c < cur[e.target] {
                                cur[e.target] = c;
                                row[e.target] = e.source as u32;
                            }
                        }
                    }
                }
                None => relax_row(&g.edges, &prev, &mut cur, scalar::add_down),
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        Self {
            n,
            source,
            last_lower: prev,
            predecessors,
        }
    }

    /// Second and third stages: the outward-rounded Karp minimum and, when
    /// predecessors were recorded, a cycle on the minimising walk.
    pub fn minimum(&self, g: &WeightedDigraph<T>) -> (T, Option<Cycle<T>>) {
        let n = self.n;
        let inf = T::infinity();
        let mut quotient_max = vec![T::neg_infinity(); n];
        let mut upper = vec![inf; n];
        let mut next = vec![inf; n];
        upper[self.source] = T::zero();
        for k in 0..n {
            let steps = T::from_count(n - k);
            for v in 0..n {
                let (fnv, fkv) = (self.last_lower[v], upper[v]);
                if fnv < inf && fkv < inf {
                    let q = scalar::div_down(scalar::sub_down(fnv, fkv), steps);
                    if q > quotient_max[v] {
                        quotient_max[v] = q;
                    }
                }
            }
            if k + 1 < n {
                next.fill(inf);
                relax_row(&g.edges, &upper, &mut next, scalar::add_up);
                std::mem::swap(&mut upper, &mut next);
            }
        }
        let mut best: Option<usize> = None;
        for v in 0..n {
            if self.last_lower[v] < inf && best.is_none_or(|b| quotient_max[v] < quotient_max[b]) {
                best = Some(v);
            }
        }
        let Some(end) = best else {
            return (inf, None);
        };
        let cycle = self
            .predecessors
            .as_ref()
            .and_then(|pred| g.cycle(trace_cycle(pred, n, end)));
        (quotient_max[end], cycle)
    }
}

#[inline]
fn relax_row<T: Scalar>(edges: &[Edge<T>], prev: &[T], cur: &mut [T], add: fn(T, T) -> T) {
    let inf = T::infinity();
    for e in edges {
        let fu = prev[e.source];
        if fu < inf {
            let c = add(fu, e.weight);
            if c < cur[e.target] {
                cur[e.target] = c;
            }
        }
    }
}

/// Walks `P` back from `v_n` and returns the first closed sub-walk found.
fn trace_cycle(pred: &[u32], n: usize, end: usize) -> Vec<usize> {
    let mut seen = vec![usize::MAX; n];
    let mut walk = vec![0usize; n + 1];
    walk[n] = end;
    seen[end] = n;
    let mut v = end;
    for k in (0..n).rev() {
        let u = pred[k * n + v] as usize;
        walk[k] = u;
        if seen[u] != usize::MAX {
            return walk[k..seen[u]].to_vec();
        }
        seen[u] = k;
        v = u;
    }
    unreachable!("a walk of n edges on n vertices repeats a vertex")
}

/// Result of the full minimum-cycle-mean computation.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCycleMean<T> {
    /// `min(loop_lambda, karp_lambda)`, `+∞` for an acyclic graph.
    pub lambda: T,
    pub cycle: Option<Cycle<T>>,
    pub loop_lambda: T,
    pub karp_lambda: T,
}

/// Minimum cycle mean over all cycles including loops: loops are handled
/// directly and Karp runs on every non-trivial component of the loop-free
/// graph.
pub fn min_cycle_mean_full<T: Scalar>(g: &WeightedDigraph<T>) -> MinCycleMean<T> {
    let (loop_lambda, loop_cycle) = min_loop(g);
    let loop_free = g.remove_loops();
    let mut karp_lambda = T::infinity();
    let mut karp_cycle = None;
    for component in scc_decompose(&loop_free) {
        if component.len() < 2 {
            continue;
        }
        let sub = loop_free.induced_subgraph(&component);
        let (lambda, cycle) = KarpTable::build(&sub, 0, true).minimum(&sub);
        if lambda < karp_lambda {
            karp_lambda = lambda;
            karp_cycle = cycle.map(|c| Cycle {
                vertices: c.vertices.iter().map(|&v| component[v]).collect(),
                ..c
            });
        }
    }
    let (lambda, cycle) = if karp_lambda < loop_lambda {
        (karp_lambda, karp_cycle)
    } else {
        (loop_lambda, loop_cycle)
    };
    MinCycleMean {
        lambda,
        cycle,
        loop_lambda,
        karp_lambda,
    }
}

/// Minimum cycle mean only, without predecessor tables (O(n) memory per
/// component).
pub fn min_cycle_mean_value<T: Scalar>(g: &WeightedDigraph<T>) -> T {
    let (mut lambda, _) = min_loop(g);
    let loop_free = g.remove_loops();
    for component in scc_decompose(&loop_free) {
        if component.len() < 2 {
            continue;
        }
        let sub = loop_free.induced_subgraph(&component);
        let (l, _) = KarpTable::build(&sub, 0, false).minimum(&sub);
        lambda = lambda.min(l);
    }
    lambda
}

/// Largest extra improvement tolerated in the detection round of
/// [`compute_c`], relative to `1 + |distance|`.
const NEGATIVE_CYCLE_TOLERANCE: f64 = 1e-9;

/// Constant `C ∈ (0, 1]` such that every path `Γ` satisfies
/// `w(Γ) - |Γ| λ ≥ ln C`, given `λ` not above the minimum cycle mean.
///
/// Reduced weights `w(e) - λ` are rounded down and relaxed from every vertex
/// at once (the empty path contributes 0); `|V|` rounds cover all simple
/// paths. An extra round that still improves a distance beyond rounding
/// noise reports [`GraphError::NegativeReducedCycle`].
pub fn compute_c<T: Scalar>(g: &WeightedDigraph<T>, lambda: T) -> Result<T, GraphError> {
    if !lambda.is_finite() {
        return Ok(T::one());
    }
    let reduced: Vec<T> = g
        .edges
        .iter()
        .map(|e| scalar::sub_down(e.weight, lambda))
        .collect();
    let mut dist = vec![T::zero(); g.n];
    for _ in 0..g.n {
        let mut changed = false;
        for (e, &w) in g.edges.iter().zip(&reduced) {
            let c = scalar::add_down(dist[e.source], w);
            if c < dist[e.target] {
                dist[e.target] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let tolerance = T::from_f64_nearest(NEGATIVE_CYCLE_TOLERANCE);
    for (e, &w) in g.edges.iter().zip(&reduced) {
        let c = scalar::add_down(dist[e.source], w);
        let d = dist[e.target];
        if c < d && d - c > tolerance * (T::one() + d.abs()) {
            return Err(GraphError::NegativeReducedCycle);
        }
    }
    let shortest = dist.iter().copied().fold(T::zero(), T::min);
    Ok(Interval::point(shortest).exp()?.lo().min(T::one()))
}
