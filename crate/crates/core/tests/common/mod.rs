//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use unifexp::interval::ArithOp;
use unifexp::Interval64;

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Largest `f64` not above `q`.
pub fn floor_f64(q: &BigRational) -> f64 {
    let mut r = f64_nearest(q);
    while rational(r) > *q {
        r = r.next_down();
    }
    r
}

fn f64_nearest(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap();
        let d = q.denom().to_f64().unwrap();
        n / d
    })
}

pub fn parse_decimal(s: &str) -> BigRational {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let denom = BigInt::from(10u32).pow(frac.len() as u32);
    let q = BigRational::new(numer, denom);
    if neg {
        -q
    } else {
        q
    }
}

pub fn in_interval(iv: &Interval64, q: &BigRational) -> bool {
    rational(iv.lo()) <= *q && *q <= rational(iv.hi())
}

/// Endpoint magnitudes spread over many binades, with zero-straddling,
/// point and one-ulp-wide intervals mixed in.
pub fn random_interval<R: Rng>(rng: &mut R) -> Interval64 {
    let scalar = |rng: &mut R| {
        let m: f64 = rng.gen_range(0.5..1.0);
        let e: i32 = rng.gen_range(-40..40);
        let s = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        s * m * 2f64.powi(e)
    };
    let (lo, hi) = match rng.gen_range(0..6) {
        0 => {
            let x = scalar(rng);
            (x, x)
        }
        1 => {
            let x = scalar(rng);
            (x, x.next_up())
        }
        2 => {
            let x = scalar(rng).abs();
            (-scalar(rng).abs(), x)
        }
        3 => {
            let x: f64 = rng.gen_range(-4.0..4.0);
            let w: f64 = rng.gen_range(0.0..1.0);
            (x, x + w)
        }
        _ => {
            let (a, b) = (scalar(rng), scalar(rng));
            (a.min(b), a.max(b))
        }
    };
    Interval64::new(lo, hi).expect("ordered finite endpoints")
}

pub fn positive_interval<R: Rng>(rng: &mut R) -> Interval64 {
    let iv = random_interval(rng).abs();
    if iv.lo() > 0.0 {
        iv
    } else {
        Interval64::new(f64::MIN_POSITIVE * 4.0, iv.hi().max(1e-300)).unwrap()
    }
}

/// A member of `iv`: an endpoint or a uniform draw between them.
pub fn sample<R: Rng>(rng: &mut R, iv: &Interval64) -> f64 {
    match rng.gen_range(0..5) {
        0 => iv.lo(),
        1 => iv.hi(),
        _ => {
            let t: f64 = rng.gen_range(0.0..=1.0);
            (iv.lo() + t * (iv.hi() - iv.lo())).clamp(iv.lo(), iv.hi())
        }
    }
}

pub fn exact_op(op: ArithOp, x: &BigRational, y: &BigRational) -> BigRational {
    match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x / y,
    }
}

#[derive(Debug, Default)]
pub struct ContainmentReport {
    pub checks: usize,
    pub violations: Vec<String>,
}

impl ContainmentReport {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.violations.len() < 20 {
            self.violations.push(what());
        }
    }
}

/// `ln` of a point with a correctly rounded reference bracketed by the
/// documented sub-ulp error of the platform logarithm.
fn ln_reference_bracket(x: f64) -> (f64, f64) {
    if x == 1.0 {
        return (0.0, 0.0);
    }
    let y = x.ln();
    (y.next_down(), y.next_up())
}

/// `trials` random cases, each checked at `samples` sample points.
///
/// Arithmetic, squaring, absolute value and square roots are checked
/// exactly in rationals; logarithms against a one-ulp bracket of the
/// platform `ln`.
pub fn containment_suite<R: Rng>(rng: &mut R, trials: usize, samples: usize) -> ContainmentReport {
    let mut report = ContainmentReport::default();
    let ops = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div];
    for t in 0..trials {
        match t % 8 {
            0..=3 => {
                let op = ops[t % 4];
                let a = random_interval(rng);
                let b = random_interval(rng);
                let Ok(r) = unifexp::interval::arith(op, &a, &b) else {
                    report.record(op == ArithOp::Div && b.contains_zero(), || {
                        format!("{op:?} {a:?} {b:?} failed")
                    });
                    continue;
                };
                for _ in 0..samples {
                    let (x, y) = (sample(rng, &a), sample(rng, &b));
                    let exact = exact_op(op, &rational(x), &rational(y));
                    report.record(in_interval(&r, &exact), || {
                        format!("{op:?}: {x:e} {y:e} not in {r:?}")
                    });
                }
            }
            4 => {
                let a = random_interval(rng);
                let (abs, sqr) = (a.abs(), a.sqr());
                for _ in 0..samples {
                    let x = sample(rng, &a);
                    let q = rational(x);
                    report.record(in_interval(&abs, &q.abs()), || format!("abs {x:e} {abs:?}"));
                    if let Ok(s) = &sqr {
                        report.record(in_interval(s, &(&q * &q)), || format!("sqr {x:e} {s:?}"));
                    }
                }
            }
            5 | 6 => {
                let a = positive_interval(rng);
                let r = a.sqrt().expect("sqrt of a positive interval");
                for _ in 0..samples {
                    let x = sample(rng, &a);
                    // lo <= sqrt(x) <= hi  iff  lo^2 <= x <= hi^2
                    let q = rational(x);
                    let (lo, hi) = (rational(r.lo()), rational(r.hi()));
                    let ok = r.lo() >= 0.0 && &lo * &lo <= q && q <= &hi * &hi;
                    report.record(ok, || format!("sqrt {x:e} not in {r:?}"));
                }
            }
            _ => {
                let a = positive_interval(rng);
                let r = a.ln().expect("ln of a positive interval");
                for _ in 0..samples {
                    let x = sample(rng, &a);
                    let (lo, hi) = ln_reference_bracket(x);
                    report.record(r.lo() <= lo && hi <= r.hi(), || {
                        format!("ln {x:e} not in {r:?}")
                    });
                }
            }
        }
    }
    report
}

pub struct ReferenceRow {
    pub x: f64,
    pub ln: BigRational,
    pub sqrt: BigRational,
}

pub fn reference_values() -> Vec<ReferenceRow> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/ln_sqrt_reference.csv");
    let text = std::fs::read_to_string(path).expect("reference fixture");
    text.lines()
        .skip(1)
        .map(|line| {
            let mut f = line.split(',');
            let x = f.next().unwrap().parse().unwrap();
            let ln = parse_decimal(f.next().unwrap());
            let sqrt = parse_decimal(f.next().unwrap());
            ReferenceRow { x, ln, sqrt }
        })
        .collect()
}

/// Checks the logarithm and square root enclosures of every fixture point
/// and returns the failures.
pub fn reference_violations() -> Vec<String> {
    // each reference value carries at most 1e-40 relative rounding
    let slack = |q: &BigRational| q.abs() * BigRational::new(1.into(), BigInt::from(10).pow(40));
    let mut bad = Vec::new();
    for row in reference_values() {
        let p = Interval64::point(row.x);
        let ln = p.ln().unwrap();
        let sqrt = p.sqrt().unwrap();
        let s = slack(&row.ln) + BigRational::new(1.into(), BigInt::from(10).pow(48));
        if rational(ln.lo()) > &row.ln - &s || rational(ln.hi()) < &row.ln + &s {
            bad.push(format!("ln {} -> {ln:?}", row.x));
        }
        let s = slack(&row.sqrt);
        if rational(sqrt.lo()) > &row.sqrt - &s || rational(sqrt.hi()) < &row.sqrt + &s {
            bad.push(format!("sqrt {} -> {sqrt:?}", row.x));
        }
    }
    bad
}

/// A loop-free strongly connected digraph: a Hamiltonian cycle through a
/// random permutation plus random extra arcs.
pub fn random_strongly_connected<R: Rng>(
    rng: &mut R,
    n: usize,
    density: f64,
    mut weight: impl FnMut(&mut R) -> f64,
) -> Vec<(usize, usize, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut present = vec![false; n * n];
    for i in 0..n {
        present[perm[i] * n + perm[(i + 1) % n]] = true;
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                present[u * n + v] = true;
            }
        }
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if present[u * n + v] && (u != v || n == 1) {
                edges.push((u, v, weight(rng)));
            }
        }
    }
    edges
}

/// Every simple cycle as a vertex list starting at its smallest vertex.
pub fn simple_cycles(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, _) in edges {
        adj[u].push(v);
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut path = vec![start];
        let mut on_path = vec![false; n];
        on_path[start] = true;
        extend(start, start, &adj, &mut path, &mut on_path, &mut out);
    }
    out
}

fn extend(
    start: usize,
    v: usize,
    adj: &[Vec<usize>],
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    for &w in &adj[v] {
        if w == start {
            out.push(path.clone());
        } else if w > start && !on_path[w] {
            on_path[w] = true;
            path.push(w);
            extend(start, w, adj, path, on_path, out);
            path.pop();
            on_path[w] = false;
        }
    }
}

pub fn weight_of(edges: &[(usize, usize, f64)], u: usize, v: usize) -> f64 {
    edges
        .iter()
        .find(|e| e.0 == u && e.1 == v)
        .map(|e| e.2)
        .expect("edge present")
}

pub fn cycle_mean_exact(edges: &[(usize, usize, f64)], cycle: &[usize]) -> BigRational {
    let total: BigRational = (0..cycle.len())
        .map(|i| rational(weight_of(edges, cycle[i], cycle[(i + 1) % cycle.len()])))
        .fold(BigRational::zero(), |a, b| a + b);
    total / BigRational::from_integer(BigInt::from(cycle.len()))
}

/// Exact minimum cycle mean over all simple cycles, loops included.
pub fn brute_min_cycle_mean(n: usize, edges: &[(usize, usize, f64)]) -> Option<BigRational> {
    simple_cycles(n, edges)
        .iter()
        .map(|c| cycle_mean_exact(edges, c))
        .min()
}

/// Exact minimum of `w(Γ) - |Γ| λ` over all simple paths, the empty path
/// included.
pub fn brute_min_reduced_path(n: usize, edges: &[(usize, usize, f64)], lambda: f64) -> BigRational {
    let lambda = rational(lambda);
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u].push((v, rational(w) - &lambda));
    }
    fn walk(
        v: usize,
        acc: BigRational,
        adj: &[Vec<(usize, BigRational)>],
        seen: &mut [bool],
        best: &mut BigRational,
    ) {
        if acc < *best {
            *best = acc.clone();
        }
        for (w, r) in &adj[v] {
            if !seen[*w] {
                seen[*w] = true;
                walk(*w, &acc + r, adj, seen, best);
                seen[*w] = false;
            }
        }
    }
    let mut best = BigRational::zero();
    for s in 0..n {
        let mut seen = vec![false; n];
        seen[s] = true;
        walk(s, BigRational::zero(), &adj, &mut seen, &mut best);
    }
    // a path may also revisit its start once when it closes a cycle; those
    // are nonnegative under lambda <= min mean, so simple paths suffice
    best
}

/// Reachability closure, `reach[u][v]` iff a path of length >= 0 exists.
pub fn reachability(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (v, row) in r.iter_mut().enumerate() {
        row[v] = true;
    }
    for &(u, v, _) in edges {
        r[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// Samples trajectories of `f_a`, `a ∈ ω`, whose first `n <= 30` points stay
/// outside `Δ`, and checks `|(f^n)'(x)| >= C e^{λ n}` with a rigorous lower
/// bound on the left and a rigorous upper bound on the right.
///
/// Returns the number of trajectories checked and the failures.
pub fn trajectory_violations<R: Rng>(
    rng: &mut R,
    omega: &Interval64,
    delta: f64,
    lambda: f64,
    c: f64,
    wanted: usize,
) -> (usize, Vec<String>) {
    use unifexp::orbit::iterate_enclosure;
    use unifexp::{MapFamily, Quadratic64};
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut attempts = 0;
    while checked < wanted && attempts < 200 * wanted {
        attempts += 1;
        let a = rng.gen_range(omega.lo()..=omega.hi());
        let family = Quadratic64::at(a);
        let nbhd = family.critical_neighbourhood(delta).unwrap();
        let x = rng.gen_range(-a..=a);
        let n = rng.gen_range(1..=30);
        let Ok(orbit) = iterate_enclosure(&family, &Interval64::point(x), n) else {
            continue;
        };
        if orbit[..n].iter().any(|j| nbhd.meets(j)) {
            continue;
        }
        let mut d = Interval64::point(1.0);
        for j in &orbit[..n] {
            d = d.mul(&family.derivative(j).unwrap().abs()).unwrap();
        }
        let growth = Interval64::point(lambda)
            .scale(n as f64)
            .and_then(|e| e.exp())
            .and_then(|e| e.scale(c))
            .unwrap();
        checked += 1;
        if d.lo() < growth.hi() {
            bad.push(format!("a={a} x={x} n={n}: {} < {}", d.lo(), growth.hi()));
        }
    }
    (checked, bad)
}
