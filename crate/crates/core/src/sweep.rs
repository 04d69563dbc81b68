//! Parameter sweeps: task generation, parallel execution with ordered
//! output, CSV/JSON rows and the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rust_decimal::Decimal;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::expansion::{self, ExpansionCertificate, ExpansionError, RefinementConfig};
use crate::family::{MapFamily, QuadraticFamily};
use crate::interval::Interval;
use crate::partition::{self, Gamma};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SweepError> {
    Err(SweepError::InvalidSpec(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Single,
    Grid,
    Subdiv,
    DeltaCompare,
    StrategyCompare,
    BaselineCompare,
}

impl FromStr for Mode {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "single" => Mode::Single,
            "grid" => Mode::Grid,
            "subdiv" | "interval-subdivision" => Mode::Subdiv,
            "delta-compare" => Mode::DeltaCompare,
            "strategy-compare" => Mode::StrategyCompare,
            "baseline-compare" => Mode::BaselineCompare,
            _ => return invalid(format!("unknown mode {s:?}")),
        })
    }
}

/// How the partition of a task is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Selective refinement up to `K` intervals.
    Refined,
    /// Fixed uniform partition of the given size.
    Uniform(usize),
    /// Fixed derivative-scaled partition of `K` intervals.
    Gamma(Gamma),
}

impl FromStr for Strategy {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "refined" {
            return Ok(Strategy::Refined);
        }
        if let Some(k) = s.strip_prefix("uniform:") {
            return match k.parse() {
                Ok(k) if k > 0 => Ok(Strategy::Uniform(k)),
                _ => invalid(format!("bad uniform size in {s:?}")),
            };
        }
        match s.parse::<Gamma>() {
            Ok(g) => Ok(Strategy::Gamma(g)),
            Err(_) => invalid(format!("unknown strategy {s:?}")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Refined => write!(f, "refined"),
            Strategy::Uniform(k) => write!(f, "uniform:{k}"),
            Strategy::Gamma(g) => write!(f, "{g}"),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Uniform size used by baseline comparisons unless overridden.
pub const DEFAULT_BASELINE_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub mode: Mode,
    pub family: String,
    /// Parameter range endpoints as given, kept in decimal for exact spans.
    pub omega_lo: String,
    pub omega_hi: String,
    pub deltas: Vec<f64>,
    #[serde(rename = "K")]
    pub max_size: usize,
    pub grid: usize,
    pub depth: u32,
    pub strategy: Strategy,
    pub with_c: bool,
    pub workers: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            family: "quadratic".into(),
            omega_lo: "2".into(),
            omega_hi: "2".into(),
            deltas: vec![0.001],
            max_size: 1000,
            grid: 1024,
            depth: 10,
            strategy: Strategy::Refined,
            with_c: false,
            workers: 1,
        }
    }
}

/// One unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub index: usize,
    pub omega: Interval<f64>,
    pub delta: f64,
    pub strategy: Strategy,
}

fn parse_decimal(s: &str) -> Result<Decimal, SweepError> {
    Decimal::from_str(s)
        .or_else(|_| Decimal::from_scientific(s))
        .or_else(|_| invalid(format!("not a decimal number: {s:?}")))
}

fn parse_f64(s: &str) -> Result<f64, SweepError> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => invalid(format!("not a finite number: {s:?}")),
    }
}

/// Parameters accepted by sweeps of the quadratic family.
pub const PARAMETER_RANGE: (f64, f64) = (1.4, 2.0);

/// `m + 1` points `lo + span·i/m`, with `span` the double nearest to the
/// exact decimal difference `hi - lo`.
pub fn grid_points(lo: &str, hi: &str, m: usize) -> Result<Vec<f64>, SweepError> {
    if m == 0 {
        return invalid("grid count must be positive");
    }
    let start = parse_f64(lo)?;
    let span = parse_f64(&(parse_decimal(hi)? - parse_decimal(lo)?).to_string())?;
    if span < 0.0 {
        return invalid(format!("empty range {lo}:{hi}"));
    }
    Ok((0..=m)
        .map(|i| start + span * i as f64 / m as f64)
        .collect())
}

impl SweepSpec {
    pub fn omega(&self) -> Result<Interval<f64>, SweepError> {
        let (lo, hi) = (parse_f64(&self.omega_lo)?, parse_f64(&self.omega_hi)?);
        Interval::new(lo, hi).or_else(|_| invalid(format!("bad parameter range {lo}:{hi}")))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.family != "quadratic" {
            return invalid(format!("unknown family {:?}", self.family));
        }
        let omega = self.omega()?;
        if !(PARAMETER_RANGE.0 <= omega.lo() && omega.hi() <= PARAMETER_RANGE.1) {
            return invalid(format!(
                "parameter range {omega} outside [{}, {}]",
                PARAMETER_RANGE.0, PARAMETER_RANGE.1
            ));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return invalid("deltas must be positive");
        }
        if self.max_size == 0 {
            return invalid("K must be positive");
        }
        if self.workers == 0 {
            return invalid("workers must be positive");
        }
        match self.mode {
            Mode::Grid | Mode::BaselineCompare if self.grid == 0 => invalid("grid count must be positive"),
            Mode::Subdiv if omega.is_point() => invalid("subdivision needs a parameter interval"),
            Mode::Subdiv if self.depth > 24 => invalid("subdivision depth at most 24"),
            Mode::DeltaCompare if self.deltas.len() < 2 => invalid("delta-compare needs at least two deltas"),
            _ => Ok(()),
        }
    }

    fn baseline_size(&self) -> usize {
        match self.strategy {
            Strategy::Uniform(k) => k,
            _ => DEFAULT_BASELINE_SIZE,
        }
    }

    pub fn tasks(&self) -> Result<Vec<Task>, SweepError> {
        self.validate()?;
        let omega = self.omega()?;
        let mut tasks = Vec::new();
        let mut push = |omega, delta, strategy| {
            tasks.push(Task {
                index: tasks.len(),
                omega,
                delta,
                strategy,
            })
        };
        for &delta in &self.deltas {
            match self.mode {
                Mode::Single => push(omega, delta, self.strategy),
                Mode::Grid | Mode::DeltaCompare => {
                    for a in grid_points(&self.omega_lo, &self.omega_hi, self.grid)? {
                        push(Interval::point(a), delta, self.strategy);
                    }
                }
                Mode::Subdiv => {
                    let ends = grid_points(&self.omega_lo, &self.omega_hi, 1 << self.depth)?;
                    for w in ends.windows(2) {
                        let piece = Interval::new(w[0], w[1])
                            .or_else(|_| invalid("subdivision below representable resolution"))?;
                        push(piece, delta, self.strategy);
                    }
                }
                Mode::StrategyCompare => {
                    for g in Gamma::ALL {
                        push(omega, delta, Strategy::Gamma(g));
                    }
                    push(omega, delta, Strategy::Refined);
                }
                Mode::BaselineCompare => {
                    let baseline = Strategy::Uniform(self.baseline_size());
                    for a in grid_points(&self.omega_lo, &self.omega_hi, self.grid)? {
                        push(Interval::point(a), delta, Strategy::Refined);
                        push(Interval::point(a), delta, baseline);
                    }
                }
            }
        }
        Ok(tasks)
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub a_lo: f64,
    pub a_hi: f64,
    pub delta: f64,
    pub max_size: usize,
    pub k_final: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_max: Option<f64>,
    pub period: Option<usize>,
    pub c: Option<f64>,
    pub iterations: Option<usize>,
    pub stop_reason: String,
    pub elapsed_s: f64,
    pub strategy: Strategy,
}

pub const CSV_HEADER: &str =
    "index,a_lo,a_hi,delta,K,k_final,lambda,lambda_max,period,C,iterations,stop_reason,elapsed_s,strategy";

fn cell<T: fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

impl SweepRow {
    pub fn is_failure(&self) -> bool {
        self.stop_reason.starts_with("error")
    }

    /// CSV record; floats use the shortest round-trip decimal form.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.index,
            self.a_lo,
            self.a_hi,
            self.delta,
            self.max_size,
            cell(self.k_final),
            cell(self.lambda),
            cell(self.lambda_max),
            cell(self.period),
            cell(self.c),
            cell(self.iterations),
            self.stop_reason,
            self.elapsed_s,
            self.strategy
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "index": self.index,
            "a_lo": self.a_lo,
            "a_hi": self.a_hi,
            "delta": self.delta,
            "K": self.max_size,
            "k_final": self.k_final,
            "lambda": self.lambda.map(json_number),
            "lambda_max": self.lambda_max.map(json_number),
            "period": self.period,
            "C": self.c.map(json_number),
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "elapsed_s": self.elapsed_s,
            "strategy": self.strategy.to_string(),
        })
    }

    fn from_certificate(task: &Task, cert: &ExpansionCertificate<f64>, elapsed_s: f64) -> Self {
        Self {
            index: task.index,
            a_lo: task.omega.lo(),
            a_hi: task.omega.hi(),
            delta: task.delta,
            max_size: cert.max_size,
            k_final: Some(cert.final_partition_size),
            lambda: Some(cert.lambda),
            lambda_max: cert.lambda_max,
            period: cert.orbit.as_ref().map(|o| o.period),
            c: cert.c,
            iterations: Some(cert.iterations),
            stop_reason: cert.stop_reason.to_string(),
            elapsed_s,
            strategy: task.strategy,
        }
    }
}

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_time() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Runs one task and returns the certificate, the final partition and the
/// graph it was computed on.
pub fn certify_task(
    task: &Task,
    max_size: usize,
    with_c: bool,
) -> Result<(ExpansionCertificate<f64>, expansion::Refinement<f64>), ExpansionError> {
    let family = QuadraticFamily::new(task.omega);
    let nbhd = family.critical_neighbourhood(task.delta)?;
    let domain = family.domain();
    match task.strategy {
        Strategy::Refined => {
            let cfg = RefinementConfig {
                with_c,
                ..RefinementConfig::with_max_size(max_size)
            };
            let p0 = partition::uniform_partition(
                &domain,
                &nbhd,
                expansion::initial_size(&domain, &nbhd),
            )?;
            expansion::certify(&family, task.delta, p0, Some(&cfg), with_c)
        }
        Strategy::Uniform(k) => {
            let p = partition::uniform_partition(&domain, &nbhd, k)?;
            expansion::certify(&family, task.delta, p, None, with_c)
        }
        Strategy::Gamma(g) => {
            let p = partition::derivative_scaled_partition(&family, &domain, &nbhd, max_size, g)?;
            expansion::certify(&family, task.delta, p, None, with_c)
        }
    }
}

/// Runs one task; failures become rows with an `error` stop reason.
pub fn run_task(task: &Task, max_size: usize, with_c: bool) -> SweepRow {
    let started = thread_cpu_time();
    let result = certify_task(task, max_size, with_c);
    row_for(task, max_size, result.as_ref().map(|r| &r.0), thread_cpu_time() - started)
}

/// The row describing a task outcome.
pub fn row_for(
    task: &Task,
    max_size: usize,
    result: Result<&ExpansionCertificate<f64>, &ExpansionError>,
    elapsed_s: f64,
) -> SweepRow {
    match result {
        Ok(cert) => SweepRow::from_certificate(task, cert, elapsed_s),
        Err(e) => SweepRow {
            index: task.index,
            a_lo: task.omega.lo(),
            a_hi: task.omega.hi(),
            delta: task.delta,
            max_size,
            k_final: None,
            lambda: None,
            lambda_max: None,
            period: None,
            c: None,
            iterations: None,
            stop_reason: format!("error: {}", e.to_string().replace([',', '\n'], ";")),
            elapsed_s,
            strategy: task.strategy,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
    pub wall_s: f64,
    pub cpu_s: f64,
    pub started_unix: u64,
}

/// Runs every task of `spec` on `spec.workers` threads and hands rows to
/// `on_row` in index order as soon as they are contiguous.
pub fn run_sweep<W>(spec: &SweepSpec, mut on_row: W) -> Result<SweepSummary, SweepError>
where
    W: FnMut(&SweepRow) -> io::Result<()>,
{
    let tasks = spec.tasks()?;
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let wall = Instant::now();
    let next = AtomicUsize::new(0);
    let mut rows = Vec::with_capacity(tasks.len());
    let mut sink_error: Option<io::Error> = None;
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..spec.workers.min(tasks.len()).max(1) {
            let tx = tx.clone();
            let (tasks, next) = (&tasks, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                if tx.send(run_task(task, spec.max_size, spec.with_c)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        for row in rx {
            pending.insert(row.index, row);
            while let Some(row) = pending.remove(&rows.len()) {
                if sink_error.is_none() {
                    sink_error = on_row(&row).err();
                }
                rows.push(row);
            }
        }
    });
    if let Some(e) = sink_error {
        return invalid(format!("cannot write output: {e}"));
    }
    Ok(SweepSummary {
        failures: rows.iter().filter(|r| r.is_failure()).count(),
        cpu_s: rows.iter().map(|r| r.elapsed_s).sum(),
        wall_s: wall.elapsed().as_secs_f64(),
        started_unix,
        rows,
    })
}

/// Manifest describing a finished sweep.
pub fn manifest(spec: &SweepSpec, summary: &SweepSummary, output: Option<&Path>) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "output": output.map(|p| p.display().to_string()),
        "rows": summary.rows.len(),
        "failures": summary.failures,
        "wall_s": summary.wall_s,
        "cpu_s": summary.cpu_s,
        "started_unix": summary.started_unix,
    })
}

/// Non-rigorous orbit samples `(a, x)`: for each of `columns` equally spaced
/// parameters, iterate from `x = 0`, drop `transient` iterates and keep
/// `samples`.
pub fn bifurcation_data(
    omega: &Interval<f64>,
    columns: usize,
    transient: usize,
    samples: usize,
) -> Vec<(f64, f64)> {
    let family = QuadraticFamily::new(*omega);
    let mut points = Vec::with_capacity(columns * samples);
    for i in 0..columns {
        let a = if columns == 1 {
            omega.lo()
        } else {
            omega.lo() + (omega.hi() - omega.lo()) * i as f64 / (columns - 1) as f64
        };
        let mut x = 0.0;
        for _ in 0..transient {
            x = family.eval_point(a, x);
        }
        for _ in 0..samples {
            x = family.eval_point(a, x);
            if !x.is_finite() {
                break;
            }
            points.push((a, x));
        }
    }
    points
}
