use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use unifexp::sweep::{self, Mode, Strategy, SweepRow, SweepSpec, Task, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Certified lower bounds on the expansion exponent of a(x) = a - x^2
/// outside a neighbourhood of the critical point.
#[derive(Debug, Parser)]
#[command(name = "unifexp", version)]
struct Cli {
    #[arg(long, default_value = "quadratic")]
    family: String,
    /// Parameter value or range, `LO` or `LO:HI`.
    #[arg(long, default_value = "2")]
    omega: String,
    /// Critical neighbourhood radii, comma separated.
    #[arg(long, default_value = "0.001", value_delimiter = ',')]
    delta: Vec<f64>,
    /// Maximal partition size.
    #[arg(long = "K", default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value = "single")]
    mode: String,
    /// Grid intervals; `N + 1` points are evaluated.
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    /// Subdivision depth; `2^D` parameter intervals.
    #[arg(long, default_value_t = 10)]
    depth: u32,
    /// `refined`, `uniform:K` or `gamma:I`.
    #[arg(long, default_value = "refined")]
    strategy: String,
    #[arg(long = "with-C")]
    with_c: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Single mode: write the final partition as CSV.
    #[arg(long)]
    dump_partition: Option<PathBuf>,
    /// Single mode: write the final graph as CSV.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Write bifurcation samples `COLSxSAMPLES` instead of running a sweep.
    #[arg(long)]
    bifurcation: Option<String>,
    /// Iterates dropped per bifurcation column.
    #[arg(long, default_value_t = 1000)]
    transient: usize,
}

enum Failure {
    Spec(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn spec_error<T>(msg: impl ToString) -> Result<T, Failure> {
    Err(Failure::Spec(msg.to_string()))
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_spec(cli: &Cli) -> Result<SweepSpec, Failure> {
    let (lo, hi) = match cli.omega.split_once(':') {
        Some((lo, hi)) => (lo.trim().to_string(), hi.trim().to_string()),
        None => (cli.omega.trim().to_string(), cli.omega.trim().to_string()),
    };
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let spec = SweepSpec {
        mode: cli.mode.parse().or_else(spec_error)?,
        family: cli.family.clone(),
        omega_lo: lo,
        omega_hi: hi,
        deltas: cli.delta.clone(),
        max_size: cli.k,
        grid: cli.grid,
        depth: cli.depth,
        strategy: cli.strategy.parse::<Strategy>().or_else(spec_error)?,
        with_c: cli.with_c,
        workers,
    };
    spec.validate().or_else(spec_error)?;
    if spec.mode != Mode::Single && (cli.dump_partition.is_some() || cli.dump_graph.is_some()) {
        return spec_error("--dump-partition and --dump-graph need --mode single");
    }
    Ok(spec)
}

fn run_bifurcation(cli: &Cli, spec: &str) -> Result<bool, Failure> {
    let Some((cols, samples)) = spec.split_once('x') else {
        return spec_error("--bifurcation expects COLSxSAMPLES");
    };
    let (Ok(cols), Ok(samples)) = (cols.parse::<usize>(), samples.parse::<usize>()) else {
        return spec_error("--bifurcation expects COLSxSAMPLES");
    };
    let omega = SweepSpec {
        omega_lo: cli.omega.split(':').next().unwrap_or_default().to_string(),
        omega_hi: cli.omega.split(':').next_back().unwrap_or_default().to_string(),
        ..SweepSpec::default()
    }
    .omega()
    .or_else(spec_error)?;
    let mut out = open_output(cli.out.as_deref())?;
    writeln!(out, "a,x")?;
    for (a, x) in sweep::bifurcation_data(&omega, cols, cli.transient, samples) {
        writeln!(out, "{a},{x}")?;
    }
    out.flush()?;
    Ok(true)
}

fn run_single(cli: &Cli, spec: &SweepSpec) -> Result<bool, Failure> {
    let omega = spec.omega().or_else(spec_error)?;
    let mut certificates = Vec::new();
    let mut rows = Vec::new();
    for (index, &delta) in spec.deltas.iter().enumerate() {
        let task = Task {
            index,
            omega,
            delta,
            strategy: spec.strategy,
        };
        let started = sweep::thread_cpu_time();
        let result = sweep::certify_task(&task, spec.max_size, spec.with_c);
        let elapsed = sweep::thread_cpu_time() - started;
        rows.push(sweep::row_for(
            &task,
            spec.max_size,
            result.as_ref().map(|r| &r.0),
            elapsed,
        ));
        match result {
            Ok((cert, refinement)) => {
                if let Some(path) = &cli.dump_partition {
                    refinement.partition.write_csv(BufWriter::new(File::create(path)?))?;
                }
                if let Some(path) = &cli.dump_graph {
                    refinement.graph.write_csv(BufWriter::new(File::create(path)?))?;
                }
                certificates.push(cert.to_json());
            }
            Err(e) => eprintln!("delta {delta}: {e}"),
        }
    }
    let mut out = open_output(cli.out.as_deref())?;
    match cli.format {
        Format::Csv => write_csv(&mut out, &rows)?,
        Format::Json => {
            let value = if certificates.len() == 1 {
                certificates.pop().unwrap()
            } else {
                Value::Array(certificates)
            };
            serde_json::to_writer_pretty(&mut out, &value).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(rows.iter().all(|r| !r.is_failure()))
}

fn write_csv(out: &mut dyn Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

fn run_sweep(cli: &Cli, spec: &SweepSpec) -> Result<bool, Failure> {
    let mut out = open_output(cli.out.as_deref())?;
    let summary = match cli.format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            sweep::run_sweep(spec, |row| {
                writeln!(out, "{}", row.to_csv())?;
                out.flush()
            })
        }
        Format::Json => sweep::run_sweep(spec, |_| Ok(())),
    }
    .or_else(spec_error)?;
    if cli.format == Format::Json {
        let rows: Vec<Value> = summary.rows.iter().map(SweepRow::to_json).collect();
        serde_json::to_writer_pretty(&mut out, &rows).map_err(io::Error::from)?;
        writeln!(out)?;
    }
    out.flush()?;
    if let Some(path) = &cli.out {
        let mut name = path.clone().into_os_string();
        name.push(".manifest.json");
        let manifest = sweep::manifest(spec, &summary, Some(path));
        let file = BufWriter::new(File::create(PathBuf::from(name))?);
        serde_json::to_writer_pretty(file, &manifest).map_err(io::Error::from)?;
    }
    if summary.failures > 0 {
        eprintln!("{} of {} rows failed", summary.failures, summary.rows.len());
    }
    Ok(summary.failures == 0)
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(b) = &cli.bifurcation {
        return run_bifurcation(cli, b);
    }
    let spec = build_spec(cli)?;
    if spec.mode == Mode::Single {
        run_single(cli, &spec)
    } else {
        run_sweep(cli, &spec)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(Failure::Spec(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
