//! Command-line front end: exact partition sums, interpolation-based
//! approximation, derivative tables, zero scans, hypothesis checks, instance
//! generation, and benchmarks.
//!
//! Exit codes: 0 on success, 2 when a row-sum hypothesis is refused, 3 when a
//! work or order budget is refused, 1 on any other error.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use isingpf::driver::{
    self, approximate_partition, approximate_partition_cubic, gen_instance, run_bench,
    run_check, scan_leeyang, verify_transformed_instance, CheckKind, GenKind, PipelineOptions,
};
use isingpf::exact::{self, BruteForceOptions};
use isingpf::interpolate::{approx_log_p1, InterpOptions, ZeroFreeStrip};
use isingpf::taylor::{DerivativeTable, HyperWeights};
use isingpf::{CubePolynomial, Error};

#[derive(Parser)]
#[command(
    name = "isingpf",
    about = "Partition sums of low-degree polynomials on the Boolean cube: \
             exact enumeration, zero-free checks, and Taylor interpolation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanParam {
    /// Sweep a uniform vertex field b (univariate root scan).
    B,
    /// Sweep the interpolation variable z of the auxiliary polynomial p.
    Z,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate S(e^f) exactly and print ln S
    Exact {
        /// Instance file (JSON)
        file: PathBuf,
    },
    /// Approximate ln S(e^f) within epsilon under the row-sum condition
    Approx {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Use the cubic pipeline (row-sum condition with triples, 0 < δ < ½)
        #[arg(long)]
        cubic: bool,
        /// Interpolate even when exact enumeration would be affordable
        #[arg(long)]
        force_interpolation: bool,
    },
    /// Print the derivative table p^(k)(0), k = 0..=kmax, as CSV (k, Re, Im)
    Derivs {
        file: PathBuf,
        #[arg(long)]
        kmax: usize,
    },
    /// Extrapolate ln p(1) from a derivative-table CSV
    Interp {
        csv: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Sweep the partition sum over a complex parameter grid and locate zeros
    ScanZeros {
        /// Instance file, or an inline generator spec
        /// `gen:<kind>,n=<n>[,delta=..][,degree=..][,seed=..]`
        source: String,
        #[arg(long, value_enum, default_value_t = ScanParam::B)]
        param: ScanParam,
        /// Grid `re0:re1:im0:im1:steps` (steps per axis; an axis with equal
        /// endpoints collapses to one point)
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
    },
    /// Check a row-sum hypothesis and print the per-row report
    Check {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Check the complex-coefficient condition (imaginary bounds δ²/10)
        #[arg(long)]
        complex: bool,
        /// Include cubic terms in the row sums (0 < δ < ½)
        #[arg(long)]
        cubic: bool,
    },
    /// Check the transformed coefficients â(z) against the tightened bounds
    CheckTransformed {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0)]
        z_im: f64,
    },
    /// Generate an instance file
    Gen {
        /// random-quadratic | random-cubic | regular-graph | complex-boundary
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        /// Vertex degree (regular-graph only)
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Negate the coupling (regular-graph only)
        #[arg(long)]
        antiferromagnetic: bool,
        /// Pair inclusion probability (defaults to min(1, 4/n))
        #[arg(long)]
        edge_prob: Option<f64>,
        /// Vertex fields drawn uniformly from [−scale, scale]
        #[arg(long, default_value_t = 1.0)]
        field_scale: f64,
        /// Worst imaginary row sum (complex-boundary only; defaults to δ²/10)
        #[arg(long)]
        imag_row_target: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Time the approximation pipeline on generated instances
    Bench {
        /// small | medium
        #[arg(long)]
        suite: String,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::HypothesisFailed { .. } => 2,
        Error::WorkLimit { .. }
        | Error::BruteForceCap { .. }
        | Error::OrderCap { .. }
        | Error::InsufficientOrder { .. }
        | Error::MapCertification { .. }
        | Error::BudgetExceeded(_) => 3,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// Print a line to stdout, treating a closed pipe (e.g. `| head`) as a clean
/// exit rather than a panic.
fn print_line(text: &str) {
    use std::io::Write;
    if let Err(e) = writeln!(std::io::stdout(), "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

fn print_json<T: Serialize>(value: &T) {
    print_line(&serde_json::to_string_pretty(value).expect("reports serialize to JSON"));
}

#[derive(Serialize)]
struct ExactOutput {
    n: usize,
    /// ln S as [Re, Im]
    log_partition: [f64; 2],
    /// ln Σ_x |e^{f(x)}|
    log_term_scale: f64,
    /// |S| / Σ_x |e^{f(x)}|
    normalized_modulus: f64,
    /// S itself when it fits an f64 without overflow
    partition: Option<[f64; 2]>,
}

fn run(command: Command) -> Result<i32, Error> {
    let brute = BruteForceOptions::default();
    match command {
        Command::Exact { file } => {
            let f = CubePolynomial::read_file(&file)?;
            let stats = exact::partition_stats(&f, &brute)?;
            let partition = (stats.sum.re.is_finite() && stats.sum.im.is_finite())
                .then_some([stats.sum.re, stats.sum.im]);
            print_json(&ExactOutput {
                n: f.n(),
                log_partition: [stats.log_sum.re, stats.log_sum.im],
                log_term_scale: stats.log_abs_sum,
                normalized_modulus: stats.normalized_modulus(),
                partition,
            });
            Ok(0)
        }
        Command::Approx { file, delta, epsilon, cubic, force_interpolation } => {
            let f = CubePolynomial::read_file(&file)?;
            let mut opts = PipelineOptions::default();
            if force_interpolation {
                opts.small_n_threshold = Some(0);
            }
            let run = if cubic {
                approximate_partition_cubic(&f, delta, epsilon, &opts)?
            } else {
                approximate_partition(&f, delta, epsilon, &opts)?
            };
            print_json(&run);
            Ok(0)
        }
        Command::Derivs { file, kmax } => {
            let f = CubePolynomial::read_file(&file)?;
            let weights = HyperWeights::from_cubic_instance(&f)?;
            let b: Vec<f64> = (0..f.n()).map(|i| f.linear_coeff(i).re).collect();
            let opts = PipelineOptions::default();
            let (table, _) = driver::derivative_table_auto(&weights, &b, kmax, &opts)?;
            let mut csv = String::from("k,re,im");
            for k in 0..=table.order() {
                let v = table.value(k);
                csv.push_str(&format!("\n{k},{:.17e},{:.17e}", v.re, v.im));
            }
            print_line(&csv);
            Ok(0)
        }
        Command::Interp { csv, delta, epsilon } => {
            let table = read_table_csv(&csv)?;
            let strip = ZeroFreeStrip::for_delta(delta)?;
            let report = approx_log_p1(&table, &strip, epsilon, &InterpOptions::default())?;
            print_json(&report);
            Ok(0)
        }
        Command::ScanZeros { source, param, grid, delta } => {
            let f = load_or_generate(&source)?;
            let grid = parse_grid(&grid)?;
            let result = match param {
                ScanParam::B => {
                    if f.linear().values().any(|b| *b != Complex64::ZERO) {
                        return Err(Error::InvalidParameter(
                            "field scan sweeps a uniform b; the instance must not carry \
                             its own vertex fields"
                                .into(),
                        ));
                    }
                    let mut edges = Vec::new();
                    for (&(i, j), &a) in f.quadratic() {
                        if a.im != 0.0 {
                            return Err(Error::NonRealCoefficient {
                                key: vec![i, j],
                                imag: a.im,
                            });
                        }
                        edges.push((i, j, a.re));
                    }
                    scan_leeyang(f.n(), &edges, &grid, &brute)?
                }
                ScanParam::Z => scan_p_values(&f, &grid, &brute)?,
            };
            print_json(&result);
            let _ = delta;
            Ok(0)
        }
        Command::Check { file, delta, complex, cubic } => {
            let f = CubePolynomial::read_file(&file)?;
            let kind = match (complex, cubic) {
                (false, false) => CheckKind::RealQuadratic,
                (true, false) => CheckKind::ComplexQuadratic,
                (false, true) => CheckKind::RealCubic,
                (true, true) => CheckKind::ComplexCubic,
            };
            let report = run_check(&f, delta, kind)?;
            let satisfied = report.satisfied;
            print_json(&report);
            Ok(if satisfied { 0 } else { 2 })
        }
        Command::CheckTransformed { file, delta, z_re, z_im } => {
            let f = CubePolynomial::read_file(&file)?;
            let report = verify_transformed_instance(&f, Complex64::new(z_re, z_im), delta)?;
            let satisfied = report.satisfied;
            print_json(&report);
            Ok(if satisfied { 0 } else { 2 })
        }
        Command::Gen {
            kind,
            n,
            delta,
            degree,
            antiferromagnetic,
            edge_prob,
            field_scale,
            imag_row_target,
            seed,
            out,
        } => {
            let kind = build_kind(
                &kind,
                n,
                delta,
                degree,
                !antiferromagnetic,
                edge_prob,
                field_scale,
                imag_row_target,
            )?;
            let f = gen_instance(&kind, seed)?;
            f.write_file(&out)?;
            eprintln!("wrote {} (n = {})", out.display(), f.n());
            Ok(0)
        }
        Command::Bench { suite } => {
            let records = run_bench(&suite, &PipelineOptions::default())?;
            print_json(&records);
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_kind(
    name: &str,
    n: usize,
    delta: f64,
    degree: usize,
    ferromagnetic: bool,
    edge_prob: Option<f64>,
    field_scale: f64,
    imag_row_target: Option<f64>,
) -> Result<GenKind, Error> {
    match name {
        "random-quadratic" => Ok(GenKind::RandomQuadratic { n, delta, edge_prob, field_scale }),
        "random-cubic" => Ok(GenKind::RandomCubic { n, delta, edge_prob, field_scale }),
        "regular-graph" => Ok(GenKind::RegularGraph { n, degree, ferromagnetic }),
        "complex-boundary" => {
            Ok(GenKind::ComplexBoundary { n, delta, edge_prob, imag_row_target })
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown instance kind {other:?}; expected random-quadratic, random-cubic, \
             regular-graph, or complex-boundary"
        ))),
    }
}

/// Either read an instance file or process an inline
/// `gen:<kind>,key=value,...` spec.
fn load_or_generate(source: &str) -> Result<CubePolynomial, Error> {
    let Some(body) = source.strip_prefix("gen:") else {
        return CubePolynomial::read_file(source);
    };
    let mut parts = body.split(',');
    let kind_name = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::InvalidParameter("empty generator spec".into()))?;
    let mut params: BTreeMap<&str, &str> = BTreeMap::new();
    for part in parts {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("generator parameter {part:?} is not key=value"))
        })?;
        params.insert(key, value);
    }
    let get_usize = |key: &str, default: usize| -> Result<usize, Error> {
        params.get(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad integer for {key}: {v:?}")))
        })
    };
    let get_f64 = |key: &str, default: f64| -> Result<f64, Error> {
        params.get(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number for {key}: {v:?}")))
        })
    };
    let n = get_usize("n", 0)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "generator spec needs n=<vertices>".into(),
        ));
    }
    let edge_prob = if params.contains_key("edge-prob") {
        Some(get_f64("edge-prob", 0.0)?)
    } else {
        None
    };
    let kind = build_kind(
        kind_name,
        n,
        get_f64("delta", 0.25)?,
        get_usize("degree", 3)?,
        get_f64("ferro", 1.0)? > 0.0,
        edge_prob,
        get_f64("field-scale", 0.0)?,
        None,
    )?;
    let seed = get_usize("seed", 0)? as u64;
    gen_instance(&kind, seed)
}

/// Parse `re0:re1:im0:im1:steps` into a row-major complex grid with `steps`
/// points per non-degenerate axis.
fn parse_grid(spec: &str) -> Result<Vec<Complex64>, Error> {
    let fields: Vec<&str> = spec.split(':').collect();
    if fields.len() != 5 {
        return Err(Error::InvalidParameter(format!(
            "grid {spec:?} should be re0:re1:im0:im1:steps"
        )));
    }
    let num = |s: &str| -> Result<f64, Error> {
        s.parse()
            .map_err(|_| Error::InvalidParameter(format!("bad grid number {s:?}")))
    };
    let (re0, re1, im0, im1) = (num(fields[0])?, num(fields[1])?, num(fields[2])?, num(fields[3])?);
    let steps: usize = fields[4]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad step count {:?}", fields[4])))?;
    if steps == 0 {
        return Err(Error::InvalidParameter("grid needs at least one step".into()));
    }
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        if lo == hi || steps == 1 {
            vec![lo]
        } else {
            (0..steps)
                .map(|t| lo + (hi - lo) * t as f64 / (steps - 1) as f64)
                .collect()
        }
    };
    let res = axis(re0, re1);
    let ims = axis(im0, im1);
    let mut grid = Vec::with_capacity(res.len() * ims.len());
    for &im in &ims {
        for &re in &res {
            grid.push(Complex64::new(re, im));
        }
    }
    Ok(grid)
}

/// Sweep the auxiliary polynomial p over a z-grid: values and normalized
/// moduli only (no root refinement for this parameter).
fn scan_p_values(
    f: &CubePolynomial,
    grid: &[Complex64],
    brute: &BruteForceOptions,
) -> Result<driver::ZeroScanResult, Error> {
    let mut values = Vec::with_capacity(grid.len());
    let mut min_normalized = f64::INFINITY;
    for &z in grid {
        let stats = exact::p_exact_stats(f, z, brute)?;
        values.push(stats.sum);
        min_normalized = min_normalized.min(stats.normalized_modulus());
    }
    if grid.is_empty() {
        min_normalized = f64::NAN;
    }
    Ok(driver::ZeroScanResult {
        parameter_name: "z".into(),
        grid: grid.to_vec(),
        values,
        roots: Vec::new(),
        min_normalized_modulus: min_normalized,
        max_root_residual: 0.0,
    })
}

/// Read a `k,re,im` CSV (header optional) into a derivative table. Orders
/// must be contiguous from 0.
fn read_table_csv(path: &PathBuf) -> Result<DerivativeTable, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(usize, Complex64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "line {}: expected k,re,im",
                lineno + 1
            )));
        }
        if lineno == 0 && cells[0].parse::<usize>().is_err() {
            continue; // header
        }
        let k: usize = cells[0]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("line {}: bad order {:?}", lineno + 1, cells[0])))?;
        let re: f64 = cells[1]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("line {}: bad real part", lineno + 1)))?;
        let im: f64 = cells[2]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("line {}: bad imaginary part", lineno + 1)))?;
        rows.push((k, Complex64::new(re, im)));
    }
    rows.sort_by_key(|&(k, _)| k);
    if rows.is_empty() {
        return Err(Error::InvalidParameter("derivative CSV has no data rows".into()));
    }
    for (expect, &(k, _)) in rows.iter().enumerate() {
        if k != expect {
            return Err(Error::InvalidParameter(format!(
                "derivative orders must run 0..=m without gaps; missing k = {expect}"
            )));
        }
    }
    let values: Vec<Complex64> = rows.into_iter().map(|(_, v)| v).collect();
    // vertex count is not part of the CSV and not needed for extrapolation
    Ok(DerivativeTable::new(values, 0))
}
