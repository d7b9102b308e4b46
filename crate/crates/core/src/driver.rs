//! End-to-end pipeline: hypothesis gate, routing between exact enumeration and
//! Taylor interpolation, zero scans over parameter grids, instance generators,
//! and small benchmark suites.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{self, BruteForceOptions};
use crate::interpolate::{approx_log_p1, ApproxReport, InterpOptions, ZeroFreeStrip};
use crate::model::{self, CubePolynomial, HypothesisReport};
use crate::taylor::{self, estimate_work, DerivativeTable, HyperWeights, TaylorOptions};

fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

fn ser_complex_vec<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

// ---------------------------------------------------------------------------
// Pipeline options and results
// ---------------------------------------------------------------------------

/// Knobs for the full approximation pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub brute_force: BruteForceOptions,
    pub taylor: TaylorOptions,
    pub interp: InterpOptions,
    /// Instances with fewer variables than this are summed exactly instead of
    /// interpolated. `None` means `max(10, brute_force.cap)`.
    pub small_n_threshold: Option<usize>,
    /// Hard ceiling on the derivative-table order the pipeline will build
    /// while chasing a tight tail bound.
    pub max_table_order: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            brute_force: BruteForceOptions::default(),
            taylor: TaylorOptions::default(),
            interp: InterpOptions::default(),
            small_n_threshold: None,
            max_table_order: 128,
        }
    }
}

impl PipelineOptions {
    fn threshold(&self) -> usize {
        self.small_n_threshold.unwrap_or_else(|| self.brute_force.cap.max(10))
    }
}

/// Which route produced the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelinePath {
    /// Direct enumeration of all `2^n` configurations.
    Exact,
    /// Taylor coefficients at 0 extrapolated to `z = 1` inside the
    /// zero-free region.
    Interpolated,
}

/// How the derivative table was computed on the interpolated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    /// No table was needed (exact path).
    None,
    /// Combinatorial edge-subset formula; cost independent of `2^n`.
    Combinatorial,
    /// Term-by-term series accumulation over all configurations.
    SeriesEnumeration,
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    /// Estimate (or exact value) of `ln S(e^f)`.
    #[serde(serialize_with = "ser_complex")]
    pub log_partition: Complex64,
    pub path: PipelinePath,
    pub hypothesis: HypothesisReport,
    /// Order of the derivative table used (0 on the exact path).
    pub table_order: usize,
    pub derivative_source: DerivativeSource,
    /// Interpolation diagnostics; absent on the exact path.
    pub report: Option<ApproxReport>,
}

fn require_satisfied(report: HypothesisReport) -> Result<HypothesisReport> {
    if report.satisfied {
        return Ok(report);
    }
    let idx = report.worst_index;
    let row = report
        .row_sums
        .iter()
        .find(|r| r.index == idx)
        .expect("worst_index refers to an existing row");
    let detail = format!(
        "row sums (real {:.6}, imag {:.6}, |Im b| {:.6}) against bounds ({:.6}, {:.6}, {:.6})",
        row.real,
        row.imag,
        row.imag_linear,
        report.real_bound,
        report.imag_bound,
        report.imag_linear_bound,
    );
    Err(Error::HypothesisFailed { index: idx, detail })
}

fn real_fields(f: &CubePolynomial) -> Vec<f64> {
    (0..f.n()).map(|i| f.linear_coeff(i).re).collect()
}

/// Build the order-`m` derivative table, choosing the cheaper of the two
/// engines: the combinatorial formula when its work estimate fits the budget,
/// otherwise configuration enumeration when `n` is small enough. Refuses with
/// a work-limit error when neither applies.
pub fn derivative_table_auto(
    weights: &HyperWeights,
    b: &[f64],
    m: usize,
    opts: &PipelineOptions,
) -> Result<(DerivativeTable, DerivativeSource)> {
    let edges = weights.edge_count();
    let has_triples = !weights.triples().is_empty();
    let total_work: f64 = (0..=m).map(|k| estimate_work(edges, k, has_triples)).sum();
    if total_work <= opts.taylor.work_limit && m <= opts.taylor.order_cap {
        let table = taylor::derivative_table(weights, b, m, &opts.taylor)?;
        return Ok((table, DerivativeSource::Combinatorial));
    }
    if weights.n() <= opts.brute_force.cap {
        let table = exact::p_series_table(weights, b, m, &opts.brute_force)?;
        return Ok((table, DerivativeSource::SeriesEnumeration));
    }
    Err(Error::WorkLimit {
        estimated: total_work,
        limit: opts.taylor.work_limit,
        edges,
        k: m,
    })
}

/// Run the interpolation leg: grow the derivative table until the tail bound
/// meets `epsilon` or the order ceiling is reached.
fn interpolate_log_p1(
    weights: &HyperWeights,
    b: &[f64],
    strip: &ZeroFreeStrip,
    epsilon: f64,
    opts: &PipelineOptions,
) -> Result<(ApproxReport, usize, DerivativeSource)> {
    let mut m = opts.interp.min_order.max(8).min(opts.max_table_order);
    loop {
        let (table, source) = derivative_table_auto(weights, b, m, opts)?;
        match approx_log_p1(&table, strip, epsilon, &opts.interp) {
            Ok(report) => return Ok((report, m, source)),
            Err(Error::InsufficientOrder { required, .. }) => {
                if m >= opts.max_table_order {
                    return Err(Error::InsufficientOrder {
                        available: m,
                        required,
                        epsilon,
                    });
                }
                m = required.max(m * 2).min(opts.max_table_order);
            }
            Err(e) => return Err(e),
        }
    }
}

// ---------------------------------------------------------------------------
// Partition-function approximation
// ---------------------------------------------------------------------------

/// Estimate `ln S(e^f)` for a real quadratic instance within the row-sum
/// condition at the given `delta`, to additive accuracy `epsilon`.
///
/// Small instances are summed exactly (the estimate is then the true value,
/// and `epsilon` only gates its admissibility). Larger ones go through the
/// transformed-weight derivative table and Taylor extrapolation to `z = 1`,
/// using `ln S = ln p(1) − Σ_{i<j} a_ij`.
pub fn approximate_partition(
    f: &CubePolynomial,
    delta: f64,
    epsilon: f64,
    opts: &PipelineOptions,
) -> Result<PipelineRun> {
    let hypothesis = require_satisfied(model::check_real_quadratic(f, delta)?)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if f.n() < opts.threshold() {
        let log_s = exact::log_partition_sum(f, &opts.brute_force)?;
        return Ok(PipelineRun {
            log_partition: log_s,
            path: PipelinePath::Exact,
            hypothesis,
            table_order: 0,
            derivative_source: DerivativeSource::None,
            report: None,
        });
    }
    let weights = taylor::c_from_a(f)?;
    let b = real_fields(f);
    let strip = ZeroFreeStrip::for_delta(delta)?;
    let (report, order, source) = interpolate_log_p1(&weights, &b, &strip, epsilon, opts)?;
    let log_s = report.log_p1 - f.sum_quadratic();
    Ok(PipelineRun {
        log_partition: log_s,
        path: PipelinePath::Interpolated,
        hypothesis,
        table_order: order,
        derivative_source: source,
        report: Some(report),
    })
}

/// Cubic analogue of [`approximate_partition`]: the row-sum condition now
/// includes triple terms and requires `0 < δ < 1/2`, the transformed weights
/// carry `d_ijk = e^{c_ijk/n³} − 1`, and the prefactor becomes
/// `ln S = ln p(1) − Σ a_ij − Σ c_ijk`.
pub fn approximate_partition_cubic(
    f: &CubePolynomial,
    delta: f64,
    epsilon: f64,
    opts: &PipelineOptions,
) -> Result<PipelineRun> {
    let hypothesis = require_satisfied(model::check_real_cubic(f, delta)?)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if f.n() < opts.threshold() {
        let log_s = exact::log_partition_sum(f, &opts.brute_force)?;
        return Ok(PipelineRun {
            log_partition: log_s,
            path: PipelinePath::Exact,
            hypothesis,
            table_order: 0,
            derivative_source: DerivativeSource::None,
            report: None,
        });
    }
    let weights = HyperWeights::from_cubic_instance(f)?;
    let b = real_fields(f);
    let strip = ZeroFreeStrip::for_delta(delta)?;
    let (report, order, source) = interpolate_log_p1(&weights, &b, &strip, epsilon, opts)?;
    let log_s = report.log_p1 - f.sum_quadratic() - f.sum_cubic();
    Ok(PipelineRun {
        log_partition: log_s,
        path: PipelinePath::Interpolated,
        hypothesis,
        table_order: order,
        derivative_source: source,
        report: Some(report),
    })
}

// ---------------------------------------------------------------------------
// Transformed-instance verification
// ---------------------------------------------------------------------------

/// For an admissible real quadratic instance and a point `z` in the zero-free
/// strip for `delta`, build the transformed coefficients
/// `â_ij(z) = n² Log(1 + z·c_ij)` and check that they satisfy the tightened
/// complex row-sum bounds `Σ|Re â| ≤ 1−δ/2` and `Σ|Im â| ≤ δ²/40`
/// (vertex fields are untouched). Returns the row-sum report for the
/// transformed instance. Requires `n ≥ 10`.
pub fn verify_transformed_instance(
    f: &CubePolynomial,
    z: Complex64,
    delta: f64,
) -> Result<HypothesisReport> {
    let strip = ZeroFreeStrip::for_delta(delta)?;
    if !strip.contains(z) {
        return Err(Error::InvalidParameter(format!(
            "evaluation point {z} lies outside the zero-free strip for delta = {delta}"
        )));
    }
    require_satisfied(model::check_real_quadratic(f, delta)?)?;
    let n = f.n();
    if n < 10 {
        return Err(Error::InvalidParameter(
            "transformed row-sum bounds hold for n >= 10".into(),
        ));
    }
    let n2 = (n * n) as f64;
    let mut g = CubePolynomial::new(n)?;
    for (&(i, j), &a) in f.quadratic() {
        let c = (a.re / n2).exp_m1();
        let hat = n2 * (Complex64::ONE + z * c).ln();
        g.set_quadratic(i, j, hat)?;
    }
    for (&i, &b) in f.linear() {
        g.set_linear(i, b)?;
    }
    let rows = model::row_data(&g);
    Ok(model::finish_report(
        delta,
        rows,
        1.0 - delta / 2.0,
        delta * delta / 40.0,
        delta * delta / 40.0,
    ))
}

// ---------------------------------------------------------------------------
// Zero scans
// ---------------------------------------------------------------------------

/// Result of sweeping the partition sum over a parameter grid and locating
/// its zeros.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroScanResult {
    /// Which parameter the grid ranges over (`"b"` for a uniform vertex
    /// field).
    pub parameter_name: String,
    #[serde(serialize_with = "ser_complex_vec")]
    pub grid: Vec<Complex64>,
    /// Partition sum at each grid point.
    #[serde(serialize_with = "ser_complex_vec")]
    pub values: Vec<Complex64>,
    /// Refined zero locations in the scanned parameter.
    #[serde(serialize_with = "ser_complex_vec")]
    pub roots: Vec<Complex64>,
    /// `min |S| / Σ|terms|` over the grid.
    pub min_normalized_modulus: f64,
    /// Largest normalized residual `|S(root)| / Σ|terms|` over the reported
    /// roots; small values certify the roots.
    pub max_root_residual: f64,
}

fn horner(coeffs: &[f64], u: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for &q in coeffs.iter().rev() {
        acc = acc * u + q;
    }
    acc
}

fn horner_deriv(coeffs: &[f64], u: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for (k, &q) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * u + k as f64 * q;
    }
    acc
}

/// Scan a ferromagnetic pair model with a uniform complex vertex field `b`.
///
/// With `u = e^{2b}` and `q_κ = Σ_{#{+1} = κ} e^{Σ a ξξ}`, the partition sum
/// factors as `S = e^{−nb} Q(u)` with `Q(u) = Σ_κ q_κ u^κ`, a palindromic
/// polynomial with positive coefficients. All roots of `Q` are located via
/// the companion matrix, polished by Newton steps to tolerance `1e-10`, and
/// reported as field values `b = Log(u)/2`. For nonnegative `a` every root
/// lies on the unit circle, i.e. on the imaginary axis in `b`.
///
/// Edge weights must be nonnegative; a negative weight is a hypothesis
/// refusal, since nothing constrains the roots of antiferromagnetic models.
pub fn scan_leeyang(
    n: usize,
    edges: &[(usize, usize, f64)],
    b_grid: &[Complex64],
    opts: &BruteForceOptions,
) -> Result<ZeroScanResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if n > opts.cap {
        return Err(Error::BruteForceCap { n, cap: opts.cap });
    }
    let mut pair_list: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
    for (idx, &(i, j, a)) in edges.iter().enumerate() {
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { index: i.max(j), n });
        }
        if i == j {
            return Err(Error::RepeatedIndex(vec![i, j]));
        }
        if a < 0.0 || a.is_nan() {
            return Err(Error::HypothesisFailed {
                index: idx,
                detail: format!("edge ({i}, {j}) has negative weight {a}; ferromagnetic scan needs a >= 0"),
            });
        }
        pair_list.push((i.min(j), i.max(j), a));
    }

    // q_κ = Σ over configurations with κ up-spins of e^{Σ a ξξ}
    let mut q = vec![0.0f64; n + 1];
    for mask in 0u64..(1u64 << n) {
        let mut energy = 0.0;
        for &(i, j, a) in &pair_list {
            let same = ((mask >> i) ^ (mask >> j)) & 1 == 0;
            energy += if same { a } else { -a };
        }
        q[mask.count_ones() as usize] += energy.exp();
    }

    // Roots of Q via the companion matrix of the monic normalization.
    let mut roots_u: Vec<Complex64> = Vec::new();
    if n >= 1 {
        let lead = q[n];
        let mut companion = nalgebra::DMatrix::<f64>::zeros(n, n);
        for r in 1..n {
            companion[(r, r - 1)] = 1.0;
        }
        for r in 0..n {
            companion[(r, n - 1)] = -q[r] / lead;
        }
        for ev in companion.complex_eigenvalues().iter() {
            let mut u = Complex64::new(ev.re, ev.im);
            for _ in 0..50 {
                let pv = horner(&q, u);
                let dv = horner_deriv(&q, u);
                if dv.norm() == 0.0 {
                    break;
                }
                let step = pv / dv;
                u -= step;
                if step.norm() <= 1e-10 * u.norm().max(1.0) {
                    break;
                }
            }
            roots_u.push(u);
        }
    }

    // Report roots as b = Log(u)/2 and verify them against the term scale.
    let scale_at = |re_b: f64| -> f64 {
        (0..=n).map(|k| q[k] * ((2.0 * k as f64 - n as f64) * re_b).exp()).sum()
    };
    let value_at = |b: Complex64| -> Complex64 {
        (0..=n)
            .map(|k| q[k] * ((2.0 * k as f64 - n as f64) * b).exp())
            .sum()
    };
    let mut roots = Vec::with_capacity(roots_u.len());
    let mut max_root_residual = 0.0f64;
    for &u in &roots_u {
        let b = u.ln() / 2.0;
        let residual = value_at(b).norm() / scale_at(b.re);
        max_root_residual = max_root_residual.max(residual);
        roots.push(b);
    }
    roots.sort_by(|x, y| (x.im, x.re).partial_cmp(&(y.im, y.re)).unwrap());

    let mut values = Vec::with_capacity(b_grid.len());
    let mut min_normalized = f64::INFINITY;
    for &b in b_grid {
        let v = value_at(b);
        values.push(v);
        min_normalized = min_normalized.min(v.norm() / scale_at(b.re));
    }
    if b_grid.is_empty() {
        min_normalized = f64::NAN;
    }

    Ok(ZeroScanResult {
        parameter_name: "b".into(),
        grid: b_grid.to_vec(),
        values,
        roots,
        min_normalized_modulus: min_normalized,
        max_root_residual,
    })
}

/// Which row-sum condition a zero-freeness scan enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    RealQuadratic,
    ComplexQuadratic,
    RealCubic,
    ComplexCubic,
}

/// Dispatch to the matching row-sum check.
pub fn run_check(f: &CubePolynomial, delta: f64, kind: CheckKind) -> Result<HypothesisReport> {
    match kind {
        CheckKind::RealQuadratic => model::check_real_quadratic(f, delta),
        CheckKind::ComplexQuadratic => model::check_complex_quadratic(f, delta),
        CheckKind::RealCubic => model::check_real_cubic(f, delta),
        CheckKind::ComplexCubic => model::check_complex_cubic(f, delta),
    }
}

/// Summary of a randomized zero-freeness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroFreeScan {
    pub trials: usize,
    /// Smallest `|S| / Σ|e^{f(x)}|` observed.
    pub min_ratio: f64,
    /// Trial index achieving the minimum.
    pub worst_trial: usize,
}

/// Draw `trials` instances from `sampler`, enumerate each partition sum
/// exactly, and record the worst normalized modulus `|S| / Σ|e^{f(x)}|`.
///
/// With `require_pass` set, every sampled instance must satisfy the row-sum
/// condition of `kind` at `delta` or the scan refuses; clearing it permits
/// deliberate out-of-hypothesis sweeps (control experiments hunting for
/// near-zeros).
pub fn scan_zero_free(
    sampler: &mut dyn FnMut(usize) -> Result<CubePolynomial>,
    kind: CheckKind,
    delta: f64,
    trials: usize,
    require_pass: bool,
    opts: &BruteForceOptions,
) -> Result<ZeroFreeScan> {
    let mut min_ratio = f64::INFINITY;
    let mut worst_trial = 0;
    for t in 0..trials {
        let f = sampler(t)?;
        if require_pass {
            require_satisfied(run_check(&f, delta, kind)?)?;
        }
        let stats = exact::partition_stats(&f, opts)?;
        let ratio = stats.normalized_modulus();
        if ratio < min_ratio {
            min_ratio = ratio;
            worst_trial = t;
        }
    }
    Ok(ZeroFreeScan { trials, min_ratio, worst_trial })
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// Families of generated instances. All draws are made with a counter-based
/// generator seeded explicitly, so equal seeds give byte-identical instances.
#[derive(Debug, Clone)]
pub enum GenKind {
    /// Erdős–Rényi pair weights, rescaled so the worst row sum is exactly
    /// `1−δ`, with vertex fields uniform in `[−field_scale, field_scale]`.
    RandomQuadratic {
        n: usize,
        delta: f64,
        /// Pair inclusion probability; `None` means `min(1, 4/n)`.
        edge_prob: Option<f64>,
        field_scale: f64,
    },
    /// Random pair and triple weights with the combined row sums rescaled to
    /// a worst row of exactly `1−δ` (`0 < δ < 1/2`).
    RandomCubic {
        n: usize,
        delta: f64,
        edge_prob: Option<f64>,
        field_scale: f64,
    },
    /// Circulant Δ-regular graph with uniform coupling
    /// `a = ±½ ln(Δ/(Δ−2))`, the strength whose row sums sit exactly on the
    /// critical line `(Δ/2) ln(Δ/(Δ−2))`. No vertex fields. Requires
    /// `3 ≤ Δ < n` and `n·Δ` even.
    RegularGraph {
        n: usize,
        degree: usize,
        ferromagnetic: bool,
    },
    /// Real part as `RandomQuadratic`; imaginary pair parts rescaled so the
    /// worst imaginary row sum is exactly `imag_row_target` (default
    /// `δ²/10`, the boundary of the complex condition) and every vertex
    /// field gets `|Im b_i| = imag_row_target`. Larger targets deliberately
    /// leave the hypothesis for control sweeps.
    ComplexBoundary {
        n: usize,
        delta: f64,
        edge_prob: Option<f64>,
        imag_row_target: Option<f64>,
    },
}

fn check_gen_range(n: usize, delta: f64, delta_hi: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < delta_hi) {
        return Err(Error::DeltaOutOfRange { value: delta, lo: 0.0, hi: delta_hi });
    }
    Ok(())
}

fn draw_pairs(
    rng: &mut ChaCha8Rng,
    n: usize,
    prob: f64,
) -> Vec<((usize, usize), f64)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < prob {
                pairs.push(((i, j), rng.gen_range(-1.0..=1.0)));
            }
        }
    }
    pairs
}

/// Rescale factor sending the worst row sum to `target` (1 when all rows
/// vanish). Shaded down by one part in 10¹³ so that re-summing the rescaled
/// rows cannot overshoot the target through rounding — boundary instances
/// must still satisfy a strict `≤` check.
fn row_rescale(rows: &[f64], target: f64) -> f64 {
    let max = rows.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        target * (1.0 - 1e-13) / max
    } else {
        1.0
    }
}

/// Generate a deterministic instance of the requested family.
pub fn gen_instance(kind: &GenKind, seed: u64) -> Result<CubePolynomial> {
    match *kind {
        GenKind::RandomQuadratic { n, delta, edge_prob, field_scale } => {
            check_gen_range(n, delta, 1.0)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prob = edge_prob.unwrap_or_else(|| (4.0 / n as f64).min(1.0));
            let pairs = draw_pairs(&mut rng, n, prob);
            let mut rows = vec![0.0f64; n];
            for &((i, j), w) in &pairs {
                rows[i] += w.abs();
                rows[j] += w.abs();
            }
            let scale = row_rescale(&rows, 1.0 - delta);
            let mut f = CubePolynomial::new(n)?;
            for &((i, j), w) in &pairs {
                f.set_quadratic(i, j, Complex64::new(scale * w, 0.0))?;
            }
            for i in 0..n {
                let b = field_scale * rng.gen_range(-1.0..=1.0);
                f.set_linear(i, Complex64::new(b, 0.0))?;
            }
            Ok(f)
        }
        GenKind::RandomCubic { n, delta, edge_prob, field_scale } => {
            check_gen_range(n, delta, 0.5)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pair_prob = edge_prob.unwrap_or_else(|| (3.0 / n as f64).min(1.0));
            let triple_prob = (9.0 / (n as f64 * n as f64)).min(1.0);
            let pairs = draw_pairs(&mut rng, n, pair_prob);
            let mut triples: Vec<((usize, usize, usize), f64)> = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        if rng.gen::<f64>() < triple_prob {
                            triples.push(((i, j, k), rng.gen_range(-1.0..=1.0)));
                        }
                    }
                }
            }
            let mut rows = vec![0.0f64; n];
            for &((i, j), w) in &pairs {
                rows[i] += w.abs();
                rows[j] += w.abs();
            }
            for &((i, j, k), w) in &triples {
                for v in [i, j, k] {
                    rows[v] += w.abs();
                }
            }
            let scale = row_rescale(&rows, 1.0 - delta);
            let mut f = CubePolynomial::new(n)?;
            for &((i, j), w) in &pairs {
                f.set_quadratic(i, j, Complex64::new(scale * w, 0.0))?;
            }
            for &((i, j, k), w) in &triples {
                f.set_cubic(i, j, k, Complex64::new(scale * w, 0.0))?;
            }
            for i in 0..n {
                let b = field_scale * rng.gen_range(-1.0..=1.0);
                f.set_linear(i, Complex64::new(b, 0.0))?;
            }
            Ok(f)
        }
        GenKind::RegularGraph { n, degree, ferromagnetic } => {
            if !(3..n).contains(&degree) {
                return Err(Error::InvalidParameter(format!(
                    "degree {degree} outside [3, n) for n = {n}"
                )));
            }
            if n * degree % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "no {degree}-regular graph on {n} vertices: n·degree must be even"
                )));
            }
            let magnitude = 0.5 * (degree as f64 / (degree as f64 - 2.0)).ln();
            let a = if ferromagnetic { magnitude } else { -magnitude };
            let mut f = CubePolynomial::new(n)?;
            let mut offsets: Vec<usize> = (1..=degree / 2).collect();
            if degree % 2 == 1 {
                offsets.push(n / 2);
            }
            for &o in &offsets {
                for i in 0..n {
                    let j = (i + o) % n;
                    let (lo, hi) = (i.min(j), i.max(j));
                    // offset n/2 visits each edge twice; keep the first pass
                    if f.quadratic_coeff(lo, hi) == Complex64::ZERO {
                        f.set_quadratic(lo, hi, Complex64::new(a, 0.0))?;
                    }
                }
            }
            Ok(f)
        }
        GenKind::ComplexBoundary { n, delta, edge_prob, imag_row_target } => {
            check_gen_range(n, delta, 1.0)?;
            let target = imag_row_target.unwrap_or(delta * delta / 10.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prob = edge_prob.unwrap_or_else(|| (4.0 / n as f64).min(1.0));
            let pairs = draw_pairs(&mut rng, n, prob);
            let imag_draws: Vec<f64> =
                pairs.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut re_rows = vec![0.0f64; n];
            let mut im_rows = vec![0.0f64; n];
            for (&((i, j), w), &v) in pairs.iter().zip(&imag_draws) {
                re_rows[i] += w.abs();
                re_rows[j] += w.abs();
                im_rows[i] += v.abs();
                im_rows[j] += v.abs();
            }
            let re_scale = row_rescale(&re_rows, 1.0 - delta);
            let im_scale = row_rescale(&im_rows, target);
            let mut f = CubePolynomial::new(n)?;
            for (&((i, j), w), &v) in pairs.iter().zip(&imag_draws) {
                f.set_quadratic(i, j, Complex64::new(re_scale * w, im_scale * v))?;
            }
            for i in 0..n {
                let re = rng.gen_range(-1.0..=1.0);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                f.set_linear(i, Complex64::new(re, sign * target))?;
            }
            Ok(f)
        }
    }
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

/// One benchmark measurement.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    /// Derivative-table order the pipeline settled on.
    pub table_order: usize,
    pub epsilon: f64,
    pub wall_time_s: f64,
    /// `|approx − ln S|` against exact enumeration; present only when the
    /// oracle is affordable.
    pub relative_error: Option<f64>,
}

/// Run a named benchmark suite over generated instances, forcing the
/// interpolation path so the numbers measure the algorithm rather than the
/// exact fallback. Suites: `"small"` (n = 8, 10, 12) and `"medium"`
/// (n = 12..18).
pub fn run_bench(suite: &str, opts: &PipelineOptions) -> Result<Vec<BenchRecord>> {
    let cases: Vec<(usize, f64)> = match suite {
        "small" => vec![(8, 0.05), (10, 0.05), (12, 0.05)],
        "medium" => vec![(12, 0.02), (14, 0.02), (16, 0.05), (18, 0.05)],
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown bench suite {other:?}; expected \"small\" or \"medium\""
            )))
        }
    };
    let delta = 0.25;
    let mut forced = opts.clone();
    forced.small_n_threshold = Some(0);
    let mut records = Vec::with_capacity(cases.len());
    for (n, epsilon) in cases {
        let kind = GenKind::RandomQuadratic {
            n,
            delta,
            edge_prob: None,
            field_scale: 1.0,
        };
        let f = gen_instance(&kind, 1000 + n as u64)?;
        let start = Instant::now();
        let run = approximate_partition(&f, delta, epsilon, &forced)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        let relative_error = if n <= opts.brute_force.cap {
            let oracle = exact::log_partition_sum(&f, &opts.brute_force)?;
            Some((run.log_partition - oracle).norm())
        } else {
            None
        };
        records.push(BenchRecord {
            n,
            table_order: run.table_order,
            epsilon,
            wall_time_s,
            relative_error,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn forced_interp() -> PipelineOptions {
        PipelineOptions {
            small_n_threshold: Some(0),
            ..PipelineOptions::default()
        }
    }

    #[test]
    fn zero_polynomial_gives_n_ln_two() {
        let f = CubePolynomial::new(12).unwrap();
        let run = approximate_partition(&f, 0.5, 0.01, &PipelineOptions::default()).unwrap();
        assert_eq!(run.path, PipelinePath::Exact);
        assert!((run.log_partition.re - 12.0 * LN_2).abs() < 1e-13);
        assert_eq!(run.log_partition.im, 0.0);
    }

    #[test]
    fn linear_only_matches_product_of_coshes() {
        let mut f = CubePolynomial::new(11).unwrap();
        let fields = [0.3, -1.2, 0.0, 2.5, -0.7, 0.05, 1.0, -0.4, 0.9, -2.0, 0.6];
        for (i, &b) in fields.iter().enumerate() {
            f.set_linear(i, Complex64::new(b, 0.0)).unwrap();
        }
        let run = approximate_partition(&f, 0.3, 0.01, &PipelineOptions::default()).unwrap();
        let expected: f64 = fields.iter().map(|&b| taylor::ln_two_cosh(b)).sum();
        assert!((run.log_partition.re - expected).abs() < 1e-12 * expected.abs().max(1.0));
        assert!(run.log_partition.im.abs() < 1e-12);
    }

    #[test]
    fn exact_path_is_the_enumeration_oracle_verbatim() {
        let kind = GenKind::RandomQuadratic { n: 10, delta: 0.25, edge_prob: None, field_scale: 1.0 };
        let f = gen_instance(&kind, 7).unwrap();
        let run = approximate_partition(&f, 0.25, 0.05, &PipelineOptions::default()).unwrap();
        let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();
        assert_eq!(run.path, PipelinePath::Exact);
        assert_eq!(run.log_partition, oracle);
        assert_eq!(run.table_order, 0);
    }

    #[test]
    fn interpolated_path_tracks_the_oracle_at_n_twelve() {
        let kind = GenKind::RandomQuadratic { n: 12, delta: 0.25, edge_prob: None, field_scale: 1.0 };
        let f = gen_instance(&kind, 41).unwrap();
        let epsilon = 0.05;
        let run = approximate_partition(&f, 0.25, epsilon, &forced_interp()).unwrap();
        assert_eq!(run.path, PipelinePath::Interpolated);
        assert!(run.table_order > 0);
        let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();
        let err = (run.log_partition - oracle).norm();
        assert!(
            err <= epsilon,
            "interpolation error {err} exceeds epsilon {epsilon} (order {})",
            run.table_order
        );
        let report = run.report.expect("interpolated runs carry a report");
        assert!(report.tail_bound <= epsilon);
    }

    #[test]
    fn hypothesis_violation_names_the_worst_row() {
        let mut f = CubePolynomial::new(12).unwrap();
        f.set_quadratic(3, 7, Complex64::new(0.9, 0.0)).unwrap();
        let err = approximate_partition(&f, 0.25, 0.05, &PipelineOptions::default()).unwrap_err();
        match err {
            Error::HypothesisFailed { index, .. } => assert!(index == 3 || index == 7),
            other => panic!("expected hypothesis refusal, got {other}"),
        }
    }

    #[test]
    fn epsilon_domain_is_validated() {
        let f = CubePolynomial::new(4).unwrap();
        for eps in [0.0, 1.0, -0.5, 2.0] {
            let err = approximate_partition(&f, 0.5, eps, &PipelineOptions::default()).unwrap_err();
            assert!(matches!(err, Error::EpsilonOutOfRange(_)));
        }
    }

    #[test]
    fn cubic_pipeline_reduces_to_quadratic_exactly() {
        let kind = GenKind::RandomQuadratic { n: 11, delta: 0.3, edge_prob: None, field_scale: 0.5 };
        let f = gen_instance(&kind, 99).unwrap();
        let opts = forced_interp();
        let quad = approximate_partition(&f, 0.3, 0.1, &opts).unwrap();
        let cubic = approximate_partition_cubic(&f, 0.3, 0.1, &opts).unwrap();
        // identical code path once the (empty) triple set is built
        assert_eq!(quad.log_partition, cubic.log_partition);
        assert_eq!(quad.table_order, cubic.table_order);
    }

    #[test]
    fn cubic_single_triple_tracks_the_oracle() {
        let mut f = CubePolynomial::new(9).unwrap();
        f.set_cubic(0, 1, 2, Complex64::new(0.3, 0.0)).unwrap();
        let epsilon = 0.1;
        let run = approximate_partition_cubic(&f, 0.3, epsilon, &forced_interp()).unwrap();
        assert_eq!(run.path, PipelinePath::Interpolated);
        let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();
        let err = (run.log_partition - oracle).norm();
        assert!(err <= epsilon, "cubic interpolation error {err}");
    }

    #[test]
    fn random_cubic_instance_tracks_the_oracle() {
        let kind = GenKind::RandomCubic { n: 10, delta: 0.3, edge_prob: None, field_scale: 0.5 };
        let f = gen_instance(&kind, 5).unwrap();
        assert!(!f.cubic().is_empty(), "seed should produce triples");
        let epsilon = 0.1;
        let run = approximate_partition_cubic(&f, 0.3, epsilon, &forced_interp()).unwrap();
        let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();
        assert!((run.log_partition - oracle).norm() <= epsilon);
    }

    #[test]
    fn oversized_dense_instance_refuses_with_work_limit() {
        let mut f = CubePolynomial::new(30).unwrap();
        for i in 0..30 {
            for j in i + 1..30 {
                f.set_quadratic(i, j, Complex64::new(0.02, 0.0)).unwrap();
            }
        }
        let err = approximate_partition(&f, 0.25, 0.05, &forced_interp()).unwrap_err();
        assert!(matches!(err, Error::WorkLimit { .. }), "got {err}");
    }

    #[test]
    fn determinism_same_seed_same_instance_same_estimate() {
        let kind = GenKind::RandomQuadratic { n: 12, delta: 0.25, edge_prob: None, field_scale: 1.0 };
        let f1 = gen_instance(&kind, 2024).unwrap();
        let f2 = gen_instance(&kind, 2024).unwrap();
        assert_eq!(f1.to_json_string(), f2.to_json_string());
        let opts = forced_interp();
        let r1 = approximate_partition(&f1, 0.25, 0.05, &opts).unwrap();
        let r2 = approximate_partition(&f2, 0.25, 0.05, &opts).unwrap();
        assert_eq!(r1.log_partition.re.to_bits(), r2.log_partition.re.to_bits());
        assert_eq!(r1.log_partition.im.to_bits(), r2.log_partition.im.to_bits());
        let f3 = gen_instance(&kind, 2025).unwrap();
        assert_ne!(f1.to_json_string(), f3.to_json_string());
    }

    #[test]
    fn generated_quadratic_sits_exactly_on_the_row_boundary() {
        let kind = GenKind::RandomQuadratic { n: 14, delta: 0.25, edge_prob: None, field_scale: 1.0 };
        let f = gen_instance(&kind, 3).unwrap();
        let report = model::check_real_quadratic(&f, 0.25).unwrap();
        assert!(report.satisfied);
        let worst = report
            .row_sums
            .iter()
            .map(|r| r.real)
            .fold(0.0f64, f64::max);
        assert!((worst - 0.75).abs() < 1e-12, "worst row {worst}");
    }

    #[test]
    fn complex_boundary_instance_saturates_the_imag_bounds() {
        let delta = 0.3f64;
        let kind = GenKind::ComplexBoundary { n: 10, delta, edge_prob: None, imag_row_target: None };
        let f = gen_instance(&kind, 11).unwrap();
        let report = model::check_complex_quadratic(&f, delta).unwrap();
        assert!(report.satisfied);
        let target = delta * delta / 10.0;
        let worst_im = report.row_sums.iter().map(|r| r.imag).fold(0.0f64, f64::max);
        assert!((worst_im - target).abs() < 1e-12, "worst imag row {worst_im}");
        for r in &report.row_sums {
            assert!((r.imag_linear - target).abs() < 1e-15);
        }
    }

    #[test]
    fn regular_graph_row_sums_hit_the_critical_line() {
        // (Δ/2)·ln(Δ/(Δ−2)) for Δ = 3, 4, 5
        let expected = [
            (3usize, 12usize, 1.6479184330021646f64),
            (4, 11, 1.3862943611198906),
            (5, 12, 1.2770640594149767),
        ];
        for &(degree, n, critical) in &expected {
            let kind = GenKind::RegularGraph { n, degree, ferromagnetic: true };
            let f = gen_instance(&kind, 0).unwrap();
            assert_eq!(f.quadratic().len(), n * degree / 2);
            let report = model::check_real_quadratic(&f, 0.1).unwrap();
            for row in &report.row_sums {
                assert!(
                    (row.real - critical).abs() < 1e-12,
                    "degree {degree}: row sum {} vs {critical}",
                    row.real
                );
            }
        }
    }

    #[test]
    fn regular_graph_rejects_odd_products_and_small_degree() {
        let odd = GenKind::RegularGraph { n: 11, degree: 3, ferromagnetic: true };
        assert!(gen_instance(&odd, 0).is_err());
        let low = GenKind::RegularGraph { n: 11, degree: 2, ferromagnetic: true };
        assert!(gen_instance(&low, 0).is_err());
    }

    #[test]
    fn transformed_instance_passes_the_tightened_bounds() {
        let delta = 0.25f64;
        let kind = GenKind::RandomQuadratic { n: 12, delta, edge_prob: None, field_scale: 1.0 };
        let f = gen_instance(&kind, 17).unwrap();
        let strip = ZeroFreeStrip::for_delta(delta).unwrap();
        let corners = [
            Complex64::new(strip.re_half_extent(), 0.0),
            Complex64::new(-strip.re_half_extent(), strip.im_half_width()),
            Complex64::new(1.0, -strip.im_half_width()),
        ];
        for z in corners {
            let report = verify_transformed_instance(&f, z, delta).unwrap();
            assert!(report.satisfied, "transformed bounds failed at z = {z}");
            assert!((report.real_bound - (1.0 - delta / 2.0)).abs() < 1e-15);
            assert!((report.imag_bound - delta * delta / 40.0).abs() < 1e-15);
        }
        let outside = Complex64::new(0.0, 2.0 * strip.im_half_width());
        assert!(verify_transformed_instance(&f, outside, delta).is_err());
        let small = gen_instance(
            &GenKind::RandomQuadratic { n: 6, delta, edge_prob: None, field_scale: 0.0 },
            1,
        )
        .unwrap();
        assert!(verify_transformed_instance(&small, Complex64::ONE, delta).is_err());
    }

    #[test]
    fn transformed_instance_consistency_identity() {
        // p(z) = e^{Σ â_ij(z)} · S(e^{f̂}) where f̂ has pair weights â and the
        // original vertex fields.
        let delta = 0.25f64;
        let kind = GenKind::RandomQuadratic { n: 10, delta, edge_prob: None, field_scale: 0.8 };
        let f = gen_instance(&kind, 23).unwrap();
        let opts = BruteForceOptions::default();
        let n2 = 100.0;
        for z in [
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.6, 5e-4),
            Complex64::new(1.05, -7e-4),
        ] {
            let mut g = CubePolynomial::new(10).unwrap();
            let mut hat_sum = Complex64::ZERO;
            for (&(i, j), &a) in f.quadratic() {
                let c = (a.re / n2).exp_m1();
                let hat = n2 * (Complex64::ONE + z * c).ln();
                hat_sum += hat;
                g.set_quadratic(i, j, hat).unwrap();
            }
            for (&i, &b) in f.linear() {
                g.set_linear(i, b).unwrap();
            }
            let lhs = exact::p_exact_stats(&f, z, &opts).unwrap().log_sum;
            let rhs = hat_sum + exact::log_partition_sum(&g, &opts).unwrap();
            let mut diff = lhs - rhs;
            diff.im = diff.im.rem_euclid(2.0 * PI);
            if diff.im > PI {
                diff.im -= 2.0 * PI;
            }
            assert!(diff.norm() < 1e-9, "consistency defect {diff} at z = {z}");
        }
    }

    #[test]
    fn leeyang_single_spin_root_at_i_pi_over_two() {
        let grid = [Complex64::new(0.0, 0.5), Complex64::new(0.2, 0.0)];
        let scan = scan_leeyang(1, &[], &grid, &BruteForceOptions::default()).unwrap();
        assert_eq!(scan.roots.len(), 1);
        assert!((scan.roots[0] - Complex64::new(0.0, PI / 2.0)).norm() < 1e-10);
        assert!(scan.max_root_residual < 1e-10);
        assert!(scan.min_normalized_modulus > 0.0);
    }

    #[test]
    fn leeyang_two_spin_roots_stay_on_the_unit_circle() {
        // Q(u) = e·u² + (2/e)·u + e; both roots have |u| = 1.
        let grid: Vec<Complex64> =
            (0..21).map(|t| Complex64::new(-1.0 + 0.1 * t as f64, 0.0)).collect();
        let scan = scan_leeyang(2, &[(0, 1, 1.0)], &grid, &BruteForceOptions::default()).unwrap();
        assert_eq!(scan.roots.len(), 2);
        for b in &scan.roots {
            let u = (2.0 * b).exp();
            assert!((u.norm() - 1.0).abs() <= 1e-10, "|u| = {}", u.norm());
        }
        assert!(scan.max_root_residual < 1e-10);
        // real fields never annihilate a ferromagnet
        assert!(scan.min_normalized_modulus > 1e-3);
    }

    #[test]
    fn leeyang_rejects_negative_couplings() {
        let err = scan_leeyang(2, &[(0, 1, -0.4)], &[], &BruteForceOptions::default()).unwrap_err();
        assert!(matches!(err, Error::HypothesisFailed { .. }));
    }

    #[test]
    fn zero_free_scan_reports_positive_floor() {
        let mut sampler = |t: usize| {
            gen_instance(
                &GenKind::ComplexBoundary { n: 8, delta: 0.3, edge_prob: None, imag_row_target: None },
                500 + t as u64,
            )
        };
        let scan = scan_zero_free(
            &mut sampler,
            CheckKind::ComplexQuadratic,
            0.3,
            20,
            true,
            &BruteForceOptions::default(),
        )
        .unwrap();
        assert_eq!(scan.trials, 20);
        assert!(scan.min_ratio > 1e-12, "min ratio {}", scan.min_ratio);
    }

    #[test]
    fn zero_free_scan_refuses_or_permits_out_of_hypothesis_samplers() {
        let make = |t: usize| {
            gen_instance(
                &GenKind::ComplexBoundary {
                    n: 6,
                    delta: 0.3,
                    edge_prob: None,
                    imag_row_target: Some(PI / 2.0),
                },
                t as u64,
            )
        };
        let mut sampler = make;
        let err = scan_zero_free(
            &mut sampler,
            CheckKind::ComplexQuadratic,
            0.3,
            5,
            true,
            &BruteForceOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::HypothesisFailed { .. }));
        let mut sampler = make;
        let control = scan_zero_free(
            &mut sampler,
            CheckKind::ComplexQuadratic,
            0.3,
            40,
            false,
            &BruteForceOptions::default(),
        )
        .unwrap();
        // π/2-scale imaginary fields drive the sum toward genuine zeros
        assert!(control.min_ratio < 1e-2, "control floor {}", control.min_ratio);
    }

    #[test]
    fn bench_small_records_errors_within_epsilon() {
        let records = run_bench("small", &PipelineOptions::default()).unwrap();
        assert_eq!(records.len(), 3);
        for rec in &records {
            assert!(rec.table_order > 0);
            let err = rec.relative_error.expect("oracle affordable at bench sizes");
            assert!(err <= rec.epsilon, "n = {}: error {err} > {}", rec.n, rec.epsilon);
        }
        assert!(run_bench("huge", &PipelineOptions::default()).is_err());
    }
}
