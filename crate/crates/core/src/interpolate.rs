//! Recovering `ln p(1)` from derivatives of `p` at the origin.
//!
//! When `p` is zero-free on a region containing the segment from 0 to 1,
//! `ln p` is analytic there, and its value at 1 is determined to relative
//! error `ε` by the first `O(ln 1/ε)` Taylor coefficients at 0. The classical
//! arrangement pulls the region back to a disk: find a polynomial `φ` with
//! `φ(0) = 0`, `φ(1) = 1` mapping a disk of radius `ρ > 1` into the region,
//! expand `g = ln(p ∘ φ)` on that disk, and sum the truncated series at 1;
//! the geometric decay `|λ_k| ≲ B ρ^{−k}` makes the truncation error
//! explicit.
//!
//! Two honesty points shape this module. A map is only accepted after a
//! *numeric certification*: thousands of boundary samples of the candidate
//! disk must land inside the strip. And for the thin strips coming out of the
//! zero-free theorems the certification is doomed — the strip is so flat that
//! any admissible `φ` has `ρ − 1` far below machine precision (the hyperbolic
//! length of `[0,1]` in such a strip runs to thousands), so [`build_disk_map`]
//! refuses. The approximation then falls back to an *empirical* radius fitted
//! from the observed decay of the computed coefficients themselves, clearly
//! labeled as such in the report.

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::series::{factorial, TaylorSeries};
use crate::taylor::DerivativeTable;

/// The rectangle `|Re z| ≤ re_half_extent`, `|Im z| ≤ im_half_width` on which
/// the transformed polynomial is guaranteed zero-free for an instance with
/// slack `δ`: extents `1 + δ²` and `δ²/80`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroFreeStrip {
    re_half_extent: f64,
    im_half_width: f64,
    delta: f64,
}

impl ZeroFreeStrip {
    pub fn new(re_half_extent: f64, im_half_width: f64, delta: f64) -> Result<Self> {
        // negated so that NaN parameters are rejected as well
        if !(re_half_extent > 1.0 && im_half_width > 0.0 && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "strip needs re_half_extent > 1, im_half_width > 0, delta > 0; \
                 got ({re_half_extent}, {im_half_width}, {delta})"
            )));
        }
        Ok(ZeroFreeStrip { re_half_extent, im_half_width, delta })
    }

    /// The strip guaranteed for a quadratic instance with slack `δ ∈ (0, 1)`.
    pub fn for_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::DeltaOutOfRange { value: delta, lo: 0.0, hi: 1.0 });
        }
        ZeroFreeStrip::new(1.0 + delta * delta, delta * delta / 80.0, delta)
    }

    pub fn re_half_extent(&self) -> f64 {
        self.re_half_extent
    }

    pub fn im_half_width(&self) -> f64 {
        self.im_half_width
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re.abs() <= self.re_half_extent && z.im.abs() <= self.im_half_width
    }

    /// Distance to the nearest strip boundary; non-negative inside.
    pub fn margin(&self, z: Complex64) -> f64 {
        (self.re_half_extent - z.re.abs()).min(self.im_half_width - z.im.abs())
    }
}

/// A certified polynomial map of a disk into a strip.
#[derive(Debug, Clone)]
pub struct DiskMap {
    phi: TaylorSeries,
    rho: f64,
    margin: f64,
}

impl DiskMap {
    /// The map itself; real coefficients, `φ(0) = 0`, `φ(1) = 1`.
    pub fn phi(&self) -> &TaylorSeries {
        &self.phi
    }

    /// Certified disk radius, `> 1`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Smallest sampled distance from `φ(ρ·boundary)` to the strip boundary.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn degree(&self) -> usize {
        self.phi.order()
    }
}

/// Search space for [`build_disk_map`].
#[derive(Debug, Clone)]
pub struct MapSearchOptions {
    /// Largest map degree tried.
    pub max_degree: usize,
    /// Boundary samples per certification pass (at least 4096 recommended).
    pub boundary_samples: usize,
    /// Contraction parameters of the truncated-logarithm family.
    pub alpha_grid: Vec<f64>,
}

impl Default for MapSearchOptions {
    fn default() -> Self {
        MapSearchOptions {
            max_degree: 1024,
            boundary_samples: 4096,
            alpha_grid: vec![0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98, 0.995],
        }
    }
}

/// Samples `φ(ρ e^{iθ})` on a full turn; returns the minimal strip margin, or
/// `None` on the first sample that escapes the strip.
fn certify(phi: &TaylorSeries, rho: f64, strip: &ZeroFreeStrip, samples: usize) -> Option<f64> {
    let mut worst = f64::INFINITY;
    for t in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * t as f64 / samples as f64;
        let z = Complex64::from_polar(rho, theta);
        let w = phi.evaluate(z);
        let m = strip.margin(w);
        if m < 0.0 {
            return None;
        }
        worst = worst.min(m);
    }
    Some(worst)
}

/// Largest `ρ ∈ [lo_floor, hi]` whose boundary certifies, by bisection;
/// `None` when even `lo_floor` fails (so candidates that cannot beat the
/// current best are discarded after a single pass).
fn max_certified_rho(
    phi: &TaylorSeries,
    lo_floor: f64,
    hi: f64,
    strip: &ZeroFreeStrip,
    samples: usize,
) -> Option<(f64, f64)> {
    let mut lo = lo_floor;
    certify(phi, lo, strip, samples)?;
    let mut hi = hi.max(lo);
    if let Some(margin) = certify(phi, hi, strip, samples) {
        return Some((hi, margin));
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if certify(phi, mid, strip, samples).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    certify(phi, lo, strip, samples).map(|margin| (lo, margin))
}

/// Coefficients of the normalized truncated logarithm
/// `φ(z) = (Σ_{k=1}^{N} (αz)^k/k) / (Σ_{k=1}^{N} α^k/k)`.
fn truncated_log_map(deg: usize, alpha: f64) -> TaylorSeries {
    let mut coeffs = vec![Complex64::ZERO; deg + 1];
    let mut pow = 1.0f64;
    let mut norm = 0.0f64;
    for (k, slot) in coeffs.iter_mut().enumerate().skip(1) {
        pow *= alpha;
        *slot = Complex64::new(pow / k as f64, 0.0);
        norm += pow / k as f64;
    }
    for c in coeffs.iter_mut() {
        *c /= norm;
    }
    TaylorSeries::new(coeffs).expect("degree >= 1 yields a non-empty coefficient vector")
}

/// Searches for a polynomial `φ` with `φ(0) = 0`, `φ(1) = 1`, real
/// coefficients, and a certified radius `ρ > 1` such that `φ` maps the closed
/// `ρ`-disk into the strip. Candidates are the identity and the normalized
/// truncated-logarithm family; certification is numeric boundary sampling.
///
/// For the thin strips produced by [`ZeroFreeStrip::for_delta`] at moderate
/// `δ` no analytic map can do this with `ρ − 1` representable in floating
/// point, and the search refuses with [`Error::MapCertification`].
pub fn build_disk_map(strip: &ZeroFreeStrip, opts: &MapSearchOptions) -> Result<DiskMap> {
    let samples = opts.boundary_samples.max(16);
    let mut best: Option<DiskMap> = None;

    // the identity qualifies up to the smaller half-extent of the strip
    let identity =
        TaylorSeries::new(vec![Complex64::ZERO, Complex64::ONE]).expect("two coefficients");
    let rho_id = strip.re_half_extent.min(strip.im_half_width);
    if rho_id > 1.0 + 1e-9 {
        if let Some(margin) = certify(&identity, rho_id, strip, samples) {
            best = Some(DiskMap { phi: identity, rho: rho_id, margin });
        }
    }

    let mut deg = 1usize;
    while deg <= opts.max_degree {
        for &alpha in &opts.alpha_grid {
            // beyond |z| ≈ 1/α the truncated series blows up, so cap there
            let hi = (0.999 / alpha).min(4.0);
            let floor = best.as_ref().map_or(1.0 + 1e-9, |b| b.rho + 1e-9);
            if hi <= floor {
                continue;
            }
            let phi = truncated_log_map(deg, alpha);
            if let Some((rho, margin)) = max_certified_rho(&phi, floor, hi, strip, samples) {
                best = Some(DiskMap { phi, rho, margin });
            }
        }
        deg *= 2;
    }

    best.ok_or(Error::MapCertification { delta: strip.delta, max_degree: opts.max_degree })
}

/// Coefficients `λ_0..λ_m` of `ln p` from the coefficients of `p`:
/// `λ_0 = Log b_0` (principal branch) and
/// `k·λ_k·b_0 = k·b_k − Σ_{j=1}^{k−1} j·λ_j·b_{k−j}`.
pub fn log_series(p: &TaylorSeries, m: usize) -> Result<TaylorSeries> {
    let b0 = p.coeff(0);
    if b0 == Complex64::ZERO {
        return Err(Error::SingularSeries);
    }
    if m > p.order() {
        return Err(Error::InvalidParameter(format!(
            "log series to order {m} needs {} coefficients, have {}",
            m + 1,
            p.order() + 1
        )));
    }
    // work with s_k = b_k / b_0 so magnitudes stay near unity
    let s: Vec<Complex64> = (0..=m).map(|k| p.coeff(k) / b0).collect();
    let mut lambda = vec![Complex64::ZERO; m + 1];
    lambda[0] = b0.ln();
    for k in 1..=m {
        let mut acc = k as f64 * s[k];
        for j in 1..k {
            acc -= (j as f64) * lambda[j] * s[k - j];
        }
        lambda[k] = acc / k as f64;
    }
    TaylorSeries::new(lambda)
}

/// How the disk map for [`approx_log_p1`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    /// Try a certified map; fall back to the empirical radius if it is
    /// refused or too weak for the requested accuracy.
    Auto,
    /// Only accept a certified map; propagate its refusal.
    CertifiedOnly,
    /// Skip certification and use the empirical radius directly.
    EmpiricalOnly,
}

#[derive(Debug, Clone)]
pub struct InterpOptions {
    pub map_mode: MapMode,
    pub map_search: MapSearchOptions,
    /// Smallest truncation order tried; grows by doubling up to the table.
    pub min_order: usize,
    /// Fraction of the fitted radius excess `ρ̂ − 1` actually used.
    pub safety: f64,
}

impl Default for InterpOptions {
    fn default() -> Self {
        InterpOptions {
            map_mode: MapMode::Auto,
            map_search: MapSearchOptions::default(),
            min_order: 8,
            safety: 0.9,
        }
    }
}

fn serialize_complex<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Result of an interpolation run.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    /// Estimate of `ln p(1)`, branch continued from the positive value at 0.
    #[serde(serialize_with = "serialize_complex")]
    pub log_p1: Complex64,
    /// Truncation order actually used.
    pub order_m: usize,
    /// The accuracy target the run was asked for.
    pub epsilon: f64,
    /// Degree of the disk map (1 when the identity / empirical route is used).
    pub map_degree: usize,
    /// Certified or fitted bound on the discarded tail; `≤ epsilon` on success.
    pub tail_bound: f64,
    pub diagnostics: String,
}

/// `B = max_k |λ_k| ρ^k` over `1 ≤ k ≤ m` and the induced geometric tail
/// bound `Σ_{k>m} B ρ^{−k}`.
fn tail_at(lambda: &TaylorSeries, rho: f64, m: usize) -> (f64, f64) {
    let mut b = 0.0f64;
    for k in 1..=m {
        b = b.max(lambda.coeff(k).norm() * rho.powi(k as i32));
    }
    if b == 0.0 {
        return (0.0, 0.0);
    }
    let tail = b * rho.powi(-(m as i32 + 1)) / (1.0 - 1.0 / rho);
    (b, tail)
}

/// Smallest order with `B ρ^{−(m+1)}/(1−1/ρ) ≤ ε` for the given `B`, `ρ`.
fn required_order(b: f64, rho: f64, epsilon: f64) -> usize {
    if b == 0.0 {
        return 0;
    }
    let need = (b / (epsilon * (1.0 - 1.0 / rho))).ln() / rho.ln() - 1.0;
    need.ceil().max(0.0) as usize
}

/// Approximates `ln p(1)` from the derivative table to relative error
/// `epsilon`, reporting the truncation order, the disk map used, and the tail
/// bound. Refuses with [`Error::InsufficientOrder`] (carrying a required-order
/// estimate) when the table is too short for the requested accuracy.
pub fn approx_log_p1(
    derivs: &DerivativeTable,
    strip: &ZeroFreeStrip,
    epsilon: f64,
    opts: &InterpOptions,
) -> Result<ApproxReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let avail = derivs.order();
    let coeffs: Vec<Complex64> = derivs
        .raw_values()
        .iter()
        .enumerate()
        .map(|(k, &v)| v / factorial(k))
        .collect();
    if coeffs[0] == Complex64::ZERO {
        return Err(Error::SingularSeries);
    }
    let log_scale = Complex64::new(derivs.log_scale(), 0.0);

    let map = match opts.map_mode {
        MapMode::CertifiedOnly => Some(build_disk_map(strip, &opts.map_search)?),
        MapMode::Auto => build_disk_map(strip, &opts.map_search).ok(),
        MapMode::EmpiricalOnly => None,
    };

    // truncation schedule: min_order, doubling, always ending at the table
    let mut schedule: Vec<usize> = Vec::new();
    let mut m = opts.min_order.max(1).min(avail);
    loop {
        schedule.push(m);
        if m >= avail {
            break;
        }
        m = (m * 2).min(avail);
    }

    let mut best_required = usize::MAX;
    for &m in &schedule {
        let p_trunc = TaylorSeries::new(coeffs[..=m].to_vec()).expect("prefix is non-empty");

        if let Some(map) = &map {
            let q = p_trunc.compose_trunc(map.phi(), m)?;
            let mut lambda = log_series(&q, m)?;
            lambda.coeffs_mut()[0] += log_scale;
            let (b, tail) = tail_at(&lambda, map.rho(), m);
            if tail <= epsilon {
                let log_p1 = lambda.coeffs().iter().sum();
                return Ok(ApproxReport {
                    log_p1,
                    order_m: m,
                    epsilon,
                    map_degree: map.degree(),
                    tail_bound: tail,
                    diagnostics: format!(
                        "certified map: degree {}, rho = {:.6e}, boundary margin = {:.3e}, B = {:.6e}",
                        map.degree(),
                        map.rho(),
                        map.margin(),
                        b
                    ),
                });
            }
            best_required = best_required.min(required_order(b, map.rho(), epsilon));
        }

        if opts.map_mode != MapMode::CertifiedOnly {
            let mut lambda = log_series(&p_trunc, m)?;
            lambda.coeffs_mut()[0] += log_scale;
            // fit the decay radius on the trailing half of the prefix
            let window_lo = (m / 2).max(1);
            let mut rho_hat = f64::INFINITY;
            for k in window_lo..=m {
                let mag = lambda.coeff(k).norm();
                if mag > 0.0 {
                    rho_hat = rho_hat.min(mag.powf(-1.0 / k as f64));
                }
            }
            if rho_hat == f64::INFINITY {
                // every fitted coefficient vanishes: the series terminates here
                let log_p1 = lambda.coeffs().iter().sum();
                return Ok(ApproxReport {
                    log_p1,
                    order_m: m,
                    epsilon,
                    map_degree: 1,
                    tail_bound: 0.0,
                    diagnostics: "series terminates within the table; tail is zero".into(),
                });
            }
            if rho_hat > 1.0 + 1e-9 {
                let rho_use = 1.0 + opts.safety * (rho_hat - 1.0);
                let (b, tail) = tail_at(&lambda, rho_use, m);
                if tail <= epsilon {
                    let log_p1 = lambda.coeffs().iter().sum();
                    return Ok(ApproxReport {
                        log_p1,
                        order_m: m,
                        epsilon,
                        map_degree: 1,
                        tail_bound: tail,
                        diagnostics: format!(
                            "empirical radius: rho_hat = {:.6e} fitted on orders {}..={}, \
                             rho_used = {:.6e}, B = {:.6e}",
                            rho_hat, window_lo, m, rho_use, b
                        ),
                    });
                }
                best_required = best_required.min(required_order(b, rho_use, epsilon));
            }
        }
    }

    let required = if best_required == usize::MAX { avail.saturating_mul(2).max(16) } else { best_required };
    Err(Error::InsufficientOrder { available: avail, required, epsilon })
}
