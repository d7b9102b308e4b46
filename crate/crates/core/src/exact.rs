//! Brute-force enumeration oracles.
//!
//! All sums here walk spin configurations in Gray-code order, so consecutive
//! configurations differ in one spin and the polynomial value is updated in
//! `O(degree)` work per step (with a periodic from-scratch recomputation to
//! kill drift). Accumulation is Kahan-compensated; when `max_i |b_i| > 300`
//! the accumulator switches to a shifted log-magnitude form so that huge
//! fields neither overflow nor silently flush the sum.
//!
//! These routines are the ground truth the fast paths are tested against, so
//! they stay deliberately simple: every configuration is visited.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CubePolynomial, SpinVector};
use crate::series::factorial;
use crate::taylor::{c_from_a, DerivativeTable, HyperWeights};

/// Caps for the enumeration oracles.
#[derive(Debug, Clone)]
pub struct BruteForceOptions {
    /// Largest number of free spins an oracle will enumerate (2^cap terms).
    pub cap: usize,
    /// Largest derivative order the series oracles accept.
    pub order_cap: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions { cap: 24, order_cap: 64 }
    }
}

/// A face of the cube: a set of fixed spins, the rest free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    n: usize,
    fixed: BTreeMap<usize, i8>,
}

impl Face {
    pub fn whole_cube(n: usize) -> Self {
        Face { n, fixed: BTreeMap::new() }
    }

    pub fn new(n: usize, fixed: &[(usize, i8)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(i, s) in fixed {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if s != 1 && s != -1 {
                return Err(Error::InvalidSpin(s));
            }
            if map.insert(i, s).is_some() {
                return Err(Error::DuplicateKey(vec![i]));
            }
        }
        Ok(Face { n, fixed: map })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of free spins.
    pub fn dim(&self) -> usize {
        self.n - self.fixed.len()
    }

    pub fn fixed(&self) -> &BTreeMap<usize, i8> {
        &self.fixed
    }

    /// Splits along a free index: the subfaces with `ξ_i = +1` and `ξ_i = −1`.
    pub fn split(&self, i: usize) -> Result<(Face, Face)> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if self.fixed.contains_key(&i) {
            return Err(Error::InvalidParameter(format!("index {i} is already fixed")));
        }
        let mut plus = self.clone();
        let mut minus = self.clone();
        plus.fixed.insert(i, 1);
        minus.fixed.insert(i, -1);
        Ok((plus, minus))
    }
}

// ---------------------------------------------------------------------------
// Accumulation of Σ e^{w_t}
// ---------------------------------------------------------------------------

/// Kahan-compensated accumulator for sums of exponentials. In plain mode the
/// terms are ordinary doubles; in shifted mode the accumulator keeps
/// `sum · e^{shift}` with the shift tracking the running maximum of `Re w`.
struct ExpSum {
    adaptive: bool,
    shift: f64,
    sum: Complex64,
    comp: Complex64,
}

impl ExpSum {
    fn new(adaptive: bool) -> Self {
        ExpSum {
            adaptive,
            shift: if adaptive { f64::NEG_INFINITY } else { 0.0 },
            sum: Complex64::ZERO,
            comp: Complex64::ZERO,
        }
    }

    /// Adds `e^w`.
    fn add_exp(&mut self, w: Complex64) {
        if w.re == f64::NEG_INFINITY {
            return; // a zero term
        }
        if self.adaptive && w.re > self.shift {
            if self.shift == f64::NEG_INFINITY {
                self.shift = w.re;
            } else {
                let factor = (self.shift - w.re).exp();
                self.sum *= factor;
                self.comp *= factor;
                self.shift = w.re;
            }
        }
        let term = Complex64::from_polar((w.re - self.shift).exp(), w.im);
        let y = term - self.comp;
        let s = self.sum + y;
        self.comp = (s - self.sum) - y;
        self.sum = s;
    }

    /// `ln` of the accumulated sum as `ln|Σ| + i·arg(Σ)`.
    fn log_value(&self) -> Complex64 {
        if self.sum == Complex64::ZERO {
            return Complex64::new(f64::NEG_INFINITY, 0.0);
        }
        Complex64::new(self.shift + self.sum.norm().ln(), self.sum.arg())
    }

    /// The plain value; may overflow to infinity when the log form doesn't.
    fn value(&self) -> Complex64 {
        if self.shift == 0.0 {
            self.sum
        } else {
            self.sum * self.shift.exp()
        }
    }
}

/// Value of an enumerated sum in both plain and logarithmic form, plus the
/// log of the sum of term magnitudes (for normalized-modulus diagnostics).
#[derive(Debug, Clone, Copy)]
pub struct EnumerationStats {
    pub sum: Complex64,
    pub log_sum: Complex64,
    /// `ln Σ_x |e^{f(x)}|`.
    pub log_abs_sum: f64,
}

impl EnumerationStats {
    /// `|Σ| / Σ|terms|` computed in log space.
    pub fn normalized_modulus(&self) -> f64 {
        (self.log_sum.re - self.log_abs_sum).exp()
    }
}

// ---------------------------------------------------------------------------
// Partition and face sums
// ---------------------------------------------------------------------------

struct Adjacency {
    lin: Vec<Complex64>,
    quad: Vec<Vec<(usize, Complex64)>>,
    cubic: Vec<Vec<(usize, usize, Complex64)>>,
}

fn build_adjacency(f: &CubePolynomial) -> Adjacency {
    let n = f.n();
    let mut adj = Adjacency {
        lin: vec![Complex64::ZERO; n],
        quad: vec![Vec::new(); n],
        cubic: vec![Vec::new(); n],
    };
    for (&i, &b) in f.linear() {
        adj.lin[i] = b;
    }
    for (&(i, j), &a) in f.quadratic() {
        adj.quad[i].push((j, a));
        adj.quad[j].push((i, a));
    }
    for (&(i, j, k), &c) in f.cubic() {
        adj.cubic[i].push((j, k, c));
        adj.cubic[j].push((i, k, c));
        adj.cubic[k].push((i, j, c));
    }
    adj
}

fn eval_spins(f: &CubePolynomial, spins: &[i8]) -> Complex64 {
    let x = SpinVector::new(spins.to_vec()).expect("internal spins are ±1");
    f.evaluate(&x).expect("internal spins match the instance dimension")
}

/// Sums `e^{f(x)}` over a face of the cube; `EnumerationStats` carries the
/// plain value, its logarithm, and `ln Σ |e^{f(x)}|`.
pub fn face_stats(f: &CubePolynomial, face: &Face, opts: &BruteForceOptions) -> Result<EnumerationStats> {
    if face.n() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: face.n() });
    }
    let dim = face.dim();
    if dim > opts.cap || dim >= 64 {
        return Err(Error::BruteForceCap { n: dim, cap: opts.cap });
    }

    let adj = build_adjacency(f);
    let free: Vec<usize> = (0..f.n()).filter(|i| !face.fixed().contains_key(i)).collect();
    let mut spins: Vec<i8> = (0..f.n()).map(|i| *face.fixed().get(&i).unwrap_or(&1)).collect();

    let adaptive = f.max_linear_norm() > 300.0;
    let mut main = ExpSum::new(adaptive);
    let mut mags = ExpSum::new(adaptive);

    let mut cur = eval_spins(f, &spins);
    let total: u64 = 1 << dim;
    for step in 0..total {
        main.add_exp(cur);
        mags.add_exp(Complex64::new(cur.re, 0.0));
        if step + 1 == total {
            break;
        }
        if (step + 1) & 0xFFF == 0 {
            // periodic from-scratch recomputation bounds incremental drift;
            // every 4096 steps keeps the rounding walk below 1e-12 relative
            // even for exponents of size ~50
            cur = eval_spins(f, &spins);
        }
        let v = free[(step + 1).trailing_zeros() as usize];
        let mut t = adj.lin[v];
        for &(u, a) in &adj.quad[v] {
            t += a * f64::from(spins[u]);
        }
        for &(u, w, c) in &adj.cubic[v] {
            t += c * f64::from(spins[u] * spins[w]);
        }
        cur -= 2.0 * f64::from(spins[v]) * t;
        spins[v] = -spins[v];
    }

    Ok(EnumerationStats {
        sum: main.value(),
        log_sum: main.log_value(),
        log_abs_sum: mags.log_value().re,
    })
}

pub fn partition_stats(f: &CubePolynomial, opts: &BruteForceOptions) -> Result<EnumerationStats> {
    face_stats(f, &Face::whole_cube(f.n()), opts)
}

/// `S(e^f) = Σ_{x ∈ {−1,1}^n} e^{f(x)}`.
pub fn partition_sum(f: &CubePolynomial, opts: &BruteForceOptions) -> Result<Complex64> {
    Ok(partition_stats(f, opts)?.sum)
}

/// `ln S(e^f)` as `ln|S| + i·arg S`; finite even when `S` itself overflows.
pub fn log_partition_sum(f: &CubePolynomial, opts: &BruteForceOptions) -> Result<Complex64> {
    Ok(partition_stats(f, opts)?.log_sum)
}

/// Sum of `e^{f(x)}` over the given face.
pub fn face_sum(f: &CubePolynomial, face: &Face, opts: &BruteForceOptions) -> Result<Complex64> {
    Ok(face_stats(f, face, opts)?.sum)
}

// ---------------------------------------------------------------------------
// The auxiliary univariate polynomial p(z)
// ---------------------------------------------------------------------------

enum EdgeLog {
    Finite(Complex64),
    /// `1 + z·c_u = 0`: the factor annihilates every consistent configuration.
    Null,
}

/// Evaluates
/// `p(z) = Σ_ξ Π_{i<j} (z·c_ij + 1)^{n²(ξ_iξ_j+1)} · Π_i e^{b_i ξ_i}`
/// by enumeration, with `c_ij = e^{a_ij/n²} − 1`. Exponents on consistent
/// edges (`ξ_iξ_j = 1`) are `2n²`, otherwise `0`, so each configuration
/// contributes `exp(2n² Σ_{consistent} ln(1+z·c) + Σ b_i ξ_i)`.
pub fn p_exact_stats(f: &CubePolynomial, z: Complex64, opts: &BruteForceOptions) -> Result<EnumerationStats> {
    let n = f.n();
    if n > opts.cap || n >= 64 {
        return Err(Error::BruteForceCap { n, cap: opts.cap });
    }
    let weights = c_from_a(f)?; // validates: quadratic, real
    let m2 = 2.0 * (n as f64) * (n as f64);

    let edges: Vec<(usize, usize, EdgeLog)> = weights
        .pairs()
        .iter()
        .map(|(&(i, j), &c)| {
            let base = Complex64::ONE + z * c;
            let log = if base == Complex64::ZERO { EdgeLog::Null } else { EdgeLog::Finite(base.ln()) };
            (i, j, log)
        })
        .collect();
    let mut edge_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(i, j, _)) in edges.iter().enumerate() {
        edge_at[i].push(e);
        edge_at[j].push(e);
    }

    let b: Vec<Complex64> = (0..n).map(|i| f.linear_coeff(i)).collect();
    let adaptive = f.max_linear_norm() > 300.0;
    let mut main = ExpSum::new(adaptive);
    let mut mags = ExpSum::new(adaptive);

    let mut spins: Vec<i8> = vec![1; n];
    let recompute = |spins: &[i8]| -> (Complex64, u64, Complex64) {
        let mut g = Complex64::ZERO;
        let mut nulls = 0u64;
        for &(i, j, ref l) in &edges {
            if spins[i] * spins[j] == 1 {
                match l {
                    EdgeLog::Finite(v) => g += v,
                    EdgeLog::Null => nulls += 1,
                }
            }
        }
        let lb = (0..n).map(|i| b[i] * f64::from(spins[i])).sum();
        (g, nulls, lb)
    };
    let (mut g, mut nulls, mut lb) = recompute(&spins);

    let total: u64 = 1 << n;
    for step in 0..total {
        if nulls == 0 {
            let w = m2 * g + lb;
            main.add_exp(w);
            mags.add_exp(Complex64::new(w.re, 0.0));
        }
        if step + 1 == total {
            break;
        }
        if (step + 1) & 0x3FFF == 0 {
            let fresh = recompute(&spins);
            g = fresh.0;
            nulls = fresh.1;
            lb = fresh.2;
        }
        let v = (step + 1).trailing_zeros() as usize;
        for &e in &edge_at[v] {
            let (i, j, ref l) = edges[e];
            let was_consistent = spins[i] * spins[j] == 1;
            match l {
                EdgeLog::Finite(val) => {
                    if was_consistent {
                        g -= val;
                    } else {
                        g += val;
                    }
                }
                EdgeLog::Null => {
                    if was_consistent {
                        nulls -= 1;
                    } else {
                        nulls += 1;
                    }
                }
            }
        }
        lb -= 2.0 * f64::from(spins[v]) * b[v];
        spins[v] = -spins[v];
    }

    Ok(EnumerationStats {
        sum: main.value(),
        log_sum: main.log_value(),
        log_abs_sum: mags.log_value().re,
    })
}

pub fn p_exact(f: &CubePolynomial, z: Complex64, opts: &BruteForceOptions) -> Result<Complex64> {
    Ok(p_exact_stats(f, z, opts)?.sum)
}

// ---------------------------------------------------------------------------
// Derivative oracles for p at z = 0
// ---------------------------------------------------------------------------

/// First `kmax+1` derivatives `p^{(k)}(0)` by multiplying order-`kmax`
/// truncations of the binomial series `(1+z·c_u)^{2n²}` over consistent edges,
/// configuration by configuration. Independent of the combinatorial formula.
pub fn p_deriv_table(f: &CubePolynomial, kmax: usize, opts: &BruteForceOptions) -> Result<Vec<Complex64>> {
    let n = f.n();
    if n > opts.cap || n >= 64 {
        return Err(Error::BruteForceCap { n, cap: opts.cap });
    }
    if kmax > opts.order_cap {
        return Err(Error::OrderCap { k: kmax, cap: opts.order_cap });
    }
    let weights = c_from_a(f)?;
    let m2 = 2.0 * (n as f64) * (n as f64);

    // order-kmax truncation of (1 + z·c)^{2n²} per edge
    let edges: Vec<(usize, usize, Vec<Complex64>)> = weights
        .pairs()
        .iter()
        .map(|(&(i, j), &c)| {
            let mut series = vec![Complex64::ZERO; kmax + 1];
            let mut coef = Complex64::ONE; // binom(2n², t) · c^t
            series[0] = coef;
            for (t, slot) in series.iter_mut().enumerate().skip(1) {
                coef *= c * ((m2 - (t as f64 - 1.0)) / t as f64);
                *slot = coef;
            }
            (i, j, series)
        })
        .collect();

    let b: Vec<f64> = (0..n).map(|i| f.linear_coeff(i).re).collect();
    let mut acc = vec![Complex64::ZERO; kmax + 1];
    let mut prod = vec![Complex64::ZERO; kmax + 1];
    let mut next = vec![Complex64::ZERO; kmax + 1];

    for mask in 0u64..(1 << n) {
        let spin = |i: usize| if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
        prod.iter_mut().for_each(|x| *x = Complex64::ZERO);
        prod[0] = Complex64::ONE;
        let mut top = 0usize; // current truncation frontier of the product
        for &(i, j, ref series) in &edges {
            if spin(i) * spin(j) != 1.0 {
                continue;
            }
            let new_top = (top + kmax).min(kmax);
            next.iter_mut().for_each(|x| *x = Complex64::ZERO);
            for s in 0..=top {
                let a = prod[s];
                if a == Complex64::ZERO {
                    continue;
                }
                for t in 0..=(new_top - s).min(kmax) {
                    next[s + t] += a * series[t];
                }
            }
            std::mem::swap(&mut prod, &mut next);
            top = new_top;
        }
        let weight = (0..n).map(|i| b[i] * spin(i)).sum::<f64>().exp();
        for (a, p) in acc.iter_mut().zip(prod.iter()) {
            *a += weight * p;
        }
    }

    Ok((0..=kmax).map(|k| acc[k] * factorial(k)).collect())
}

/// `p^{(k)}(0)` from the binomial-series product oracle.
pub fn p_deriv_oracle(f: &CubePolynomial, k: usize, opts: &BruteForceOptions) -> Result<Complex64> {
    Ok(p_deriv_table(f, k, opts)?[k])
}

/// Derivative table of the generalized `p(z)` for pair/triple weights, via
/// Gray-code enumeration of `exp(Σ_{consistent} 2·base_e·ln(1+z·c_e) + Σ b_i ξ_i)`
/// expanded as a truncated series in `z`. This is the workhorse the
/// approximation pipeline falls back to when the combinatorial formula is out
/// of budget but `2^n` enumeration is not.
pub fn p_series_table(
    weights: &HyperWeights,
    b: &[f64],
    m: usize,
    opts: &BruteForceOptions,
) -> Result<DerivativeTable> {
    let n = weights.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if n > opts.cap || n >= 64 {
        return Err(Error::BruteForceCap { n, cap: opts.cap });
    }

    // per-edge log series: 2·base·Σ_t (−1)^{t+1} (c·z)^t / t
    struct HyperEdge {
        vertices: [usize; 3],
        arity: usize,
        lvec: Vec<Complex64>,
    }
    let mut edges: Vec<HyperEdge> = Vec::new();
    let log_series = |c: Complex64, base: f64| -> Vec<Complex64> {
        let mut v = vec![Complex64::ZERO; m + 1];
        let mut pow = Complex64::ONE;
        for (t, slot) in v.iter_mut().enumerate().skip(1) {
            pow *= c;
            let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
            *slot = 2.0 * base * sign * pow / t as f64;
        }
        v
    };
    for (&(i, j), &c) in weights.pairs() {
        edges.push(HyperEdge { vertices: [i, j, usize::MAX], arity: 2, lvec: log_series(c, weights.pair_base()) });
    }
    for (&(i, j, k), &d) in weights.triples() {
        edges.push(HyperEdge { vertices: [i, j, k], arity: 3, lvec: log_series(d, weights.triple_base()) });
    }
    let mut edge_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, he) in edges.iter().enumerate() {
        for &v in &he.vertices[..he.arity] {
            edge_at[v].push(e);
        }
    }

    let shift: f64 = b.iter().map(|x| x.abs()).sum();
    let mut spins: Vec<i8> = vec![1; n];
    let consistent = |he: &HyperEdge, spins: &[i8]| -> bool {
        he.vertices[..he.arity].iter().map(|&v| i32::from(spins[v])).product::<i32>() == 1
    };
    let recompute = |spins: &[i8], svec: &mut [Complex64]| -> f64 {
        svec.iter_mut().for_each(|x| *x = Complex64::ZERO);
        for he in &edges {
            if consistent(he, spins) {
                for (s, l) in svec.iter_mut().zip(he.lvec.iter()) {
                    *s += l;
                }
            }
        }
        (0..n).map(|i| b[i] * f64::from(spins[i])).sum()
    };

    let mut svec = vec![Complex64::ZERO; m + 1];
    let mut lw = recompute(&spins, &mut svec);
    let mut evec = vec![Complex64::ZERO; m + 1];
    let mut acc = vec![Complex64::ZERO; m + 1];
    let mut comp = vec![Complex64::ZERO; m + 1];

    let total: u64 = 1 << n;
    for step in 0..total {
        // exp of the truncated log series, scaled by the (shifted) weight
        evec[0] = Complex64::new((lw - shift).exp(), 0.0);
        for k in 1..=m {
            let mut s = Complex64::ZERO;
            for j in 1..=k {
                s += (j as f64) * svec[j] * evec[k - j];
            }
            evec[k] = s / k as f64;
        }
        for k in 0..=m {
            let y = evec[k] - comp[k];
            let t = acc[k] + y;
            comp[k] = (t - acc[k]) - y;
            acc[k] = t;
        }

        if step + 1 == total {
            break;
        }
        if (step + 1) & 0x3FFF == 0 {
            lw = recompute(&spins, &mut svec);
        }
        let v = (step + 1).trailing_zeros() as usize;
        for &e in &edge_at[v] {
            let he = &edges[e];
            if consistent(he, &spins) {
                for (s, l) in svec.iter_mut().zip(he.lvec.iter()) {
                    *s -= l;
                }
            } else {
                for (s, l) in svec.iter_mut().zip(he.lvec.iter()) {
                    *s += l;
                }
            }
        }
        lw -= 2.0 * f64::from(spins[v]) * b[v];
        spins[v] = -spins[v];
    }

    let values = (0..=m).map(|k| acc[k] * factorial(k)).collect();
    Ok(DerivativeTable::with_log_scale(values, n, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CubePolynomial;
    use crate::taylor::HyperWeights;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn opts() -> BruteForceOptions {
        BruteForceOptions::default()
    }

    /// Naive reference: evaluate f at every configuration directly.
    fn naive_sum(f: &CubePolynomial) -> Complex64 {
        let n = f.n();
        let mut acc = Complex64::ZERO;
        for mask in 0u64..(1 << n) {
            let x = SpinVector::from_bits(mask, n);
            acc += f.evaluate(&x).unwrap().exp();
        }
        acc
    }

    #[test]
    fn single_spin_field() {
        // S = e^{ln 2} + e^{−ln 2} = 2.5
        let mut f = CubePolynomial::new(1).unwrap();
        f.set_linear(0, r(2.0f64.ln())).unwrap();
        let s = partition_sum(&f, &opts()).unwrap();
        assert!((s - r(2.5)).norm() < 1e-15);
    }

    #[test]
    fn single_edge_partition() {
        // n = 2, a_01 = 1: S = 2e + 2e^{−1}
        let mut f = CubePolynomial::new(2).unwrap();
        f.set_quadratic(0, 1, r(1.0)).unwrap();
        let s = partition_sum(&f, &opts()).unwrap();
        let expect = 2.0 * 1.0f64.exp() + 2.0 * (-1.0f64).exp();
        assert!((s - r(expect)).norm() < 1e-14 * expect);
    }

    #[test]
    fn zero_polynomial_counts_configurations() {
        let f = CubePolynomial::new(10).unwrap();
        let s = partition_sum(&f, &opts()).unwrap();
        assert_eq!(s, r(1024.0));
    }

    #[test]
    fn gray_incremental_matches_naive_on_mixed_instance() {
        let mut f = CubePolynomial::new(5).unwrap();
        f.set_quadratic(0, 1, Complex64::new(0.3, 0.05)).unwrap();
        f.set_quadratic(2, 4, Complex64::new(-0.7, 0.0)).unwrap();
        f.set_cubic(0, 2, 3, Complex64::new(0.21, -0.04)).unwrap();
        f.set_cubic(1, 3, 4, r(-0.11)).unwrap();
        f.set_linear(3, Complex64::new(0.9, 0.2)).unwrap();
        let fast = partition_sum(&f, &opts()).unwrap();
        let slow = naive_sum(&f);
        assert!((fast - slow).norm() <= 1e-13 * slow.norm());
    }

    #[test]
    fn linear_only_matches_product_of_cosh() {
        let bs = [0.3, -1.2, 0.0, 2.1, -0.4, 0.9, 1.7];
        let mut f = CubePolynomial::new(bs.len()).unwrap();
        for (i, &b) in bs.iter().enumerate() {
            f.set_linear(i, r(b)).unwrap();
        }
        let s = partition_sum(&f, &opts()).unwrap();
        let expect: f64 = bs.iter().map(|b| 2.0 * b.cosh()).product();
        assert!((s - r(expect)).norm() < 1e-13 * expect);
    }

    #[test]
    fn face_sum_fixing_one_spin() {
        // n = 2, a_01 = 1, face ξ_0 = +1: e + e^{−1}
        let mut f = CubePolynomial::new(2).unwrap();
        f.set_quadratic(0, 1, r(1.0)).unwrap();
        let face = Face::new(2, &[(0, 1)]).unwrap();
        let s = face_sum(&f, &face, &opts()).unwrap();
        let expect = 1.0f64.exp() + (-1.0f64).exp();
        assert!((s - r(expect)).norm() < 1e-14 * expect);
    }

    #[test]
    fn face_splitting_identity() {
        let mut f = CubePolynomial::new(6).unwrap();
        f.set_quadratic(0, 3, Complex64::new(0.4, 0.1)).unwrap();
        f.set_quadratic(1, 2, r(-0.6)).unwrap();
        f.set_cubic(1, 4, 5, Complex64::new(0.2, -0.3)).unwrap();
        f.set_linear(4, Complex64::new(-0.5, 0.7)).unwrap();
        let face = Face::new(6, &[(2, -1)]).unwrap();
        let (plus, minus) = face.split(4).unwrap();
        let whole = face_sum(&f, &face, &opts()).unwrap();
        let parts = face_sum(&f, &plus, &opts()).unwrap() + face_sum(&f, &minus, &opts()).unwrap();
        assert!((whole - parts).norm() <= 1e-13 * whole.norm());
    }

    #[test]
    fn zero_dimensional_face_is_a_point_evaluation() {
        let mut f = CubePolynomial::new(3).unwrap();
        f.set_quadratic(0, 2, r(0.8)).unwrap();
        f.set_linear(1, r(-0.3)).unwrap();
        let face = Face::new(3, &[(0, 1), (1, -1), (2, -1)]).unwrap();
        let s = face_sum(&f, &face, &opts()).unwrap();
        let x = SpinVector::new(vec![1, -1, -1]).unwrap();
        let expect = f.evaluate(&x).unwrap().exp();
        assert!((s - expect).norm() < 1e-15 * expect.norm());
    }

    #[test]
    fn huge_fields_use_the_shifted_accumulator() {
        // linear-only: ln S = Σ ln(2 cosh b_i), finite even though e^{400} overflows
        let bs = [400.0, -350.0, 120.0];
        let mut f = CubePolynomial::new(3).unwrap();
        for (i, &b) in bs.iter().enumerate() {
            f.set_linear(i, r(b)).unwrap();
        }
        let log_s = log_partition_sum(&f, &opts()).unwrap();
        let expect: f64 = bs
            .iter()
            .map(|b: &f64| b.abs() + (-2.0 * b.abs()).exp().ln_1p())
            .sum();
        assert!((log_s.re - expect).abs() < 1e-12 * expect.abs());
        assert_eq!(log_s.im, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let f = CubePolynomial::new(30).unwrap();
        assert!(matches!(partition_sum(&f, &opts()), Err(Error::BruteForceCap { .. })));
        let small = BruteForceOptions { cap: 4, ..Default::default() };
        let g = CubePolynomial::new(5).unwrap();
        assert!(matches!(partition_sum(&g, &small), Err(Error::BruteForceCap { .. })));
        // a face with few enough free spins passes under the same cap
        let face = Face::new(5, &[(0, 1)]).unwrap();
        assert!(face_sum(&g, &face, &small).is_ok());
    }

    #[test]
    fn p_at_zero_is_the_product_of_vertex_marginals() {
        let mut f = CubePolynomial::new(4).unwrap();
        f.set_quadratic(0, 1, r(0.5)).unwrap();
        f.set_quadratic(2, 3, r(-0.25)).unwrap();
        f.set_linear(0, r(0.4)).unwrap();
        f.set_linear(3, r(-1.1)).unwrap();
        let p0 = p_exact(&f, Complex64::ZERO, &opts()).unwrap();
        let expect: f64 = [0.4, 0.0, 0.0, -1.1].iter().map(|b: &f64| 2.0 * b.cosh()).product();
        assert!((p0 - r(expect)).norm() < 1e-13 * expect);
    }

    #[test]
    fn p_at_one_frozen_value_and_prefactor_identity() {
        // n = 2, a_01 = 1, b = 0: p(1) = 2(e^{1/4})^8 + 2 = 2e² + 2
        let mut f = CubePolynomial::new(2).unwrap();
        f.set_quadratic(0, 1, r(1.0)).unwrap();
        let p1 = p_exact(&f, Complex64::ONE, &opts()).unwrap();
        let frozen = 2.0 * (2.0f64).exp() + 2.0;
        assert!((p1 - r(frozen)).norm() < 1e-13 * frozen, "got {p1}");
        // identity p(1) = e^{Σ a} · S(e^f)
        let s = partition_sum(&f, &opts()).unwrap();
        let expect = 1.0f64.exp() * s;
        assert!((p1 - expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn p_prefactor_identity_random_instance() {
        let mut f = CubePolynomial::new(5).unwrap();
        f.set_quadratic(0, 1, r(0.31)).unwrap();
        f.set_quadratic(1, 4, r(-0.42)).unwrap();
        f.set_quadratic(2, 3, r(0.17)).unwrap();
        f.set_linear(2, r(0.6)).unwrap();
        f.set_linear(4, r(-0.8)).unwrap();
        let p1 = p_exact(&f, Complex64::ONE, &opts()).unwrap();
        let s = partition_stats(&f, &opts()).unwrap().sum;
        let pref = f.sum_quadratic().exp();
        assert!((p1 - pref * s).norm() <= 1e-12 * (pref * s).norm());
    }

    #[test]
    fn p_is_a_polynomial_finite_differences_vanish() {
        // single edge, n = 2 ⇒ deg p = 2n² = 8; the 9th finite difference is 0
        let mut f = CubePolynomial::new(2).unwrap();
        f.set_quadratic(0, 1, r(0.5)).unwrap();
        let mut diff = Complex64::ZERO;
        let mut scale = 0.0f64;
        for j in 0..=9u32 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let binom = factorial(9) / (factorial(j as usize) * factorial(9 - j as usize));
            let v = p_exact(&f, r(j as f64), &opts()).unwrap();
            diff += sign * binom * v;
            scale = scale.max(binom * v.norm());
        }
        assert!(diff.norm() <= 1e-9 * scale, "diff = {diff}, scale = {scale}");
    }

    #[test]
    fn p_deriv_oracle_first_derivative_closed_form() {
        // k = 1, b = 0: p'(0) = 2n² · 2^{n−1} · Σ c_ij
        let mut f = CubePolynomial::new(4).unwrap();
        f.set_quadratic(0, 1, r(0.7)).unwrap();
        f.set_quadratic(1, 3, r(-0.2)).unwrap();
        let n2 = 16.0;
        let c_sum: f64 = [(0.7f64), (-0.2)].iter().map(|a| (a / n2).exp_m1()).sum();
        let expect = 2.0 * n2 * 8.0 * c_sum;
        let got = p_deriv_oracle(&f, 1, &opts()).unwrap();
        assert!((got - r(expect)).norm() < 1e-12 * expect.abs());
        // k = 0 is the vertex-marginal product
        let got0 = p_deriv_oracle(&f, 0, &opts()).unwrap();
        assert!((got0 - r(16.0)).norm() < 1e-12 * 16.0);
    }

    #[test]
    fn series_table_agrees_with_binomial_oracle() {
        let mut f = CubePolynomial::new(5).unwrap();
        f.set_quadratic(0, 1, r(0.45)).unwrap();
        f.set_quadratic(1, 2, r(-0.3)).unwrap();
        f.set_quadratic(3, 4, r(0.25)).unwrap();
        f.set_linear(1, r(0.37)).unwrap();
        f.set_linear(4, r(-0.61)).unwrap();
        let kmax = 6;
        let binom_route = p_deriv_table(&f, kmax, &opts()).unwrap();
        let weights = HyperWeights::from_quadratic_instance(&f).unwrap();
        let b: Vec<f64> = (0..5).map(|i| f.linear_coeff(i).re).collect();
        let series_route = p_series_table(&weights, &b, kmax, &opts()).unwrap();
        for (k, &a) in binom_route.iter().enumerate() {
            let b = series_route.value(k);
            let scale = a.norm().max(1.0);
            assert!((a - b).norm() <= 1e-11 * scale, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn series_table_constant_term_is_marginal_product() {
        let mut f = CubePolynomial::new(4).unwrap();
        f.set_quadratic(0, 2, r(0.4)).unwrap();
        f.set_linear(0, r(0.9)).unwrap();
        f.set_linear(2, r(-0.2)).unwrap();
        let weights = HyperWeights::from_quadratic_instance(&f).unwrap();
        let b: Vec<f64> = (0..4).map(|i| f.linear_coeff(i).re).collect();
        let table = p_series_table(&weights, &b, 3, &opts()).unwrap();
        let expect: f64 = b.iter().map(|x| 2.0 * x.cosh()).product();
        assert!((table.value(0) - r(expect)).norm() <= 1e-12 * expect);
    }

    #[test]
    fn order_cap_is_enforced() {
        let mut f = CubePolynomial::new(3).unwrap();
        f.set_quadratic(0, 1, r(0.2)).unwrap();
        let tight = BruteForceOptions { order_cap: 3, ..Default::default() };
        assert!(matches!(p_deriv_table(&f, 4, &tight), Err(Error::OrderCap { .. })));
    }
}
