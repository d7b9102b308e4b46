//! Derivatives of the auxiliary polynomial at the origin.
//!
//! For an instance with pair weights `c_ij` (and optionally triple weights
//! `d_ijk`) the auxiliary polynomial is
//!
//! ```text
//! p(z) = Σ_ξ Π_{i<j} (1 + z c_ij)^{n²(ξ_iξ_j+1)}
//!            · Π_{i<j<k} (1 + z d_ijk)^{n³(ξ_iξ_jξ_k+1)} · Π_i e^{b_i ξ_i}.
//! ```
//!
//! Expanding each factor binomially and collecting powers of `z` turns
//! `p^{(k)}(0)` into a sum over ordered tuples: pick `s` distinct edges, a
//! composition `k = k_1 + … + k_s` into positive parts, and weight by
//!
//! ```text
//! multinomial(k; k_1…k_s) · Π_t (2κ_t)(2κ_t−1)⋯(2κ_t−k_t+1) · c_t^{k_t} · M(W)
//! ```
//!
//! where `κ` is `n²` or `n³` by arity and `M(W)` sums the vertex weights over
//! the configurations on which every chosen edge is consistent. The point of
//! this route is that its cost depends on the number of *edges*, not on `2^n`;
//! the enumeration fallback lives in [`crate::exact`].
//!
//! Everything is computed relative to the product of single-vertex marginals
//! `Π_i 2cosh(b_i)`, which both keeps magnitudes tame and is the natural
//! normalization for taking logarithms later.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::CubePolynomial;
use crate::series::factorial;

/// Budget knobs for the combinatorial derivative formula.
#[derive(Debug, Clone)]
pub struct TaylorOptions {
    /// Upper bound on the operation estimate before a computation is refused.
    pub work_limit: f64,
    /// Largest derivative order accepted.
    pub order_cap: usize,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        TaylorOptions { work_limit: 2e8, order_cap: 128 }
    }
}

/// `ln(2 cosh x)`, stable for any magnitude of `x`.
pub fn ln_two_cosh(x: f64) -> f64 {
    x.abs() + (-2.0 * x.abs()).exp().ln_1p()
}

// ---------------------------------------------------------------------------
// Transformed edge weights
// ---------------------------------------------------------------------------

/// Pair and triple weights of the transformed instance, together with the
/// exponent bases `n²` (pairs) and `n³` (triples).
#[derive(Debug, Clone)]
pub struct HyperWeights {
    n: usize,
    pairs: BTreeMap<(usize, usize), Complex64>,
    triples: BTreeMap<(usize, usize, usize), Complex64>,
}

impl HyperWeights {
    /// Builds weights from explicit maps; keys must be strictly increasing
    /// tuples of indices below `n`.
    pub fn new(
        n: usize,
        pairs: BTreeMap<(usize, usize), Complex64>,
        triples: BTreeMap<(usize, usize, usize), Complex64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        for &(i, j) in pairs.keys() {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if i >= j {
                return Err(Error::RepeatedIndex(vec![i, j]));
            }
        }
        for &(i, j, k) in triples.keys() {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, n });
            }
            if i >= j || j >= k {
                return Err(Error::RepeatedIndex(vec![i, j, k]));
            }
        }
        Ok(HyperWeights { n, pairs, triples })
    }

    /// `c_ij = e^{a_ij/n²} − 1` from a real quadratic instance.
    pub fn from_quadratic_instance(f: &CubePolynomial) -> Result<Self> {
        if !f.is_quadratic() {
            return Err(Error::InvalidParameter(
                "instance has cubic terms; use the cubic transform".into(),
            ));
        }
        Self::from_cubic_instance(f)
    }

    /// `c_ij = e^{a_ij/n²} − 1` and `d_ijk = e^{c_ijk/n³} − 1` from a real
    /// instance of degree at most three.
    pub fn from_cubic_instance(f: &CubePolynomial) -> Result<Self> {
        if let Some((key, imag)) = f.nonreal_offender() {
            return Err(Error::NonRealCoefficient { key, imag });
        }
        let n = f.n();
        let n2 = (n * n) as f64;
        let n3 = n2 * n as f64;
        let mut pairs = BTreeMap::new();
        for (&(i, j), &a) in f.quadratic() {
            let c = (a.re / n2).exp_m1();
            if c != 0.0 {
                pairs.insert((i, j), Complex64::new(c, 0.0));
            }
        }
        let mut triples = BTreeMap::new();
        for (&(i, j, k), &cc) in f.cubic() {
            let d = (cc.re / n3).exp_m1();
            if d != 0.0 {
                triples.insert((i, j, k), Complex64::new(d, 0.0));
            }
        }
        Ok(HyperWeights { n, pairs, triples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &BTreeMap<(usize, usize), Complex64> {
        &self.pairs
    }

    pub fn triples(&self) -> &BTreeMap<(usize, usize, usize), Complex64> {
        &self.triples
    }

    /// Exponent base for pair factors: consistent pairs carry `(1+zc)^{2n²}`.
    pub fn pair_base(&self) -> f64 {
        (self.n * self.n) as f64
    }

    /// Exponent base for triple factors: consistent triples carry `(1+zd)^{2n³}`.
    pub fn triple_base(&self) -> f64 {
        self.pair_base() * self.n as f64
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.len() + self.triples.len()
    }
}

/// Transformed pair weights of a real quadratic instance. The map satisfies
/// `|c_ij − a_ij/n²| ≤ 1/n⁴` and `|c_ij| ≤ 2/n²` whenever `|a_ij| ≤ 1`.
pub fn c_from_a(f: &CubePolynomial) -> Result<HyperWeights> {
    HyperWeights::from_quadratic_instance(f)
}

// ---------------------------------------------------------------------------
// Derivative tables
// ---------------------------------------------------------------------------

/// Derivatives `p^{(k)}(0)`, `k = 0..=order`, stored as
/// `value(k) = raw_values[k] · e^{log_scale}` so that instances with large
/// vertex fields do not overflow: the natural scale `Π_i 2cosh(b_i)` is kept
/// in `log_scale`.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    values: Vec<Complex64>,
    log_scale: f64,
    n: usize,
}

impl DerivativeTable {
    pub fn new(values: Vec<Complex64>, n: usize) -> Self {
        DerivativeTable { values, log_scale: 0.0, n }
    }

    pub fn with_log_scale(values: Vec<Complex64>, n: usize, log_scale: f64) -> Self {
        DerivativeTable { values, log_scale, n }
    }

    /// Largest derivative order in the table.
    pub fn order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Derivatives with the `e^{log_scale}` factor divided out.
    pub fn raw_values(&self) -> &[Complex64] {
        &self.values
    }

    /// `p^{(k)}(0)`; may overflow to infinity when `log_scale` is huge.
    pub fn value(&self, k: usize) -> Complex64 {
        self.values[k] * self.log_scale.exp()
    }
}

// ---------------------------------------------------------------------------
// Small combinatorial utilities
// ---------------------------------------------------------------------------

/// `m(m−1)⋯(m−k+1)` with a real base.
pub fn falling_factorial(m: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= m - i as f64;
    }
    acc
}

/// `k! / (k_1! ⋯ k_s!)` for a composition of `k`. Exact integer arithmetic is
/// used while the intermediate values fit in `u64` (always the case for
/// `k ≤ 20`); beyond that the value is accumulated stepwise in `f64` as a
/// product of binomials, each of which is itself a rounded integer.
pub fn multinomial(k: usize, parts: &[usize]) -> f64 {
    debug_assert_eq!(parts.iter().sum::<usize>(), k);
    if k <= 20 {
        let mut acc: u64 = 1;
        let mut rem = k;
        for &p in parts {
            // binom(rem, p) exactly
            let mut b: u64 = 1;
            for i in 0..p {
                b = b * (rem - i) as u64 / (i as u64 + 1);
            }
            acc *= b;
            rem -= p;
        }
        acc as f64
    } else {
        let mut acc = 1.0f64;
        let mut rem = k;
        for &p in parts {
            let mut b = 1.0f64;
            for i in 0..p {
                b = b * (rem - i) as f64 / (i as f64 + 1.0);
            }
            acc *= b.round();
            rem -= p;
        }
        acc
    }
}

/// Iterator over the compositions of `k` into exactly `s` positive parts, in
/// lexicographic order of the cut positions. `compositions(0, 0)` yields one
/// empty composition.
pub fn compositions(k: usize, s: usize) -> Compositions {
    let cuts = if s == 0 {
        if k == 0 {
            Some(Vec::new())
        } else {
            None
        }
    } else if s > k {
        None
    } else {
        Some((1..s).collect())
    };
    Compositions { k, cuts }
}

pub struct Compositions {
    k: usize,
    /// Strictly increasing cut positions in `1..k`; boundaries 0 and k are implicit.
    cuts: Option<Vec<usize>>,
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cuts = self.cuts.as_mut()?;
        let mut parts = Vec::with_capacity(cuts.len() + 1);
        let mut prev = 0;
        for &c in cuts.iter() {
            parts.push(c - prev);
            prev = c;
        }
        parts.push(self.k - prev);

        // advance to the next strictly increasing tuple in 1..k
        let s1 = cuts.len();
        let mut idx = s1;
        loop {
            if idx == 0 {
                self.cuts = None;
                break;
            }
            idx -= 1;
            let max_here = self.k - (s1 - idx);
            if cuts[idx] < max_here {
                cuts[idx] += 1;
                for t in idx + 1..s1 {
                    cuts[t] = cuts[t - 1] + 1;
                }
                break;
            }
        }
        Some(parts)
    }
}

/// Rough operation count of [`derivative_k`]: subsets of `s` edges times
/// compositions of `k` into `s` parts, plus the consistent-configuration sum
/// per subset (union-find for pairs, a `2^{2s}`-point nullspace walk when
/// triples are present). Saturates to infinity rather than overflow.
pub fn estimate_work(edges: usize, k: usize, has_triples: bool) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut total = 0.0f64;
    let smax = k.min(edges);
    let mut subsets = edges as f64; // C(edges, s)
    for s in 1..=smax {
        if s > 1 {
            subsets = subsets * (edges - s + 1) as f64 / s as f64;
        }
        let mut comps = 1.0f64; // C(k−1, s−1)
        for i in 0..s - 1 {
            comps = comps * (k - 1 - i) as f64 / (i as f64 + 1.0);
        }
        let mcost = if has_triples {
            let s3 = (s * s * s) as f64;
            s3 + (s as f64) * 4.0f64.powi(s as i32)
        } else {
            (s * s) as f64
        };
        total += subsets * (comps * s as f64 + mcost);
        if !total.is_finite() || total > 1e300 {
            return f64::INFINITY;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Consistent-configuration sums M(W)
// ---------------------------------------------------------------------------

/// `M(W) / Π_i 2cosh(b_i)` when every edge in `W` is a pair: consistency
/// forces each connected component of the edge set to a single spin, so the
/// ratio is `Π_comp 2cosh(Σ_{i∈comp} b_i) / Π_{i∈comp} 2cosh(b_i) ≤ 1`.
fn m_rel_pairs(verts: &[usize], local: &[(usize, usize)], b: &[f64]) -> f64 {
    let m = verts.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in local {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let mut comp_field = vec![0.0f64; m];
    let mut singles = 0.0f64;
    for i in 0..m {
        let r = find(&mut parent, i);
        comp_field[r] += b[verts[i]];
        singles += ln_two_cosh(b[verts[i]]);
    }
    let mut log_rel = -singles;
    for (i, &field) in comp_field.iter().enumerate() {
        if find(&mut parent, i) == i {
            log_rel += ln_two_cosh(field);
        }
    }
    log_rel.exp()
}

/// `M(W) / Π_i 2cosh(b_i)` for a mixed pair/triple edge set, by enumerating
/// the nullspace of the parity constraints over GF(2). With `x_i ∈ {0,1}` and
/// `ξ_i = (−1)^{x_i}`, each edge demands `Σ_{i∈e} x_i = 0 (mod 2)`, a linear
/// system whose solution set is walked in Gray order.
fn m_rel_parity(verts: &[usize], rows_in: &[u64], b: &[f64]) -> Result<f64> {
    let m = verts.len();
    if m > 64 {
        return Err(Error::WorkLimit {
            estimated: f64::INFINITY,
            limit: 64.0,
            edges: rows_in.len(),
            k: m,
        });
    }
    let mut rows: Vec<u64> = rows_in.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut r = 0usize;
    for col in 0..m {
        if let Some(pr) = (r..rows.len()).find(|&i| rows[i] >> col & 1 == 1) {
            rows.swap(r, pr);
            let prow = rows[r];
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && *row >> col & 1 == 1 {
                    *row ^= prow;
                }
            }
            pivots.push((r, col));
            r += 1;
        }
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free_cols: Vec<usize> = (0..m).filter(|c| !pivot_cols.contains(c)).collect();
    let basis: Vec<u64> = free_cols
        .iter()
        .map(|&fc| {
            let mut v = 1u64 << fc;
            for &(pr, pc) in &pivots {
                if rows[pr] >> fc & 1 == 1 {
                    v |= 1 << pc;
                }
            }
            v
        })
        .collect();

    let d = basis.len();
    let weight = |mask: u64| -> f64 {
        let mut acc = 0.0;
        for (i, &v) in verts.iter().enumerate() {
            let spin = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
            acc += spin * b[v] - ln_two_cosh(b[v]);
        }
        acc.exp()
    };
    let mut cur = 0u64;
    let mut total = weight(cur);
    for step in 1u64..(1 << d) {
        cur ^= basis[step.trailing_zeros() as usize];
        total += weight(cur);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// The derivative formula
// ---------------------------------------------------------------------------

struct FormulaEdge {
    verts: [usize; 3],
    arity: usize,
    /// `pwf[t] = (2κ)(2κ−1)⋯(2κ−t+1) · c^t / t!`; bounded by `4^t/t!` for
    /// admissible weights, so there is no large-base overflow.
    pwf: Vec<Complex64>,
}

fn build_edges(weights: &HyperWeights, k: usize) -> Vec<FormulaEdge> {
    let mut edges = Vec::with_capacity(weights.edge_count());
    let mut push = |verts: [usize; 3], arity: usize, c: Complex64, base: f64| {
        let two_kappa = 2.0 * base;
        let mut pwf = vec![Complex64::ZERO; k + 1];
        pwf[0] = Complex64::ONE;
        for t in 1..=k {
            pwf[t] = pwf[t - 1] * c * ((two_kappa - (t as f64 - 1.0)) / t as f64);
        }
        edges.push(FormulaEdge { verts, arity, pwf });
    };
    for (&(i, j), &c) in weights.pairs() {
        push([i, j, usize::MAX], 2, c, weights.pair_base());
    }
    for (&(i, j, l), &d) in weights.triples() {
        push([i, j, l], 3, d, weights.triple_base());
    }
    edges
}

/// Σ over compositions of `remaining` into `tables.len()` positive parts of
/// `Π_t tables[t][k_t]`. Visits each composition exactly once.
fn composition_sum(tables: &[&[Complex64]], remaining: usize) -> Complex64 {
    if tables.len() == 1 {
        return tables[0][remaining];
    }
    let rest = &tables[1..];
    let mut acc = Complex64::ZERO;
    // kt is the composition part given to the head table, not a slice cursor
    #[allow(clippy::needless_range_loop)]
    for kt in 1..=(remaining - rest.len()) {
        let head = tables[0][kt];
        if head != Complex64::ZERO {
            acc += head * composition_sum(rest, remaining - kt);
        }
    }
    acc
}

fn m_rel_for_subset(edges: &[FormulaEdge], subset: &[usize], b: &[f64]) -> Result<f64> {
    let mut verts: Vec<usize> = Vec::with_capacity(3 * subset.len());
    for &e in subset {
        verts.extend_from_slice(&edges[e].verts[..edges[e].arity]);
    }
    verts.sort_unstable();
    verts.dedup();
    let local = |v: usize| verts.binary_search(&v).expect("vertex collected above");

    if subset.iter().all(|&e| edges[e].arity == 2) {
        let pairs: Vec<(usize, usize)> = subset
            .iter()
            .map(|&e| (local(edges[e].verts[0]), local(edges[e].verts[1])))
            .collect();
        Ok(m_rel_pairs(&verts, &pairs, b))
    } else {
        let rows: Vec<u64> = subset
            .iter()
            .map(|&e| {
                edges[e].verts[..edges[e].arity]
                    .iter()
                    .fold(0u64, |acc, &v| acc | 1 << local(v))
            })
            .collect();
        m_rel_parity(&verts, &rows, b)
    }
}

/// `p^{(k)}(0) / Π_i 2cosh(b_i)` by the combinatorial formula. Refuses with
/// [`Error::WorkLimit`] when the operation estimate exceeds the budget.
pub fn derivative_k(weights: &HyperWeights, b: &[f64], k: usize, opts: &TaylorOptions) -> Result<Complex64> {
    let n = weights.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if k > opts.order_cap {
        return Err(Error::OrderCap { k, cap: opts.order_cap });
    }
    if k == 0 {
        return Ok(Complex64::ONE);
    }
    let e_count = weights.edge_count();
    let estimated = estimate_work(e_count, k, !weights.triples().is_empty());
    if estimated > opts.work_limit {
        return Err(Error::WorkLimit { estimated, limit: opts.work_limit, edges: e_count, k });
    }
    if e_count == 0 {
        return Ok(Complex64::ZERO);
    }

    let edges = build_edges(weights, k);
    let kfact = factorial(k);
    let mut acc = Complex64::ZERO;

    let smax = k.min(e_count);
    let mut subset: Vec<usize> = Vec::new();
    for s in 1..=smax {
        // lexicographic s-subsets of the edge list
        subset.clear();
        subset.extend(0..s);
        loop {
            let tables: Vec<&[Complex64]> = subset.iter().map(|&e| edges[e].pwf.as_slice()).collect();
            let csum = composition_sum(&tables, k);
            if csum != Complex64::ZERO {
                acc += csum * kfact * m_rel_for_subset(&edges, &subset, b)?;
            }

            // next subset
            let mut idx = s;
            loop {
                if idx == 0 {
                    break;
                }
                idx -= 1;
                if subset[idx] < e_count - (s - idx) {
                    subset[idx] += 1;
                    for t in idx + 1..s {
                        subset[t] = subset[t - 1] + 1;
                    }
                    idx = usize::MAX;
                    break;
                }
            }
            if idx != usize::MAX {
                break;
            }
        }
    }
    Ok(acc)
}

/// Table of `p^{(k)}(0)` for `k = 0..=kmax`, scaled by `Π_i 2cosh(b_i)`
/// (carried as [`DerivativeTable::log_scale`]).
pub fn derivative_table(
    weights: &HyperWeights,
    b: &[f64],
    kmax: usize,
    opts: &TaylorOptions,
) -> Result<DerivativeTable> {
    let values: Vec<Complex64> = (0..=kmax)
        .map(|k| derivative_k(weights, b, k, opts))
        .collect::<Result<_>>()?;
    let log_scale: f64 = b.iter().map(|&x| ln_two_cosh(x)).sum();
    Ok(DerivativeTable::with_log_scale(values, weights.n(), log_scale))
}
