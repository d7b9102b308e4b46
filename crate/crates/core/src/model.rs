//! Sparse polynomial instances on the Boolean cube `{−1,1}^n` and the row-sum
//! hypothesis checks that guarantee a nonvanishing partition sum.
//!
//! An instance is `f(ξ) = Σ_{i<j<k} c_ijk ξ_iξ_jξ_k + Σ_{i<j} a_ij ξ_iξ_j + Σ_i b_i ξ_i`
//! with complex coefficients. The checks bound, for every index `i`, the row
//! sums of the coefficients touching `i`:
//!
//! * real quadratic: `Σ_{j≠i} |a_ij| ≤ 1−δ`,
//! * complex quadratic: `Σ_{j≠i} |Re a_ij| ≤ 1−δ`, `Σ_{j≠i} |Im a_ij| ≤ δ²/10`,
//!   `|Im b_i| ≤ δ²/10`,
//! * cubic versions add `Σ_{j,k≠i} |·c_ijk|` to the corresponding sums and
//!   require `0 < δ < 1/2`.
//!
//! Boundary equality counts as satisfied.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Imaginary parts at or below this absolute size count as zero when an
/// operation demands real coefficients.
pub const REAL_TOL: f64 = 1e-15;

/// A point of the cube: entries are `+1` or `−1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad));
        }
        Ok(SpinVector(entries))
    }

    /// Spin vector from the low `n` bits of `mask`: bit set ⇒ `−1`.
    pub fn from_bits(mask: u64, n: usize) -> Self {
        SpinVector((0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }
}

/// Sparse complex polynomial of degree ≤ 3 on `{−1,1}^n`.
///
/// Coefficient keys are stored with strictly increasing indices; setters accept
/// any order and normalize. Absent keys mean zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CubePolynomial {
    n: usize,
    linear: BTreeMap<usize, Complex64>,
    quadratic: BTreeMap<(usize, usize), Complex64>,
    cubic: BTreeMap<(usize, usize, usize), Complex64>,
}

impl CubePolynomial {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("an instance needs at least one variable".into()));
        }
        Ok(CubePolynomial {
            n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            cubic: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::IndexOutOfRange { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Sets `b_i`. A zero coefficient removes the entry.
    pub fn set_linear(&mut self, i: usize, c: Complex64) -> Result<()> {
        self.check_index(i)?;
        if c == Complex64::ZERO {
            self.linear.remove(&i);
        } else {
            self.linear.insert(i, c);
        }
        Ok(())
    }

    /// Sets `a_ij` (any index order).
    pub fn set_quadratic(&mut self, i: usize, j: usize, c: Complex64) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::RepeatedIndex(vec![i, j]));
        }
        let key = (i.min(j), i.max(j));
        if c == Complex64::ZERO {
            self.quadratic.remove(&key);
        } else {
            self.quadratic.insert(key, c);
        }
        Ok(())
    }

    /// Sets `c_ijk` (any index order).
    pub fn set_cubic(&mut self, i: usize, j: usize, k: usize, c: Complex64) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        self.check_index(k)?;
        if i == j || j == k || i == k {
            return Err(Error::RepeatedIndex(vec![i, j, k]));
        }
        let mut ix = [i, j, k];
        ix.sort_unstable();
        let key = (ix[0], ix[1], ix[2]);
        if c == Complex64::ZERO {
            self.cubic.remove(&key);
        } else {
            self.cubic.insert(key, c);
        }
        Ok(())
    }

    pub fn linear(&self) -> &BTreeMap<usize, Complex64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), Complex64> {
        &self.quadratic
    }

    pub fn cubic(&self) -> &BTreeMap<(usize, usize, usize), Complex64> {
        &self.cubic
    }

    pub fn linear_coeff(&self, i: usize) -> Complex64 {
        self.linear.get(&i).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn quadratic_coeff(&self, i: usize, j: usize) -> Complex64 {
        self.quadratic
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    pub fn is_quadratic(&self) -> bool {
        self.cubic.is_empty()
    }

    /// First coefficient whose imaginary part exceeds `REAL_TOL`, if any.
    pub fn nonreal_offender(&self) -> Option<(Vec<usize>, f64)> {
        for (&i, c) in &self.linear {
            if c.im.abs() > REAL_TOL {
                return Some((vec![i], c.im));
            }
        }
        for (&(i, j), c) in &self.quadratic {
            if c.im.abs() > REAL_TOL {
                return Some((vec![i, j], c.im));
            }
        }
        for (&(i, j, k), c) in &self.cubic {
            if c.im.abs() > REAL_TOL {
                return Some((vec![i, j, k], c.im));
            }
        }
        None
    }

    pub fn is_real(&self) -> bool {
        self.nonreal_offender().is_none()
    }

    /// `Σ_{i<j} a_ij` — the prefactor used by the approximation pipeline.
    pub fn sum_quadratic(&self) -> Complex64 {
        self.quadratic.values().sum()
    }

    /// `Σ_{i<j<k} c_ijk`.
    pub fn sum_cubic(&self) -> Complex64 {
        self.cubic.values().sum()
    }

    pub fn max_linear_norm(&self) -> f64 {
        self.linear.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Evaluates `f` at a spin vector.
    pub fn evaluate(&self, x: &SpinVector) -> Result<Complex64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let s = x.entries();
        let mut acc = Complex64::ZERO;
        for (&(i, j, k), c) in &self.cubic {
            acc += c * f64::from(s[i] * s[j] * s[k]);
        }
        for (&(i, j), a) in &self.quadratic {
            acc += a * f64::from(s[i] * s[j]);
        }
        for (&i, b) in &self.linear {
            acc += b * f64::from(s[i]);
        }
        Ok(acc)
    }

    /// The instance with variables renamed by `perm` (index `i` becomes `perm[i]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: perm.len() });
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut out = CubePolynomial::new(self.n)?;
        for (&i, &c) in &self.linear {
            out.set_linear(perm[i], c)?;
        }
        for (&(i, j), &c) in &self.quadratic {
            out.set_quadratic(perm[i], perm[j], c)?;
        }
        for (&(i, j, k), &c) in &self.cubic {
            out.set_cubic(perm[i], perm[j], perm[k], c)?;
        }
        Ok(out)
    }

    /// The instance under `ξ_i → −ξ_i` for each flagged index; the partition
    /// sum is invariant under this substitution.
    pub fn spin_flipped(&self, flips: &[bool]) -> Result<Self> {
        if flips.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: flips.len() });
        }
        let sign = |i: usize| if flips[i] { -1.0 } else { 1.0 };
        let mut out = CubePolynomial::new(self.n)?;
        for (&i, &c) in &self.linear {
            out.set_linear(i, c * sign(i))?;
        }
        for (&(i, j), &c) in &self.quadratic {
            out.set_quadratic(i, j, c * sign(i) * sign(j))?;
        }
        for (&(i, j, k), &c) in &self.cubic {
            out.set_cubic(i, j, k, c * sign(i) * sign(j) * sign(k))?;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// JSON instance files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    #[serde(default)]
    linear: Vec<(usize, f64, f64)>,
    #[serde(default)]
    quadratic: Vec<(usize, usize, f64, f64)>,
    #[serde(default)]
    cubic: Vec<(usize, usize, usize, f64, f64)>,
}

impl CubePolynomial {
    /// Serializes to the JSON instance format:
    /// `{"n": …, "linear": [[i,re,im],…], "quadratic": [[i,j,re,im],…], "cubic": [[i,j,k,re,im],…]}`.
    /// Keys are written with increasing indices; numbers round-trip exactly.
    pub fn to_json_string(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            linear: self.linear.iter().map(|(&i, c)| (i, c.re, c.im)).collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), c)| (i, j, c.re, c.im))
                .collect(),
            cubic: self
                .cubic
                .iter()
                .map(|(&(i, j, k), c)| (i, j, k, c.re, c.im))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
    }

    /// Parses the JSON instance format. Index order within an entry is free;
    /// duplicate keys (after normalization) are rejected.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let mut out = CubePolynomial::new(file.n)?;
        for (i, re, im) in file.linear {
            if out.linear.contains_key(&i) {
                return Err(Error::DuplicateKey(vec![i]));
            }
            out.set_linear(i, Complex64::new(re, im))?;
        }
        for (i, j, re, im) in file.quadratic {
            if i != j && out.quadratic.contains_key(&(i.min(j), i.max(j))) {
                return Err(Error::DuplicateKey(vec![i, j]));
            }
            out.set_quadratic(i, j, Complex64::new(re, im))?;
        }
        for (i, j, k, re, im) in file.cubic {
            let mut ix = [i, j, k];
            ix.sort_unstable();
            if ix[0] != ix[1] && ix[1] != ix[2] && out.cubic.contains_key(&(ix[0], ix[1], ix[2])) {
                return Err(Error::DuplicateKey(vec![i, j, k]));
            }
            out.set_cubic(i, j, k, Complex64::new(re, im))?;
        }
        Ok(out)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json_string())?)
    }
}

// ---------------------------------------------------------------------------
// Hypothesis checks
// ---------------------------------------------------------------------------

/// Per-index coefficient row sums.
#[derive(Debug, Clone, Serialize)]
pub struct RowSums {
    pub index: usize,
    /// `Σ |Re a_ij|` over pairs touching the index, plus `Σ |Re c_ijk|` over
    /// triples touching it when the instance is cubic.
    pub real: f64,
    /// Same with imaginary parts.
    pub imag: f64,
    /// `|Im b_i|`.
    pub imag_linear: f64,
}

/// Outcome of a row-sum hypothesis check. `satisfied` means every row met
/// every applicable bound (boundary equality passes); `worst_index` is the row
/// with the least slack (the most violated row when unsatisfied).
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub satisfied: bool,
    pub delta: f64,
    pub worst_index: usize,
    pub row_sums: Vec<RowSums>,
    pub real_bound: f64,
    /// `f64::INFINITY` when the check places no imaginary bound.
    pub imag_bound: f64,
    pub imag_linear_bound: f64,
}

pub(crate) fn row_data(f: &CubePolynomial) -> Vec<RowSums> {
    let mut rows: Vec<RowSums> = (0..f.n)
        .map(|index| RowSums { index, real: 0.0, imag: 0.0, imag_linear: 0.0 })
        .collect();
    for (&(i, j), c) in &f.quadratic {
        rows[i].real += c.re.abs();
        rows[j].real += c.re.abs();
        rows[i].imag += c.im.abs();
        rows[j].imag += c.im.abs();
    }
    for (&(i, j, k), c) in &f.cubic {
        for v in [i, j, k] {
            rows[v].real += c.re.abs();
            rows[v].imag += c.im.abs();
        }
    }
    for (&i, b) in &f.linear {
        rows[i].imag_linear = b.im.abs();
    }
    rows
}

pub(crate) fn finish_report(
    delta: f64,
    rows: Vec<RowSums>,
    real_bound: f64,
    imag_bound: f64,
    imag_linear_bound: f64,
) -> HypothesisReport {
    let excess = |r: &RowSums| {
        let mut e = r.real - real_bound;
        if imag_bound.is_finite() {
            e = e.max(r.imag - imag_bound);
        }
        if imag_linear_bound.is_finite() {
            e = e.max(r.imag_linear - imag_linear_bound);
        }
        e
    };
    let worst_index = rows
        .iter()
        .max_by(|a, b| excess(a).partial_cmp(&excess(b)).unwrap())
        .map(|r| r.index)
        .unwrap_or(0);
    let satisfied = rows.iter().all(|r| {
        r.real <= real_bound
            && (!imag_bound.is_finite() || r.imag <= imag_bound)
            && (!imag_linear_bound.is_finite() || r.imag_linear <= imag_linear_bound)
    });
    HypothesisReport {
        satisfied,
        delta,
        worst_index,
        row_sums: rows,
        real_bound,
        imag_bound,
        imag_linear_bound,
    }
}

fn require_delta(delta: f64, hi: f64) -> Result<()> {
    if !(delta > 0.0 && delta < hi) {
        return Err(Error::DeltaOutOfRange { value: delta, lo: 0.0, hi });
    }
    Ok(())
}

fn require_real(f: &CubePolynomial) -> Result<()> {
    if let Some((key, imag)) = f.nonreal_offender() {
        return Err(Error::NonRealCoefficient { key, imag });
    }
    Ok(())
}

fn require_quadratic(f: &CubePolynomial) -> Result<()> {
    if !f.is_quadratic() {
        return Err(Error::InvalidParameter(
            "instance has cubic terms; use a cubic check".into(),
        ));
    }
    Ok(())
}

/// Real quadratic zero-freeness condition: `Σ_{j≠i} |a_ij| ≤ 1−δ` for all `i`,
/// `0 < δ < 1`. Requires a real quadratic instance.
pub fn check_real_quadratic(f: &CubePolynomial, delta: f64) -> Result<HypothesisReport> {
    require_delta(delta, 1.0)?;
    require_quadratic(f)?;
    require_real(f)?;
    let rows = row_data(f);
    Ok(finish_report(delta, rows, 1.0 - delta, f64::INFINITY, f64::INFINITY))
}

/// Complex quadratic zero-freeness condition: for all `i`,
/// `Σ_{j≠i} |Re a_ij| ≤ 1−δ`, `Σ_{j≠i} |Im a_ij| ≤ δ²/10`, `|Im b_i| ≤ δ²/10`,
/// with `0 < δ < 1`.
pub fn check_complex_quadratic(f: &CubePolynomial, delta: f64) -> Result<HypothesisReport> {
    require_delta(delta, 1.0)?;
    require_quadratic(f)?;
    let bound_im = delta * delta / 10.0;
    Ok(finish_report(delta, row_data(f), 1.0 - delta, bound_im, bound_im))
}

/// Real cubic zero-freeness condition: for all `i`,
/// `Σ_{j<k, j,k≠i} |c_ijk| + Σ_{j≠i} |a_ij| ≤ 1−δ`, with `0 < δ < 1/2`.
/// Requires a real instance.
pub fn check_real_cubic(f: &CubePolynomial, delta: f64) -> Result<HypothesisReport> {
    require_delta(delta, 0.5)?;
    require_real(f)?;
    let rows = row_data(f);
    Ok(finish_report(delta, rows, 1.0 - delta, f64::INFINITY, f64::INFINITY))
}

/// Complex cubic zero-freeness condition: the real row sums (triples plus
/// pairs) stay within `1−δ`, imaginary row sums within `δ²/10`, and
/// `|Im b_i| ≤ δ²/10`, with `0 < δ < 1/2`.
pub fn check_complex_cubic(f: &CubePolynomial, delta: f64) -> Result<HypothesisReport> {
    require_delta(delta, 0.5)?;
    let bound_im = delta * delta / 10.0;
    Ok(finish_report(delta, row_data(f), 1.0 - delta, bound_im, bound_im))
}
