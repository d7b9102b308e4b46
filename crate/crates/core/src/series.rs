//! Truncated univariate power series with complex coefficients.
//!
//! A `TaylorSeries` holds coefficients `c_0 … c_m` of a polynomial or of a
//! series truncated at order `m`. Arithmetic keeps explicit truncation orders;
//! nothing here tracks convergence — that is the caller's job.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSeries {
    coeffs: Vec<Complex64>,
}

/// `k!` as a double (`inf` beyond 170).
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl TaylorSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("a series needs at least the constant term".into()));
        }
        Ok(TaylorSeries { coeffs })
    }

    pub fn constant(c: Complex64) -> Self {
        TaylorSeries { coeffs: vec![c] }
    }

    /// The zero series kept to order `m`.
    pub fn zero(m: usize) -> Self {
        TaylorSeries { coeffs: vec![Complex64::ZERO; m + 1] }
    }

    /// Highest retained power.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^k` (zero beyond the truncation).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn truncated(&self, m: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(m + 1);
        coeffs.resize(m + 1, Complex64::ZERO);
        TaylorSeries { coeffs }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + other.coeff(k)).collect();
        TaylorSeries { coeffs }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        TaylorSeries { coeffs: self.coeffs.iter().map(|&x| x * c).collect() }
    }

    /// Product truncated at order `m`.
    pub fn mul_trunc(&self, other: &Self, m: usize) -> Self {
        let mut coeffs = vec![Complex64::ZERO; m + 1];
        let amax = self.order().min(m);
        for i in 0..=amax {
            let a = self.coeffs[i];
            if a == Complex64::ZERO {
                continue;
            }
            let bmax = other.order().min(m - i);
            for j in 0..=bmax {
                coeffs[i + j] += a * other.coeffs[j];
            }
        }
        TaylorSeries { coeffs }
    }

    /// Horner evaluation of the truncated series at `z`.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// `p^{(k)}(0) = k! · c_k` for the truncated series.
    pub fn derivative_at_zero(&self, k: usize) -> Complex64 {
        self.coeff(k) * factorial(k)
    }

    /// Composition `self ∘ inner` truncated at order `m`. Requires
    /// `inner(0) = 0`, which makes the first `m` output coefficients exact.
    pub fn compose_trunc(&self, inner: &Self, m: usize) -> Result<Self> {
        if inner.coeff(0) != Complex64::ZERO {
            return Err(Error::InvalidParameter(
                "composition needs an inner series with zero constant term".into(),
            ));
        }
        // Horner over the outer coefficients.
        let mut acc = TaylorSeries::constant(Complex64::ZERO);
        for k in (0..=self.order().min(m)).rev() {
            acc = acc.mul_trunc(inner, m);
            acc.coeffs_mut()[0] += self.coeffs[k];
        }
        Ok(acc.truncated(m))
    }

    /// Exponential of the series truncated at order `m`, via the standard
    /// recurrence `E_k = (1/k) Σ_{j=1..k} j·a_j·E_{k−j}` with `E_0 = e^{a_0}`.
    pub fn exp_trunc(&self, m: usize) -> Self {
        let mut out = vec![Complex64::ZERO; m + 1];
        out[0] = self.coeff(0).exp();
        for k in 1..=m {
            let mut acc = Complex64::ZERO;
            for j in 1..=k.min(self.order()) {
                acc += (j as f64) * self.coeffs[j] * out[k - j];
            }
            out[k] = acc / k as f64;
        }
        TaylorSeries { coeffs: out }
    }
}
