//! Angle geometry of partial partition sums.
//!
//! The zero-freeness argument rests on two facts about complex vectors that
//! stay within a bounded angle of each other: their magnitudes cannot cancel
//! much (`Σ|w| ≤ |Σw| / cos(…)`), and the "signed over plain" ratio of sums
//! has small imaginary part (`≤ tan(θ/2)`). This module checks both facts
//! numerically on concrete vectors, and constructs the eight-vector
//! configuration showing that the pattern breaks one degree higher — the
//! ratio climbs to `tan(3θ/2)` — which is why the method stops at cubic
//! interactions.
//!
//! Checks *refuse* (return an error) when the hypothesis is violated — an
//! angle beyond `θ`, a zero vector, `θ` outside its admissible interval — and
//! report measured quantities against their bounds otherwise.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute slack added to every bound before comparing, to absorb rounding
/// in the measured quantities themselves.
pub const SLACK: f64 = 1e-9;

/// Angle in `[0, π]` between two non-zero complex numbers viewed as plane
/// vectors.
pub fn angle_between(u: Complex64, w: Complex64) -> Result<f64> {
    if u == Complex64::ZERO || w == Complex64::ZERO {
        return Err(Error::ZeroVector);
    }
    Ok((u.conj() * w).arg().abs())
}

/// Outcome of a vector-sum check: each measured quantity next to its bound.
#[derive(Debug, Clone, Copy)]
pub struct VectorSumCheck {
    /// The angle budget the vectors were checked against.
    pub theta: f64,
    /// Largest angle among the constrained pairs.
    pub max_angle: f64,
    /// `Σ|w| / |Σw|`.
    pub ratio: f64,
    pub ratio_bound: f64,
    /// `|Im(signed sum / plain sum)|`.
    pub imag_ratio: f64,
    pub imag_bound: f64,
    /// Both measured quantities within their bounds (plus [`SLACK`]).
    pub satisfied: bool,
}

/// For two non-zero vectors within angle `θ < π` of each other:
/// `|w₊| + |w₋| ≤ |w₊ + w₋| / cos(θ/2)` and
/// `|Im((w₊ − w₋)/(w₊ + w₋))| ≤ tan(θ/2)`.
pub fn check_two_vector_sum(w_plus: Complex64, w_minus: Complex64, theta: f64) -> Result<VectorSumCheck> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::ThetaOutOfRange { value: theta, lo: 0.0, hi: std::f64::consts::PI });
    }
    let angle = angle_between(w_plus, w_minus)?;
    if angle > theta + SLACK {
        return Err(Error::AngleExceedsTheta { angle, theta });
    }
    let total = w_plus + w_minus;
    let ratio = (w_plus.norm() + w_minus.norm()) / total.norm();
    let ratio_bound = 1.0 / (theta / 2.0).cos();
    let imag_ratio = ((w_plus - w_minus) / total).im.abs();
    let imag_bound = (theta / 2.0).tan();
    Ok(VectorSumCheck {
        theta,
        max_angle: angle,
        ratio,
        ratio_bound,
        imag_ratio,
        imag_bound,
        satisfied: ratio <= ratio_bound + SLACK && imag_ratio <= imag_bound + SLACK,
    })
}

/// The four partial sums obtained by fixing a pair of spins to `(±1, ±1)`.
#[derive(Debug, Clone, Copy)]
pub struct AngleBundle {
    pub pp: Complex64,
    pub pm: Complex64,
    pub mp: Complex64,
    pub mm: Complex64,
}

impl AngleBundle {
    /// The pairs whose angles the four-vector hypothesis constrains: each of
    /// `pp`, `mm` (spin product +1) against each of `pm`, `mp` (product −1).
    pub fn constrained_pairs(&self) -> [(Complex64, Complex64); 4] {
        [(self.pp, self.pm), (self.pp, self.mp), (self.mm, self.pm), (self.mm, self.mp)]
    }

    pub fn max_constrained_angle(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for (u, w) in self.constrained_pairs() {
            max = max.max(angle_between(u, w)?);
        }
        Ok(max)
    }

    pub fn sum(&self) -> Complex64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Sum weighted by the spin product: `pp − pm − mp + mm`.
    pub fn signed_sum(&self) -> Complex64 {
        self.pp - self.pm - self.mp + self.mm
    }
}

/// For four non-zero vectors with every constrained pair within `θ < π/2`:
/// `Σ|w| ≤ |Σw| / cos θ` and `|Im(signed/plain)| ≤ tan(θ/2)`.
pub fn check_four_vector_sum(bundle: &AngleBundle, theta: f64) -> Result<VectorSumCheck> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::ThetaOutOfRange { value: theta, lo: 0.0, hi: std::f64::consts::FRAC_PI_2 });
    }
    let max_angle = bundle.max_constrained_angle()?;
    if max_angle > theta + SLACK {
        return Err(Error::AngleExceedsTheta { angle: max_angle, theta });
    }
    let total = bundle.sum();
    let mags = bundle.pp.norm() + bundle.pm.norm() + bundle.mp.norm() + bundle.mm.norm();
    let ratio = mags / total.norm();
    let ratio_bound = 1.0 / theta.cos();
    let imag_ratio = (bundle.signed_sum() / total).im.abs();
    let imag_bound = (theta / 2.0).tan();
    Ok(VectorSumCheck {
        theta,
        max_angle,
        ratio,
        ratio_bound,
        imag_ratio,
        imag_bound,
        satisfied: ratio <= ratio_bound + SLACK && imag_ratio <= imag_bound + SLACK,
    })
}

/// The eight-vector configuration witnessing that the small-angle bound does
/// not survive to quartic interactions.
#[derive(Debug, Clone)]
pub struct DegreeFourCounterexample {
    pub theta: f64,
    pub eps_len: f64,
    /// Partial sums indexed by the three fixed spins, `(+,+,+)` first, in the
    /// bit order `s = (s₀, s₁, s₂)` with bit `t` of the index set when
    /// `s_t = −1`.
    pub vectors: [Complex64; 8],
    /// Largest angle between vectors at Hamming distance one (equals `θ` here).
    pub max_adjacent_angle: f64,
    /// `|Im(signed/plain)|` for this configuration.
    pub imag_ratio: f64,
    /// The bound `tan(θ/2)` that the two- and four-vector statements provide.
    pub two_vector_bound: f64,
    /// What the ratio actually approaches as `eps_len → 0`: `tan(3θ/2)`.
    pub limit_ratio: f64,
    /// `imag_ratio > two_vector_bound`: the would-be inequality fails.
    pub exceeds_bound: bool,
}

/// Places the eight partial sums of a triple of spins on a chain of angles
/// `0, θ, 2θ, 3θ` according to Hamming distance from `(+,+,+)`, with unit
/// length at the extremes and length `eps_len` in the middle. Every pair at
/// Hamming distance one subtends exactly `θ`, yet the signed-over-plain ratio
/// approaches `tan(3θ/2)`, overshooting the `tan(θ/2)` bound available one
/// degree lower. Requires `θ ∈ (0, 0.4)` and `eps_len ∈ (0, 0.01)`, where the
/// overshoot is guaranteed.
pub fn degree_four_counterexample(theta: f64, eps_len: f64) -> Result<DegreeFourCounterexample> {
    if !(theta > 0.0 && theta < 0.4) {
        return Err(Error::ThetaOutOfRange { value: theta, lo: 0.0, hi: 0.4 });
    }
    if !(eps_len > 0.0 && eps_len < 0.01) {
        return Err(Error::EpsilonOutOfRange(eps_len));
    }

    let mut vectors = [Complex64::ZERO; 8];
    for (idx, v) in vectors.iter_mut().enumerate() {
        let dist = (idx as u32).count_ones();
        let len = if dist == 0 || dist == 3 { 1.0 } else { eps_len };
        *v = Complex64::from_polar(len, dist as f64 * theta);
    }

    let mut max_adjacent_angle = 0.0f64;
    for i in 0..8usize {
        for j in i + 1..8 {
            if (i ^ j).count_ones() == 1 {
                max_adjacent_angle = max_adjacent_angle.max(angle_between(vectors[i], vectors[j])?);
            }
        }
    }

    let mut plain = Complex64::ZERO;
    let mut signed = Complex64::ZERO;
    for (idx, &v) in vectors.iter().enumerate() {
        plain += v;
        let sign = if (idx as u32).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        signed += sign * v;
    }
    let imag_ratio = (signed / plain).im.abs();
    let two_vector_bound = (theta / 2.0).tan();
    let limit_ratio = (1.5 * theta).tan();

    Ok(DegreeFourCounterexample {
        theta,
        eps_len,
        vectors,
        max_adjacent_angle,
        imag_ratio,
        two_vector_bound,
        limit_ratio,
        exceeds_bound: imag_ratio > two_vector_bound,
    })
}
