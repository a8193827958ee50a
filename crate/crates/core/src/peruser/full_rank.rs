//! Power allocation when the leakage matrix is invertible.
//!
//! After whitening by `L^{-1/2}` and fixing the beam direction, the per-user
//! problem collapses to the scalar program
//!
//! ```text
//! max_p  φ(p) = ln(1 + g p) / (p + P_C) - A p,   0 <= p <= P̄
//! ```
//!
//! The numerator of `φ'` is strictly decreasing on the feasible interval, so
//! the optimum is an endpoint or the unique root of `φ'`.

use super::BISECTION_TOL;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullRankCoefficients {
    /// Effective channel gain over interference-plus-noise.
    pub gain: f64,
    /// Price weight on the transformed power.
    pub price: f64,
    /// Transformed power cap `P̄`.
    pub power_cap: f64,
    /// Transformed static power `P_C`.
    pub static_power: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FullRankCase {
    /// `φ'(0) <= 0`
    Off,
    /// `φ'(P̄) >= 0`
    Saturated,
    /// Interior stationary point.
    Interior,
}

impl FullRankCoefficients {
    pub fn objective(&self, p: f64) -> f64 {
        (self.gain * p).ln_1p() / (p + self.static_power) - self.price * p
    }

    /// `ψ(p) = φ'(p) (p + P_C)²`; same sign as `φ'`.
    pub fn scaled_derivative(&self, p: f64) -> f64 {
        let t = p + self.static_power;
        let gp = self.gain * p;
        self.gain * t / (1.0 + gp) - gp.ln_1p() - self.price * t * t
    }

    pub fn derivative(&self, p: f64) -> f64 {
        let t = p + self.static_power;
        self.scaled_derivative(p) / (t * t)
    }

    fn is_valid(&self) -> bool {
        [self.gain, self.price, self.power_cap, self.static_power]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.static_power > 0.0
    }
}

/// Optimal transformed power and which case produced it.
pub fn solve_full_rank(c: &FullRankCoefficients) -> (f64, FullRankCase) {
    debug_assert!(c.is_valid(), "invalid coefficients {c:?}");
    if c.gain == 0.0 || c.power_cap == 0.0 || c.scaled_derivative(0.0) <= 0.0 {
        return (0.0, FullRankCase::Off);
    }
    if c.scaled_derivative(c.power_cap) >= 0.0 {
        return (c.power_cap, FullRankCase::Saturated);
    }
    let root = bisect_decreasing(|p| c.scaled_derivative(p), 0.0, c.power_cap);
    (root, FullRankCase::Interior)
}

/// Root of a function that is positive at `lo` and negative at `hi`.
pub(crate) fn bisect_decreasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    bisect_decreasing_to(f, lo, hi, BISECTION_TOL)
}

/// As [`bisect_decreasing`] with an explicit bracket width; `0.0` runs to
/// machine precision.
pub(crate) fn bisect_decreasing_to(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
