//! Principal branch of the Lambert W function on the real line.

use std::f64::consts::E;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("Lambert W0 is undefined below -1/e (got {0})")]
pub struct DomainError(pub f64);

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_HALLEY_STEPS: usize = 64;
const STEP_TOL: f64 = 1e-14;

/// `W0(x)`: the solution `r >= -1` of `r e^r = x`, for `x >= -1/e`.
pub fn lambert_w0(x: f64) -> Result<f64, DomainError> {
    if x.is_nan() || x < BRANCH_POINT {
        return Err(DomainError(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // e·x + 1 computed with the split constant to keep digits near the branch.
    let q = E * x + 1.0;
    if q <= 0.0 {
        return Ok(-1.0);
    }

    let mut w = if q < 0.3 {
        // Series about the branch point in p = sqrt(2(ex + 1)).
        let p = (2.0 * q).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..MAX_HALLEY_STEPS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        let next = (w - step).max(-1.0);
        let done = (next - w).abs() <= STEP_TOL * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}
