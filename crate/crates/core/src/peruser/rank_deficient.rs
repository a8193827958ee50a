//! Power split between the priced and the interference-free direction when
//! the leakage matrix is rank deficient.
//!
//! The beam is `√p1·w1 + √p2·w2` with `w1` in the range of `L_k` and `w2` in
//! its null space. Dropping the signal cross term leaves
//!
//! ```text
//! max  ln(1 + g1 p1 + g2 p2) / (p1 + p2 + P_C) - g3 p1
//! s.t. p1, p2 >= 0,  p1 + p2 <= P
//! ```
//!
//! whose constraints are linear, so every local optimum is a KKT point. The
//! KKT system splits into six boundary/interior patterns, each with a closed
//! form or a one-dimensional monotone root; the best of those candidates is
//! the global optimum.

use std::f64::consts::E;

use super::full_rank::{bisect_decreasing, bisect_decreasing_to};
use super::lambert::lambert_w0;
use crate::cxlinalg::CVector;

#[derive(Clone, Debug, PartialEq)]
pub struct RankDeficientCoefficients {
    /// Gain of the range-space direction over interference-plus-noise.
    pub g1: f64,
    /// Gain of the null-space direction over interference-plus-noise.
    pub g2: f64,
    /// Price weight on `p1`.
    pub g3: f64,
    /// Static power over ρ.
    pub static_power: f64,
    pub power_cap: f64,
    /// Unit direction in the range of `L_k`; `None` when `h_{k,k}` has no
    /// component there.
    pub w1: Option<CVector>,
    /// Unit direction in the null space of `L_k`; `None` when `h_{k,k}` has
    /// no component there.
    pub w2: Option<CVector>,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PowerSplit {
    pub p1: f64,
    pub p2: f64,
}

impl PowerSplit {
    pub fn total(&self) -> f64 {
        self.p1 + self.p2
    }
}

/// The scalar part of [`RankDeficientCoefficients`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitProblem {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub static_power: f64,
    pub power_cap: f64,
}

impl From<&RankDeficientCoefficients> for SplitProblem {
    fn from(c: &RankDeficientCoefficients) -> Self {
        SplitProblem {
            g1: c.g1,
            g2: c.g2,
            g3: c.g3,
            static_power: c.static_power,
            power_cap: c.power_cap,
        }
    }
}

/// Which KKT pattern produced a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KktCase {
    /// `p1 = 0`, `0 < p2 < P`
    NullInterior,
    /// `p1, p2 > 0`, `p1 + p2 < P`
    BothInterior,
    /// `p1, p2 > 0`, `p1 + p2 = P`
    BothSaturated,
    /// `p1 = 0`, `p2 = P`
    NullSaturated,
    /// `0 < p1 < P`, `p2 = 0`
    RangeInterior,
    /// `p1 = P`, `p2 = 0`
    RangeSaturated,
    /// `p1 = p2 = 0`
    Off,
    /// Closed form for `g1 <= g2`, where the range direction is never used.
    NullOnly,
}

impl KktCase {
    /// Position in the six-case enumeration (1-based), if it is one of them.
    pub fn index(self) -> Option<usize> {
        match self {
            KktCase::NullInterior => Some(1),
            KktCase::BothInterior => Some(2),
            KktCase::BothSaturated => Some(3),
            KktCase::NullSaturated => Some(4),
            KktCase::RangeInterior => Some(5),
            KktCase::RangeSaturated => Some(6),
            KktCase::Off | KktCase::NullOnly => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub case: KktCase,
    pub split: PowerSplit,
    /// Multipliers `(α, β, γ)` on `p1 >= 0`, `p2 >= 0`, `P - p1 - p2 >= 0`.
    pub multipliers: (f64, f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSolution {
    pub split: PowerSplit,
    pub case: KktCase,
    /// Set when no KKT case fired and `(0, 0)` was returned by default.
    pub fallback: bool,
}

/// Two candidates within this objective gap count as tied.
const TIE_TOL: f64 = 1e-12;

impl SplitProblem {
    pub fn objective(&self, split: PowerSplit) -> f64 {
        (self.g1 * split.p1 + self.g2 * split.p2).ln_1p()
            / (split.p1 + split.p2 + self.static_power)
            - self.g3 * split.p1
    }

    /// Partial derivatives of the objective in `p1` and `p2`.
    pub fn gradient(&self, split: PowerSplit) -> (f64, f64) {
        let theta = split.p1 + split.p2 + self.static_power;
        let x = 1.0 + self.g1 * split.p1 + self.g2 * split.p2;
        let common = -x.ln() / (theta * theta);
        (
            common + self.g1 / (theta * x) - self.g3,
            common + self.g2 / (theta * x),
        )
    }

    /// Unconstrained maximiser of `ln(1 + g2 p) / (p + P_C)` over `p >= 0`.
    fn null_stationary_power(&self) -> f64 {
        let arg = (self.g2 * self.static_power - 1.0) / E;
        let omega = lambert_w0(arg.max(-1.0 / E)).expect("argument clamped to the domain");
        (omega + 1.0).exp_m1() / self.g2
    }

    fn f1(&self, x: f64) -> f64 {
        let gx = self.g2 * x;
        -(1.0 + gx) * gx.ln_1p() + self.g2 * (x + self.static_power)
    }

    fn f2(&self, x: f64) -> f64 {
        let gx = self.g1 * x;
        let t = x + self.static_power;
        -(1.0 + gx) * gx.ln_1p() + self.g1 * t - self.g3 * t * t * (1.0 + gx)
    }

    fn f3(&self, theta: f64) -> f64 {
        let d = self.g1 - self.g2;
        theta.ln() + self.g2 * self.g3 / d * theta * theta - (d / self.g3).ln()
    }

    /// Candidates from the six KKT patterns whose acceptance conditions hold,
    /// in enumeration order.
    pub fn kkt_candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::with_capacity(6);
        let (g1, g2, g3) = (self.g1, self.g2, self.g3);
        let (pc, cap) = (self.static_power, self.power_cap);
        let theta_cap = cap + pc;
        let d = g1 - g2;
        // With a vanishing null-space component only p1 carries signal.
        let null_usable = g2 > 0.0;

        if cap <= 0.0 {
            return out;
        }

        // 1) p1 = 0, 0 < p2 < P
        if null_usable && self.f1(cap) < 0.0 {
            let p2 = self.null_stationary_power();
            let theta = p2 + pc;
            let x = 1.0 + g2 * p2;
            let alpha = x.ln() / (theta * theta) + g3 - g1 / (theta * x);
            if alpha >= 0.0 && p2 > 0.0 && p2 < cap {
                out.push(Candidate {
                    case: KktCase::NullInterior,
                    split: PowerSplit { p1: 0.0, p2 },
                    multipliers: (alpha, 0.0, 0.0),
                });
            }
        }

        // 2) p1, p2 > 0, p1 + p2 < P
        if null_usable && d > 0.0 && g3 > 0.0 {
            let ratio = d / g3;
            if theta_cap * (1.0 + g1 * cap) > ratio
                && ratio > pc
                && self.f3(pc) < 0.0
                && self.f3(theta_cap) > 0.0
            {
                // θ to machine precision
                let theta = bisect_decreasing_to(|t| -self.f3(t), pc, theta_cap, 0.0);
                let p1 = (g2 * pc + ratio / theta - 1.0 - g2 * theta) / d;
                let p2 = theta - pc - p1;
                if p1 > 0.0 && p2 > 0.0 {
                    out.push(Candidate {
                        case: KktCase::BothInterior,
                        split: PowerSplit { p1, p2 },
                        multipliers: (0.0, 0.0, 0.0),
                    });
                }
            }
        }

        // 3) p1, p2 > 0, p1 + p2 = P
        if null_usable && d > 0.0 && g3 > 0.0 {
            let gamma = g2 * g3 / d - (d.ln() - (g3 * theta_cap).ln()) / (theta_cap * theta_cap);
            if gamma >= 0.0 {
                let p1 = 1.0 / (g3 * theta_cap) - (1.0 + g2 * cap) / d;
                if p1 > 0.0 && p1 < cap {
                    out.push(Candidate {
                        case: KktCase::BothSaturated,
                        split: PowerSplit { p1, p2: cap - p1 },
                        multipliers: (0.0, 0.0, gamma),
                    });
                }
            }
        }

        // 4) p1 = 0, p2 = P
        if null_usable {
            let x = 1.0 + g2 * cap;
            let gamma = g2 / (theta_cap * x) - x.ln() / (theta_cap * theta_cap);
            if gamma >= 0.0 {
                let alpha = g3 - d / (theta_cap * x);
                if alpha >= 0.0 {
                    out.push(Candidate {
                        case: KktCase::NullSaturated,
                        split: PowerSplit { p1: 0.0, p2: cap },
                        multipliers: (alpha, 0.0, gamma),
                    });
                }
            }
        }

        // 5) 0 < p1 < P, p2 = 0
        if g1 > 0.0 && self.f2(0.0) > 0.0 && self.f2(cap) < 0.0 {
            let p1 = bisect_decreasing(|x| self.f2(x), 0.0, cap);
            let theta = p1 + pc;
            let x = 1.0 + g1 * p1;
            let beta = x.ln() / (theta * theta) - g2 / (theta * x);
            if beta >= 0.0 {
                out.push(Candidate {
                    case: KktCase::RangeInterior,
                    split: PowerSplit { p1, p2: 0.0 },
                    multipliers: (0.0, beta, 0.0),
                });
            }
        }

        // 6) p1 = P, p2 = 0
        if g1 > 0.0 {
            let x = 1.0 + g1 * cap;
            let gamma = -x.ln() / (theta_cap * theta_cap) + g1 / (theta_cap * x) - g3;
            if gamma >= 0.0 {
                let beta = d / (theta_cap * x) - g3;
                if beta >= 0.0 {
                    out.push(Candidate {
                        case: KktCase::RangeSaturated,
                        split: PowerSplit { p1: cap, p2: 0.0 },
                        multipliers: (0.0, beta, gamma),
                    });
                }
            }
        }
        out
    }

    /// Global optimum of the split problem.
    pub fn solve(&self) -> SplitSolution {
        debug_assert!(
            [self.g1, self.g2, self.g3, self.power_cap].iter().all(|v| *v >= 0.0)
                && self.static_power > 0.0,
            "invalid split problem {self:?}"
        );
        if self.g1 <= self.g2 {
            return SplitSolution {
                split: self.null_only(),
                case: KktCase::NullOnly,
                fallback: false,
            };
        }

        let candidates = self.kkt_candidates();
        let fallback = candidates.is_empty();
        let mut best = SplitSolution {
            split: PowerSplit::default(),
            case: KktCase::Off,
            fallback,
        };
        let mut best_value = self.objective(best.split);
        for cand in candidates {
            let value = self.objective(cand.split);
            let better = value > best_value + TIE_TOL * best_value.abs().max(1.0)
                || ((value - best_value).abs() <= TIE_TOL * best_value.abs().max(1.0)
                    && cand.split.p1 < best.split.p1);
            if better {
                best_value = value;
                best.split = cand.split;
                best.case = cand.case;
            }
        }
        best
    }

    /// `p1 = 0`, `p2 = min(p2*, P)`.
    fn null_only(&self) -> PowerSplit {
        if self.g2 <= 0.0 || self.power_cap <= 0.0 {
            return PowerSplit::default();
        }
        PowerSplit {
            p1: 0.0,
            p2: self.null_stationary_power().min(self.power_cap),
        }
    }
}

/// Solves the split problem, routing degenerate directions as follows: a
/// missing `w1` zeroes `g1` and `g3`; a missing `w2` zeroes `g2`, which leaves
/// only the range-direction cases.
pub fn solve_rank_deficient(c: &RankDeficientCoefficients) -> SplitSolution {
    let mut problem = SplitProblem::from(c);
    if c.w1.is_none() {
        problem.g1 = 0.0;
        problem.g3 = 0.0;
    }
    if c.w2.is_none() {
        problem.g2 = 0.0;
    }
    problem.solve()
}
