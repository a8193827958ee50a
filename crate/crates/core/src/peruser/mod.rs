//! Per-transmitter best response: maximise `α_k U_k(w) - wᴴ L_k w` over
//! `‖w‖² ≤ P_k` with everyone else's beams held fixed.
//!
//! A full-rank leakage matrix is handled by whitening ([`full_rank`]); a
//! rank-deficient one by splitting power between its range and null space
//! ([`rank_deficient`]).

pub mod full_rank;
pub mod lambert;
pub mod rank_deficient;

use std::f64::consts::LN_2;

pub use full_rank::{solve_full_rank, FullRankCase, FullRankCoefficients};
pub use lambert::{lambert_w0, DomainError};
pub use rank_deficient::{
    solve_rank_deficient, KktCase, PowerSplit, RankDeficientCoefficients, SplitProblem,
    SplitSolution,
};

use crate::cxlinalg::{inv_sqrt_from, project_onto_null, project_onto_range, CVector};
use crate::metrics::{ipnp, user_ee, BeamState};
use crate::pricing::{pricing_cost, LeakageMatrix};
use crate::scenario::{NetworkScenario, Regime};

/// Absolute tolerance of every bisection on a power variable.
pub const BISECTION_TOL: f64 = 1e-8;

/// A projected channel component below this fraction of `‖h_{k,k}‖` counts
/// as absent.
pub const DEGENERATE_PROJECTION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum SolverPath {
    /// `α_k = 0`: the user has no stake and stays silent.
    Silent,
    FullRank {
        coefficients: FullRankCoefficients,
        case: FullRankCase,
    },
    RankDeficient {
        coefficients: RankDeficientCoefficients,
        solution: SplitSolution,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerUserSolution {
    pub beam: CVector,
    pub path: SolverPath,
}

/// `α_k U_k(w) - wᴴ L_k w`, with the exact signal power and the interference
/// currently cached in `state`.
pub fn peruser_objective(
    scenario: &NetworkScenario,
    state: &BeamState,
    leakage: &LeakageMatrix,
    k: usize,
    beam: &CVector,
    regime: Regime,
) -> f64 {
    let alpha = scenario.weights[k];
    let ee = user_ee(scenario, k, beam, ipnp(scenario, state, k), regime);
    alpha * ee - pricing_cost(leakage, beam)
}

/// Candidate beam for user `k` against the current state and leakage matrix.
pub fn solve_peruser(
    scenario: &NetworkScenario,
    state: &BeamState,
    leakage: &LeakageMatrix,
    k: usize,
    regime: Regime,
) -> PerUserSolution {
    let m = scenario.num_antennas();
    let alpha = scenario.weights[k];
    let h = scenario.channel(k, k);
    if alpha <= 0.0 || h.norm_sqr() == 0.0 {
        return PerUserSolution {
            beam: CVector::zeros(m),
            path: SolverPath::Silent,
        };
    }
    let noise = ipnp(scenario, state, k);
    let rho = scenario.rho();
    let static_w = scenario.static_power_w(k, regime);
    let cap = scenario.pmax_w[k];

    let (beam, path) = if leakage.is_full_rank() {
        let l_inv_sqrt =
            inv_sqrt_from(&leakage.decomposition).expect("full-rank leakage is invertible");
        let h_bar = l_inv_sqrt.mul_vec(h);
        let u = h_bar.normalized().expect("nonzero channel stays nonzero after whitening");
        let direction = l_inv_sqrt.mul_vec(&u);
        // uᴴ L⁻¹ u
        let c = direction.norm_sqr();
        let coefficients = FullRankCoefficients {
            gain: h_bar.norm_sqr() / noise,
            price: rho * c * LN_2 / alpha,
            power_cap: cap / c,
            static_power: static_w / (rho * c),
        };
        let (p, case) = solve_full_rank(&coefficients);
        (
            direction.scale(p.sqrt()),
            SolverPath::FullRank { coefficients, case },
        )
    } else {
        let coefficients = rank_deficient_coefficients(scenario, leakage, k, noise, regime);
        let solution = solve_rank_deficient(&coefficients);
        let mut beam = CVector::zeros(m);
        if let Some(w1) = &coefficients.w1 {
            beam.axpy(solution.split.p1.sqrt().into(), w1);
        }
        if let Some(w2) = &coefficients.w2 {
            beam.axpy(solution.split.p2.sqrt().into(), w2);
        }
        (
            beam,
            SolverPath::RankDeficient {
                coefficients,
                solution,
            },
        )
    };

    PerUserSolution {
        beam: clamp_power(beam, cap),
        path,
    }
}

/// Reduced coefficients for the rank-deficient path.
pub fn rank_deficient_coefficients(
    scenario: &NetworkScenario,
    leakage: &LeakageMatrix,
    k: usize,
    noise: f64,
    regime: Regime,
) -> RankDeficientCoefficients {
    let alpha = scenario.weights[k];
    let rho = scenario.rho();
    let h = scenario.channel(k, k);
    let h_norm = h.norm();
    let h1 = project_onto_range(&leakage.decomposition, leakage.rank, h);
    let h2 = project_onto_null(&leakage.decomposition, leakage.rank, h);
    let present = |v: &CVector| v.norm() > DEGENERATE_PROJECTION * h_norm;

    let w1 = present(&h1).then(|| h1.normalized()).flatten();
    let w2 = present(&h2).then(|| h2.normalized()).flatten();
    let (g1, g3) = match &w1 {
        Some(w1) => (
            h1.norm_sqr() / noise,
            rho * pricing_cost(leakage, w1) * LN_2 / alpha,
        ),
        None => (0.0, 0.0),
    };
    let g2 = if w2.is_some() { h2.norm_sqr() / noise } else { 0.0 };
    RankDeficientCoefficients {
        g1,
        g2,
        g3,
        static_power: scenario.static_power_w(k, regime) / rho,
        power_cap: scenario.pmax_w[k],
        w1,
        w2,
    }
}

/// Rescales onto the power ball when rounding pushes `‖w‖²` past `cap`.
pub fn clamp_power(beam: CVector, cap: f64) -> CVector {
    let power = beam.norm_sqr();
    if power > cap && power > 0.0 {
        beam.scale((cap / power).sqrt())
    } else {
        beam
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxlinalg::HermitianMatrix;
    use crate::metrics::test_support::*;
    use crate::pricing::{leakage, PriceSet};
    use crate::scenario::SimConfig;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_beam(rng: &mut impl Rng, m: usize, cap: f64) -> CVector {
        let v = CVector(
            (0..m)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        v.scale((rng.random_range(0.0..1.0) * cap).sqrt() / v.norm())
    }

    #[test]
    fn single_user_matches_ee_optimum() {
        let mut s = unit_scenario(vec![vec![real(&[1.0, 0.5, 0.0])]]);
        s.circuit_rx_w = vec![1.0];
        let st = BeamState::zeros(&s);
        let l = LeakageMatrix::zero(3);
        let sol = solve_peruser(&s, &st, &l, 0, Regime::Full);
        // matched filter direction
        let h = s.channel(0, 0);
        assert!((sol.beam.dot(h).norm() - sol.beam.norm() * h.norm()).abs() < 1e-12);
        // power against a 1-D grid
        let f = |p: f64| user_ee(&s, 0, &h.normalized().unwrap().scale(p.sqrt()), 1.0, Regime::Full);
        let grid = (0..=100_000)
            .map(|i| f(10.0 * i as f64 / 100_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(f(sol.beam.norm_sqr()) >= grid - 1e-9);
    }

    #[test]
    fn zero_weight_is_silent() {
        let mut s = unit_scenario(vec![vec![real(&[1.0, 0.0])]]);
        s.weights = vec![0.0];
        let sol = solve_peruser(&s, &BeamState::zeros(&s), &LeakageMatrix::zero(2), 0, Regime::Full);
        assert_eq!(sol.path, SolverPath::Silent);
        assert_eq!(sol.beam.norm_sqr(), 0.0);
    }

    #[test]
    fn full_rank_power_is_best_along_its_direction() {
        let mut s = unit_scenario(vec![vec![CVector(vec![c(1.0, 0.2), c(-0.4, 0.7)])]]);
        s.circuit_tx_w = vec![0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut mat = HermitianMatrix::zeros(2);
            for _ in 0..3 {
                mat.add_outer(&random_beam(&mut rng, 2, 1.0), rng.random_range(0.01..0.5));
            }
            let l = LeakageMatrix::from_matrix(mat);
            assert!(l.is_full_rank());
            let st = BeamState::zeros(&s);
            let sol = solve_peruser(&s, &st, &l, 0, Regime::Full);
            assert!(matches!(sol.path, SolverPath::FullRank { .. }));
            assert!(sol.beam.norm_sqr() <= s.pmax_w[0] + 1e-9);
            let got = peruser_objective(&s, &st, &l, 0, &sol.beam, Regime::Full);
            let Some(unit) = sol.beam.normalized() else {
                continue;
            };
            for i in 0..=2000 {
                let w = unit.scale((s.pmax_w[0] * i as f64 / 2000.0).sqrt());
                assert!(got >= peruser_objective(&s, &st, &l, 0, &w, Regime::Full) - 1e-9);
            }
        }
    }

    #[test]
    fn directions_are_orthonormal() {
        let config = SimConfig {
            num_pairs: 3,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for trial in 0..20 {
            let s = NetworkScenario::generate(&config, trial).unwrap();
            let beams = (0..3).map(|k| random_beam(&mut rng, 4, s.pmax_w[k])).collect();
            let st = BeamState::new(&s, beams);
            let prices = PriceSet::compute(&s, &st, Regime::Full);
            for k in 0..3 {
                let l = leakage(&s, &prices, k);
                assert!(!l.is_full_rank());
                let coeffs = rank_deficient_coefficients(&s, &l, k, ipnp(&s, &st, k), Regime::Full);
                let (w1, w2) = (coeffs.w1.unwrap(), coeffs.w2.unwrap());
                assert!((w1.norm() - 1.0).abs() < 1e-12);
                assert!((w2.norm() - 1.0).abs() < 1e-12);
                assert!(w1.dot(&w2).norm() < 1e-10);
                assert!(coeffs.g1 >= 0.0 && coeffs.g2 >= 0.0 && coeffs.g3 >= 0.0);
                let sol = solve_peruser(&s, &st, &l, k, Regime::Full);
                assert!(sol.beam.norm_sqr() <= s.pmax_w[k] + 1e-9);
            }
        }
    }

    #[test]
    fn clamp_only_shrinks() {
        let w = CVector(vec![Complex64::new(3.0, 4.0)]);
        assert!((clamp_power(w.clone(), 4.0).norm_sqr() - 4.0).abs() < 1e-12);
        assert_eq!(clamp_power(w.clone(), 30.0), w);
    }
}
