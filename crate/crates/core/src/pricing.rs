//! Interference prices and leakage matrices.
//!
//! Receiver `j` charges `π_j = -α_j ∂U_j/∂I_j` per watt of interference it
//! sees. Transmitter `k` folds the prices it hears into the leakage matrix
//! `L_k = Σ_j π_j h_{k,j} h_{k,j}ᴴ`, whose quadratic form is the total cost of
//! the interference `k` generates.

use std::f64::consts::LN_2;

use crate::cxlinalg::{eig_hermitian, CVector, EigenDecomposition, HermitianMatrix};
use crate::metrics::{ipnp, signal_power, total_power, BeamState};
use crate::scenario::{NetworkScenario, Regime};

/// `π_j` at the current state.
pub fn price(scenario: &NetworkScenario, state: &BeamState, regime: Regime, j: usize) -> f64 {
    let alpha = scenario.weights[j];
    let signal = signal_power(scenario, j, state.beam(j));
    if alpha == 0.0 || signal == 0.0 {
        return 0.0;
    }
    let ipn = ipnp(scenario, state, j);
    let eta = signal / ipn;
    let p_t = total_power(scenario, state.beam(j), j, regime);
    alpha * signal / (LN_2 * p_t * (1.0 + eta) * ipn * ipn)
}

/// Receivers that feed information back to each transmitter.
///
/// `Full`: all receivers. `Limited`: own receiver plus receivers within the
/// broadcast radius of the transmitter. `Noncooperative`: own receiver only.
pub fn feedback_sets(scenario: &NetworkScenario, regime: Regime) -> Vec<Vec<usize>> {
    let k_pairs = scenario.num_pairs();
    (0..k_pairs)
        .map(|k| match regime {
            Regime::Full => (0..k_pairs).collect(),
            Regime::Limited => (0..k_pairs)
                .filter(|&j| j == k || scenario.link_distance(k, j) <= scenario.config.dth_m)
                .collect(),
            Regime::Noncooperative => vec![k],
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceSet {
    pub prices: Vec<f64>,
    /// `feedback_sets[k]` always contains `k` itself (the IPNP feedback).
    pub feedback_sets: Vec<Vec<usize>>,
}

impl PriceSet {
    pub fn compute(scenario: &NetworkScenario, state: &BeamState, regime: Regime) -> Self {
        Self::with_feedback(scenario, state, regime, feedback_sets(scenario, regime))
    }

    /// Reuses precomputed feedback sets; they depend only on the geometry.
    pub fn with_feedback(
        scenario: &NetworkScenario,
        state: &BeamState,
        regime: Regime,
        feedback_sets: Vec<Vec<usize>>,
    ) -> Self {
        let prices = (0..scenario.num_pairs())
            .map(|j| price(scenario, state, regime, j))
            .collect();
        PriceSet {
            prices,
            feedback_sets,
        }
    }

    /// `N_k = |T_k|`
    pub fn feedback_count(&self, k: usize) -> usize {
        self.feedback_sets[k].len()
    }
}

#[derive(Clone, Debug)]
pub struct LeakageMatrix {
    pub matrix: HermitianMatrix,
    pub decomposition: EigenDecomposition,
    pub rank: usize,
}

impl LeakageMatrix {
    pub fn zero(dim: usize) -> Self {
        Self::from_matrix(HermitianMatrix::zeros(dim))
    }

    pub fn from_matrix(matrix: HermitianMatrix) -> Self {
        let decomposition =
            eig_hermitian(&matrix).expect("leakage matrix is Hermitian by construction");
        let rank = decomposition.numerical_rank();
        LeakageMatrix {
            matrix,
            decomposition,
            rank,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim()
    }
}

/// `L_k` built from the prices transmitter `k` receives.
pub fn leakage(scenario: &NetworkScenario, prices: &PriceSet, k: usize) -> LeakageMatrix {
    let mut l = HermitianMatrix::zeros(scenario.num_antennas());
    for &j in &prices.feedback_sets[k] {
        let pi = prices.prices[j];
        if j != k && pi > 0.0 {
            l.add_outer(scenario.channel(k, j), pi);
        }
    }
    LeakageMatrix::from_matrix(l)
}

/// `w_kᴴ L_k w_k`
pub fn pricing_cost(leakage: &LeakageMatrix, beam: &CVector) -> f64 {
    leakage.matrix.quad_form(beam)
}
