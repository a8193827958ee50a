//! Physical-layer utilities: interference, SINR, rate, consumed power and
//! energy efficiency (bit/Hz/Joule) for a set of beams.

use serde::{Deserialize, Serialize};

use crate::cxlinalg::CVector;
use crate::scenario::{NetworkScenario, Regime};

/// Slack allowed on `‖w_k‖² ≤ P_k`.
pub const POWER_SLACK: f64 = 1e-9;

/// `I_k = Σ_{j≠k} |h_{j,k}ᴴ w_j|²` from raw beams.
pub fn interference(scenario: &NetworkScenario, beams: &[CVector], k: usize) -> f64 {
    beams
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(j, w)| scenario.channel(j, k).dot(w).norm_sqr())
        .sum()
}

/// The K beam vectors plus the interference each receiver currently sees.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamState {
    beams: Vec<CVector>,
    interference: Vec<f64>,
}

impl BeamState {
    pub fn new(scenario: &NetworkScenario, beams: Vec<CVector>) -> Self {
        assert_eq!(beams.len(), scenario.num_pairs(), "one beam per user pair");
        let interference = (0..beams.len())
            .map(|k| interference(scenario, &beams, k))
            .collect();
        BeamState {
            beams,
            interference,
        }
    }

    pub fn zeros(scenario: &NetworkScenario) -> Self {
        let beams = vec![CVector::zeros(scenario.num_antennas()); scenario.num_pairs()];
        Self::new(scenario, beams)
    }

    pub fn beams(&self) -> &[CVector] {
        &self.beams
    }

    pub fn beam(&self, k: usize) -> &CVector {
        &self.beams[k]
    }

    pub fn num_users(&self) -> usize {
        self.beams.len()
    }

    /// Cached `I_k`.
    pub fn interference(&self, k: usize) -> f64 {
        self.interference[k]
    }

    /// Replaces beam `k`, updating the cached interference at every other
    /// receiver by the change in `|h_{k,j}ᴴ w_k|²`.
    pub fn set_beam(&mut self, scenario: &NetworkScenario, k: usize, beam: CVector) {
        for j in 0..self.beams.len() {
            if j == k {
                continue;
            }
            let h = scenario.channel(k, j);
            let delta = h.dot(&beam).norm_sqr() - h.dot(&self.beams[k]).norm_sqr();
            self.interference[j] = (self.interference[j] + delta).max(0.0);
        }
        self.beams[k] = beam;
    }

    /// Recomputes every cached interference term from scratch.
    pub fn refresh(&mut self, scenario: &NetworkScenario) {
        for k in 0..self.beams.len() {
            self.interference[k] = interference(scenario, &self.beams, k);
        }
    }

    pub fn is_feasible(&self, scenario: &NetworkScenario) -> bool {
        self.beams
            .iter()
            .zip(&scenario.pmax_w)
            .all(|(w, &p)| w.norm_sqr() <= p + POWER_SLACK)
    }

    /// Largest relative gap between cached and recomputed interference.
    pub fn cache_drift(&self, scenario: &NetworkScenario) -> f64 {
        (0..self.beams.len())
            .map(|k| {
                let exact = interference(scenario, &self.beams, k);
                (self.interference[k] - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// `|h_{k,k}ᴴ w|²`
pub fn signal_power(scenario: &NetworkScenario, k: usize, beam: &CVector) -> f64 {
    scenario.channel(k, k).dot(beam).norm_sqr()
}

/// Interference plus noise at receiver `k`.
pub fn ipnp(scenario: &NetworkScenario, state: &BeamState, k: usize) -> f64 {
    scenario.noise_w[k] + state.interference(k)
}

pub fn sinr(scenario: &NetworkScenario, state: &BeamState, k: usize) -> f64 {
    signal_power(scenario, k, state.beam(k)) / ipnp(scenario, state, k)
}

/// `ρ‖w_k‖² + M·P_ct + P_cr + P_bh`, watts.
pub fn total_power(scenario: &NetworkScenario, beam: &CVector, k: usize, regime: Regime) -> f64 {
    scenario.rho() * beam.norm_sqr() + scenario.static_power_w(k, regime)
}

/// EE of user `k` with beam `beam` and the other users' interference held at
/// `ipnp` (interference plus noise): `log2(1 + S/ipnp) / P_T`.
pub fn user_ee(
    scenario: &NetworkScenario,
    k: usize,
    beam: &CVector,
    ipnp: f64,
    regime: Regime,
) -> f64 {
    let eta = signal_power(scenario, k, beam) / ipnp;
    if eta == 0.0 {
        return 0.0;
    }
    eta.ln_1p() / std::f64::consts::LN_2 / total_power(scenario, beam, k, regime)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub sinr: Vec<f64>,
    /// bit/s/Hz
    pub rate: Vec<f64>,
    /// W
    pub total_power: Vec<f64>,
    /// bit/Hz/Joule
    pub ee: Vec<f64>,
    pub wsee: f64,
}

impl UtilityReport {
    /// Individual EE converted to bit/Joule using the system bandwidth.
    pub fn ee_bits_per_joule(&self, bandwidth_hz: f64) -> Vec<f64> {
        self.ee.iter().map(|e| e * bandwidth_hz).collect()
    }
}

/// Weighted sum of individual energy efficiencies.
pub fn wsee(scenario: &NetworkScenario, state: &BeamState, regime: Regime) -> UtilityReport {
    let k_pairs = state.num_users();
    let mut report = UtilityReport {
        sinr: Vec::with_capacity(k_pairs),
        rate: Vec::with_capacity(k_pairs),
        total_power: Vec::with_capacity(k_pairs),
        ee: Vec::with_capacity(k_pairs),
        wsee: 0.0,
    };
    for k in 0..k_pairs {
        let eta = sinr(scenario, state, k);
        let rate = eta.ln_1p() / std::f64::consts::LN_2;
        let p_t = total_power(scenario, state.beam(k), k, regime);
        let ee = if rate == 0.0 { 0.0 } else { rate / p_t };
        report.sinr.push(eta);
        report.rate.push(rate);
        report.total_power.push(p_t);
        report.ee.push(ee);
        report.wsee += scenario.weights[k] * ee;
    }
    report
}

/// Just the WS-EE scalar.
pub fn wsee_value(scenario: &NetworkScenario, state: &BeamState, regime: Regime) -> f64 {
    (0..state.num_users())
        .map(|k| {
            scenario.weights[k]
                * user_ee(scenario, k, state.beam(k), ipnp(scenario, state, k), regime)
        })
        .sum()
}
