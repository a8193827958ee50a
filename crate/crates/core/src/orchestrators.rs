//! End-to-end beamforming algorithms: sequential pricing best response
//! (full and limited exchange), the selfish baseline, and centralized
//! gradient projection with Armijo steps.

use std::f64::consts::LN_2;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cxlinalg::CVector;
use crate::metrics::{ipnp, signal_power, total_power, wsee_value, BeamState};
use crate::peruser::{peruser_objective, solve_peruser};
use crate::pricing::{feedback_sets, leakage, LeakageMatrix, PriceSet};
use crate::scenario::{trial_rng, NetworkScenario, Regime};

/// Slack allowed when checking that a monotone trace never decreases.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    /// WS-EE of the initial point followed by one entry per outer iteration.
    pub wsee_trace: Vec<f64>,
    pub final_beams: BeamState,
    pub iterations: usize,
    pub overhead_scalars: u64,
    pub wallclock_ms: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

impl RunReport {
    pub fn final_wsee(&self) -> f64 {
        *self.wsee_trace.last().expect("trace holds the initial point")
    }

    /// Largest drop between consecutive trace entries (0 for a monotone trace).
    pub fn worst_decrease(&self) -> f64 {
        self.wsee_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoParams {
    /// Sufficient-increase fraction.
    pub delta: f64,
    /// Backtracking factor.
    pub beta: f64,
    pub initial_step: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub max_backtracks: u32,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams {
            delta: 0.3,
            beta: 0.5,
            initial_step: 1.0,
            tolerance: 1e-5,
            max_iters: 1000,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Exact gradient of the weighted sum.
    #[default]
    Clean,
    /// Legacy closed form using `σ² + I` in place of `σ² + I + S`.
    Paper,
}

/// Matched-filter beams with uniformly random power in `[0, P_k]`.
pub fn init_beams(scenario: &NetworkScenario) -> BeamState {
    let mut rng = trial_rng(scenario.config.seed, scenario.trial_index, 1);
    let beams = (0..scenario.num_pairs())
        .map(|k| {
            let u: f64 = rng.random_range(0.0..=1.0);
            let h = scenario.channel(k, k);
            match h.normalized() {
                Some(dir) => dir.scale((u * scenario.pmax_w[k]).sqrt()),
                None => CVector::zeros(scenario.num_antennas()),
            }
        })
        .collect();
    BeamState::new(scenario, beams)
}

/// `‖w‖² ≤ P` by radial rescaling.
pub fn project_to_power_ball(beam: &CVector, cap: f64) -> CVector {
    let power = beam.norm_sqr();
    if power > cap {
        beam.scale((cap / power).sqrt())
    } else {
        beam.clone()
    }
}

pub fn dapb_overhead(iterations: usize, feedback_counts: &[usize]) -> u64 {
    iterations as u64 * feedback_counts.iter().map(|&n| n as u64).sum::<u64>()
}

pub fn full_dapb_overhead(iterations: usize, num_pairs: usize) -> u64 {
    iterations as u64 * (num_pairs as u64).pow(2)
}

pub fn noncooperative_overhead(iterations: usize, num_pairs: usize) -> u64 {
    iterations as u64 * num_pairs as u64
}

pub fn centralized_overhead(num_pairs: usize, num_antennas: usize) -> u64 {
    let (k, m) = (num_pairs as u64, num_antennas as u64);
    2 * k * k * m + 2 * k * m
}

fn relative_change(new: f64, old: f64) -> f64 {
    if new == old {
        0.0
    } else {
        (new - old).abs() / old.abs()
    }
}

/// Sequential pricing best response with full or limited price exchange.
pub fn run_dapb(
    scenario: &NetworkScenario,
    regime: Regime,
    init: &BeamState,
    tolerance: f64,
    max_iters: usize,
) -> RunReport {
    assert!(
        regime != Regime::Noncooperative,
        "use run_noncooperative for the selfish baseline"
    );
    best_response(scenario, regime, init, tolerance, max_iters, true)
}

/// Every user maximises its own EE, ignoring the interference it causes.
pub fn run_noncooperative(
    scenario: &NetworkScenario,
    init: &BeamState,
    tolerance: f64,
    max_iters: usize,
) -> RunReport {
    best_response(
        scenario,
        Regime::Noncooperative,
        init,
        tolerance,
        max_iters,
        false,
    )
}

fn best_response(
    scenario: &NetworkScenario,
    regime: Regime,
    init: &BeamState,
    tolerance: f64,
    max_iters: usize,
    priced: bool,
) -> RunReport {
    let start = Instant::now();
    let k_pairs = scenario.num_pairs();
    let m = scenario.num_antennas();
    let feedback = feedback_sets(scenario, regime);
    let mut state = init.clone();
    let mut value = wsee_value(scenario, &state, regime);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        for k in 0..k_pairs {
            let l = if priced {
                let prices = PriceSet::with_feedback(scenario, &state, regime, feedback.clone());
                leakage(scenario, &prices, k)
            } else {
                LeakageMatrix::zero(m)
            };
            let candidate = solve_peruser(scenario, &state, &l, k, regime).beam;
            let old = peruser_objective(scenario, &state, &l, k, state.beam(k), regime);
            let new = peruser_objective(scenario, &state, &l, k, &candidate, regime);
            if new >= old {
                state.set_beam(scenario, k, candidate);
            }
        }
        state.refresh(scenario);
        let next = wsee_value(scenario, &state, regime);
        trace.push(next);
        let change = relative_change(next, value);
        value = next;
        if change < tolerance {
            converged = true;
            break;
        }
    }

    let overhead_scalars = match regime {
        Regime::Full => full_dapb_overhead(iterations, k_pairs),
        Regime::Limited => {
            let counts: Vec<usize> = feedback.iter().map(Vec::len).collect();
            dapb_overhead(iterations, &counts)
        }
        Regime::Noncooperative => noncooperative_overhead(iterations, k_pairs),
    };
    RunReport {
        wsee_trace: trace,
        final_beams: state,
        iterations,
        overhead_scalars,
        wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        converged,
        diagnostic: (!converged).then(|| format!("no convergence after {max_iters} iterations")),
    }
}

/// Conjugate (Wirtinger) gradient of `α_k U_k` alone with respect to `w_k`.
fn own_gradient(
    scenario: &NetworkScenario,
    state: &BeamState,
    k: usize,
    mode: GradientMode,
) -> CVector {
    let alpha = scenario.weights[k];
    let w = state.beam(k);
    let h = scenario.channel(k, k);
    let noise = ipnp(scenario, state, k);
    let signal = signal_power(scenario, k, w);
    let p_t = total_power(scenario, w, k, Regime::Full);
    let rho = scenario.rho();
    let log_term = (signal / noise).ln_1p();
    let weight_on_w = match mode {
        GradientMode::Clean => noise + signal,
        GradientMode::Paper => noise,
    };
    let scale = alpha / (LN_2 * p_t * p_t * (noise + signal));
    // P_T h hᴴ w - ρ ln(1 + η) (·) w
    let hw = h.dot(w);
    let mut g = h.scale_complex(hw * p_t * scale);
    g.axpy(Complex64::from(-rho * log_term * weight_on_w * scale), w);
    g
}

fn gradient(scenario: &NetworkScenario, state: &BeamState, mode: GradientMode) -> Vec<CVector> {
    let prices = PriceSet::compute(scenario, state, Regime::Full);
    (0..scenario.num_pairs())
        .map(|k| {
            let mut g = own_gradient(scenario, state, k, mode);
            // - L_k w_k
            for j in (0..scenario.num_pairs()).filter(|&j| j != k) {
                let pi = prices.prices[j];
                if pi > 0.0 {
                    let h = scenario.channel(k, j);
                    g.axpy(-h.dot(state.beam(k)) * pi, h);
                }
            }
            g
        })
        .collect()
}

/// Exact conjugate gradient `∂U_ws/∂w_k*` for every user. The real-coordinate
/// gradient is twice this vector.
pub fn gradient_clean(scenario: &NetworkScenario, state: &BeamState) -> Vec<CVector> {
    gradient(scenario, state, GradientMode::Clean)
}

/// Legacy closed form; differs from [`gradient_clean`] only in
/// the factor multiplying the `w_k` term.
pub fn gradient_paper(scenario: &NetworkScenario, state: &BeamState) -> Vec<CVector> {
    gradient(scenario, state, GradientMode::Paper)
}

/// Gradient projection with Armijo backtracking on the weighted sum of EEs.
pub fn run_centralized(
    scenario: &NetworkScenario,
    init: &BeamState,
    params: &ArmijoParams,
    mode: GradientMode,
) -> RunReport {
    let start = Instant::now();
    let regime = Regime::Full;
    let mut state = init.clone();
    let mut value = wsee_value(scenario, &state, regime);
    let mut trace = vec![value];
    let mut converged = false;
    let mut diagnostic = None;
    let mut iterations = 0;

    while iterations < params.max_iters {
        let grads = gradient(scenario, &state, mode);
        let directions: Vec<CVector> = grads
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let w = state.beam(k);
                let mut target = w.clone();
                target.axpy(params.initial_step.into(), g);
                &project_to_power_ball(&target, scenario.pmax_w[k]) - w
            })
            .collect();
        let gain: f64 = grads
            .iter()
            .zip(&directions)
            .map(|(g, d)| g.dot(d).re)
            .sum();
        if !(gain > 0.0) {
            converged = true;
            break;
        }

        let mut accepted = None;
        let mut kappa = 1.0;
        for _ in 0..=params.max_backtracks {
            let beams = state
                .beams()
                .iter()
                .zip(&directions)
                .enumerate()
                .map(|(k, (w, d))| {
                    let mut next = w.clone();
                    next.axpy(kappa.into(), d);
                    project_to_power_ball(&next, scenario.pmax_w[k])
                })
                .collect();
            let trial = BeamState::new(scenario, beams);
            let trial_value = wsee_value(scenario, &trial, regime);
            if trial_value - value >= params.delta * kappa * gain {
                accepted = Some((trial, trial_value));
                break;
            }
            kappa *= params.beta;
        }
        let Some((next_state, next_value)) = accepted else {
            diagnostic = Some(format!(
                "Armijo search failed after {} backtracks",
                params.max_backtracks
            ));
            break;
        };

        iterations += 1;
        state = next_state;
        trace.push(next_value);
        let change = relative_change(next_value, value);
        value = next_value;
        if change < params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence after {} iterations", params.max_iters));
    }

    RunReport {
        wsee_trace: trace,
        final_beams: state,
        iterations,
        overhead_scalars: centralized_overhead(scenario.num_pairs(), scenario.num_antennas()),
        wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        converged,
        diagnostic,
    }
}
