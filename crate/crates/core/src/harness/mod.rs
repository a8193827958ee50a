//! Monte Carlo campaigns: sweep one parameter, run every requested algorithm
//! on the same scenarios, and collect one row per (point, trial, algorithm).

pub mod cli;
pub mod export;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::wsee;
use crate::orchestrators::{
    init_beams, run_centralized, run_dapb, run_noncooperative, ArmijoParams, GradientMode,
    RunReport,
};
use crate::scenario::{ConfigError, NetworkScenario, Regime, SimConfig};

pub use export::{export, write_csv, write_jsonl, ExportError, Format, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid campaign: {0}")]
    Campaign(String),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("cannot read weights file {path}: {message}")]
    Weights { path: String, message: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dapb,
    LimitedDapb,
    Noncoop,
    Centralized,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Dapb,
        Algorithm::LimitedDapb,
        Algorithm::Noncoop,
        Algorithm::Centralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dapb => "dapb",
            Algorithm::LimitedDapb => "limited-dapb",
            Algorithm::Noncoop => "noncoop",
            Algorithm::Centralized => "centralized",
        }
    }

    /// Power model the algorithm's users pay for.
    pub fn regime(self) -> Regime {
        match self {
            Algorithm::Dapb | Algorithm::Centralized => Regime::Full,
            Algorithm::LimitedDapb => Regime::Limited,
            Algorithm::Noncoop => Regime::Noncooperative,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}' (expected dapb, limited-dapb, noncoop or centralized)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NumPairs,
    PmaxDbm,
    NumAntennas,
    DlenM,
    DthM,
    /// Blend from equal weights (0) to the configured weights (1).
    Weights,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NumPairs => "num_pairs",
            SweepAxis::PmaxDbm => "pmax_dbm",
            SweepAxis::NumAntennas => "num_antennas",
            SweepAxis::DlenM => "dlen_m",
            SweepAxis::DthM => "dth_m",
            SweepAxis::Weights => "weights",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig, HarnessError> {
        let mut config = base.clone();
        let count = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Campaign(format!(
                    "{} needs positive integer values, got {v}",
                    self.name()
                )))
            }
        };
        match self {
            SweepAxis::NumPairs => config.num_pairs = count(value)?,
            SweepAxis::NumAntennas => config.num_antennas = count(value)?,
            SweepAxis::PmaxDbm => config.pmax_dbm = value,
            SweepAxis::DlenM => config.dlen_m = value,
            SweepAxis::DthM => config.dth_m = value,
            SweepAxis::Weights => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(HarnessError::Campaign(format!(
                        "weights blend must lie in [0, 1], got {value}"
                    )));
                }
                config.weights = (0..config.num_pairs)
                    .map(|k| (1.0 - value) + value * base.weight(k))
                    .collect();
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Current value of this axis in `config`.
    pub fn value_of(self, config: &SimConfig) -> f64 {
        match self {
            SweepAxis::NumPairs => config.num_pairs as f64,
            SweepAxis::NumAntennas => config.num_antennas as f64,
            SweepAxis::PmaxDbm => config.pmax_dbm,
            SweepAxis::DlenM => config.dlen_m,
            SweepAxis::DthM => config.dth_m,
            SweepAxis::Weights => 1.0,
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "num_pairs" | "users" => SweepAxis::NumPairs,
            "pmax_dbm" | "pmax-dbm" => SweepAxis::PmaxDbm,
            "num_antennas" | "antennas" => SweepAxis::NumAntennas,
            "dlen_m" | "dlen" => SweepAxis::DlenM,
            "dth_m" | "dth" => SweepAxis::DthM,
            "weights" => SweepAxis::Weights,
            _ => {
                return Err(format!(
                    "unknown sweep axis '{s}' (expected num_pairs, pmax_dbm, num_antennas, dlen_m, dth_m or weights)"
                ))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub base: SimConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub trials: u64,
    pub armijo: ArmijoParams,
    pub gradient: GradientMode,
    /// Worker threads; `None` uses all available cores.
    pub jobs: Option<usize>,
    /// Record zero wallclock so reruns are byte-identical.
    pub record_timing: bool,
}

impl Campaign {
    /// A single point at the base configuration's Pmax.
    pub fn single(base: SimConfig, algorithms: Vec<Algorithm>, trials: u64) -> Self {
        Campaign {
            axis: SweepAxis::PmaxDbm,
            values: vec![base.pmax_dbm],
            base,
            algorithms,
            trials,
            armijo: ArmijoParams::default(),
            gradient: GradientMode::Clean,
            jobs: None,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Campaign(m.into()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.values.is_empty() {
            return fail("sweep needs at least one value");
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return fail("sweep values must be strictly increasing");
        }
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required");
        }
        if self.jobs == Some(0) {
            return fail("jobs must be at least 1");
        }
        self.base.validate()?;
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub trial: u64,
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub wsee_bits_per_hz_per_joule: f64,
    pub overhead_scalars: u64,
    pub wallclock_ms: f64,
    pub converged: bool,
    pub per_user_ee: Vec<f64>,
    pub scenario_fingerprint: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(sweep_value: f64, trial: u64, algorithm: Algorithm, error: String) -> Self {
        ResultRow {
            sweep_value,
            trial,
            algorithm,
            iterations: 0,
            wsee_bits_per_hz_per_joule: f64::NAN,
            overhead_scalars: 0,
            wallclock_ms: 0.0,
            converged: false,
            per_user_ee: Vec::new(),
            scenario_fingerprint: 0,
            error: Some(error),
        }
    }
}

/// Runs one algorithm from the shared initial point.
pub fn run_algorithm(
    algorithm: Algorithm,
    scenario: &NetworkScenario,
    init: &crate::metrics::BeamState,
    armijo: &ArmijoParams,
    gradient: GradientMode,
) -> RunReport {
    let tol = scenario.config.tolerance;
    let iters = scenario.config.max_outer_iters;
    match algorithm {
        Algorithm::Dapb => run_dapb(scenario, Regime::Full, init, tol, iters),
        Algorithm::LimitedDapb => run_dapb(scenario, Regime::Limited, init, tol, iters),
        Algorithm::Noncoop => run_noncooperative(scenario, init, tol, iters),
        Algorithm::Centralized => run_centralized(scenario, init, armijo, gradient),
    }
}

fn run_trial(campaign: &Campaign, config: &SimConfig, value: f64, trial: u64) -> Vec<ResultRow> {
    let scenario = match NetworkScenario::generate(config, trial) {
        Ok(s) => s,
        Err(e) => {
            return campaign
                .algorithms
                .iter()
                .map(|&a| ResultRow::failed(value, trial, a, e.to_string()))
                .collect()
        }
    };
    let init = init_beams(&scenario);
    campaign
        .algorithms
        .iter()
        .map(|&algorithm| {
            let report = run_algorithm(algorithm, &scenario, &init, &campaign.armijo, campaign.gradient);
            let utility = wsee(&scenario, &report.final_beams, algorithm.regime());
            ResultRow {
                sweep_value: value,
                trial,
                algorithm,
                iterations: report.iterations,
                wsee_bits_per_hz_per_joule: utility.wsee,
                overhead_scalars: report.overhead_scalars,
                wallclock_ms: if campaign.record_timing { report.wallclock_ms } else { 0.0 },
                converged: report.converged,
                per_user_ee: utility.ee,
                scenario_fingerprint: scenario.fingerprint(),
                error: None,
            }
        })
        .collect()
}

/// Every row of the campaign, ordered by sweep point, trial, then the
/// order of `campaign.algorithms`.
pub fn run_campaign(campaign: &Campaign) -> Result<Vec<ResultRow>, HarnessError> {
    campaign.validate()?;
    let configs: Vec<SimConfig> = campaign
        .values
        .iter()
        .map(|&v| campaign.axis.apply(&campaign.base, v))
        .collect::<Result<_, _>>()?;
    let work: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|p| (0..campaign.trials).map(move |t| (p, t)))
        .collect();

    let job = || {
        work.par_iter()
            .map(|&(p, t)| (p, t, run_trial(campaign, &configs[p], campaign.values[p], t)))
            .collect::<Vec<_>>()
    };
    let mut batches = match campaign.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(job),
        None => job(),
    };
    batches.sort_by_key(|&(p, t, _)| (p, t));
    Ok(batches.into_iter().flat_map(|(_, _, rows)| rows).collect())
}

/// Reads one weight per non-empty line; `#` starts a comment.
pub fn read_weights_file(path: &std::path::Path) -> Result<Vec<f64>, HarnessError> {
    let fail = |message: String| HarnessError::Weights {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| (i, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty())
        .map(|(i, line)| {
            line.parse::<f64>()
                .map_err(|e| fail(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
