//! Command-line front end.

use std::path::PathBuf;

use clap::Parser;

use super::{
    export, read_weights_file, run_campaign, Algorithm, Campaign, Format, HarnessError, SweepAxis,
};
use crate::orchestrators::{ArmijoParams, GradientMode};
use crate::scenario::SimConfig;

#[derive(Debug, Parser)]
#[command(
    name = "dapb",
    version,
    about = "Monte Carlo campaigns for pricing-based energy-efficient beamforming"
)]
pub struct Cli {
    /// TOML file with simulation parameters; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of transmitter-receiver pairs K.
    #[arg(long)]
    pub users: Option<usize>,
    /// Transmit antennas M.
    #[arg(long)]
    pub antennas: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub pmax_dbm: Option<f64>,
    /// Side of the square deployment area, m.
    #[arg(long)]
    pub dlen: Option<f64>,
    /// Price broadcast radius of the limited-exchange variant, m.
    #[arg(long)]
    pub dth: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Algorithm to run; repeat for several.
    #[arg(long = "alg", value_parser = clap::value_parser!(AlgorithmArg))]
    pub algorithms: Vec<AlgorithmArg>,
    /// Sweep axis and comma-separated values, e.g. `--sweep pmax_dbm -10,0,10`.
    #[arg(long, num_args = 2, value_names = ["AXIS", "VALUES"], allow_hyphen_values = true)]
    pub sweep: Option<Vec<String>>,
    /// Relative WS-EE change that stops the distributed algorithms.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Weights file (one value per line) or `equal`.
    #[arg(long)]
    pub weights: Option<String>,
    /// Output path; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Gradient used by the centralized benchmark.
    #[arg(long, default_value = "clean")]
    pub gradient: GradientArg,
    /// Relative WS-EE change that stops the centralized benchmark.
    #[arg(long, default_value_t = ArmijoParams::default().tolerance)]
    pub centralized_tolerance: f64,
    /// Write 0 for wallclock so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlgorithmArg(pub Algorithm);

impl std::str::FromStr for AlgorithmArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(AlgorithmArg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradientArg(pub GradientMode);

impl std::str::FromStr for GradientArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(GradientArg(GradientMode::Clean)),
            "paper" => Ok(GradientArg(GradientMode::Paper)),
            _ => Err(format!("unknown gradient '{s}' (expected clean or paper)")),
        }
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, HarnessError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| HarnessError::Campaign(format!("sweep value '{v}': {e}")))
        })
        .collect()
}

impl Cli {
    /// Merges the config file, defaults and flags into a campaign.
    pub fn campaign(&self) -> Result<Campaign, HarnessError> {
        let mut base = match &self.config {
            Some(path) => SimConfig::from_toml_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(v) = self.users {
            base.num_pairs = v;
        }
        if let Some(v) = self.antennas {
            base.num_antennas = v;
        }
        if let Some(v) = self.pmax_dbm {
            base.pmax_dbm = v;
        }
        if let Some(v) = self.dlen {
            base.dlen_m = v;
        }
        if let Some(v) = self.dth {
            base.dth_m = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.tolerance {
            base.tolerance = v;
        }
        if let Some(v) = self.max_iters {
            base.max_outer_iters = v;
        }
        match self.weights.as_deref() {
            None => {}
            Some("equal") => base.weights = Vec::new(),
            Some(path) => base.weights = read_weights_file(path.as_ref())?,
        }

        let (axis, values) = match &self.sweep {
            Some(pair) => {
                let axis: SweepAxis = pair[0].parse().map_err(HarnessError::Campaign)?;
                (axis, parse_values(&pair[1])?)
            }
            None => (SweepAxis::PmaxDbm, vec![base.pmax_dbm]),
        };
        let algorithms = if self.algorithms.is_empty() {
            vec![Algorithm::Dapb]
        } else {
            self.algorithms.iter().map(|a| a.0).collect()
        };
        let armijo = ArmijoParams {
            tolerance: self.centralized_tolerance,
            max_iters: self.max_iters.unwrap_or(ArmijoParams::default().max_iters),
            ..ArmijoParams::default()
        };

        let campaign = Campaign {
            base,
            axis,
            values,
            algorithms,
            trials: self.trials,
            armijo,
            gradient: self.gradient.0,
            jobs: self.jobs,
            record_timing: !self.no_timing,
        };
        campaign.validate()?;
        Ok(campaign)
    }

    pub fn run(&self) -> Result<usize, HarnessError> {
        let campaign = self.campaign()?;
        let rows = run_campaign(&campaign)?;
        export(&rows, self.format, &self.out)?;
        Ok(rows.len())
    }
}
