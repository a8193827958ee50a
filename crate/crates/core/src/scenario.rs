//! Monte Carlo network realisations.
//!
//! A [`NetworkScenario`] is one random drop of `K` transmitter/receiver pairs
//! in a square area together with Rayleigh-faded, path-loss scaled channels
//! and the per-link power constants. It is a pure function of the
//! configuration and the trial index.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cxlinalg::CVector;

/// Own-link distance range, meters.
pub const LINK_DISTANCE_M: (f64, f64) = (30.0, 60.0);
/// Minimum distance between a transmitter and any unintended receiver, meters.
pub const MIN_CROSS_DISTANCE_M: f64 = 30.0;
/// Rejection-sampling budget per drop.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("could not place {pairs} pairs in a {dlen_m} m square after {attempts} attempts")]
    Placement {
        pairs: usize,
        dlen_m: f64,
        attempts: usize,
    },
}

/// Which information-exchange pattern a user pair operates under. It fixes
/// both the backhaul distance and the set of receivers that feed back to
/// each transmitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every receiver broadcasts its price to every transmitter.
    Full,
    /// Prices only reach transmitters within the broadcast radius.
    Limited,
    /// Only the own receiver's IPNP is fed back.
    Noncooperative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_pairs: usize,
    pub num_antennas: usize,
    pub pmax_dbm: f64,
    pub dlen_m: f64,
    /// Price broadcast radius for the limited-exchange regime.
    pub dth_m: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Power-amplifier inefficiency ρ (the reciprocal of the drain efficiency).
    pub amp_inefficiency: f64,
    /// Target SNR of the message-exchange links, dB.
    pub gamma_snr_db: f64,
    pub tolerance: f64,
    pub max_outer_iters: usize,
    /// Per-user weights; empty means all ones.
    pub weights: Vec<f64>,
    /// Per-antenna transmit circuit power range, mW.
    pub circuit_tx_range_mw: (f64, f64),
    /// Receiver circuit power range, mW.
    pub circuit_rx_range_mw: (f64, f64),
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_pairs: 4,
            num_antennas: 4,
            pmax_dbm: 33.0,
            dlen_m: 350.0,
            dth_m: 100.0,
            bandwidth_hz: 20e6,
            noise_psd_dbm_hz: -174.0,
            amp_inefficiency: 1.0 / 0.35,
            gamma_snr_db: 4.0,
            tolerance: 1e-3,
            max_outer_iters: 200,
            weights: Vec::new(),
            circuit_tx_range_mw: (50.0, 200.0),
            circuit_rx_range_mw: (200.0, 400.0),
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Reads a TOML file whose keys are the field names of this struct.
    /// Missing keys take their default values.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.num_pairs == 0 {
            return fail("num_pairs must be at least 1".into());
        }
        if self.num_antennas == 0 {
            return fail("num_antennas must be at least 1".into());
        }
        if !(self.dlen_m > 0.0) {
            return fail(format!("dlen_m must be positive, got {}", self.dlen_m));
        }
        if !(self.dth_m >= 0.0) {
            return fail(format!("dth_m must be non-negative, got {}", self.dth_m));
        }
        if !(self.tolerance > 0.0) {
            return fail(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if !(self.amp_inefficiency >= 1.0) {
            return fail(format!(
                "amp_inefficiency must be >= 1, got {}",
                self.amp_inefficiency
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz));
        }
        if !self.pmax_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return fail("pmax_dbm and noise_psd_dbm_hz must be finite".into());
        }
        if !self.weights.is_empty() && self.weights.len() != self.num_pairs {
            return fail(format!(
                "{} weights given for {} pairs",
                self.weights.len(),
                self.num_pairs
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return fail("weights must be finite and non-negative".into());
        }
        for (name, (lo, hi)) in [
            ("circuit_tx_range_mw", self.circuit_tx_range_mw),
            ("circuit_rx_range_mw", self.circuit_rx_range_mw),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return fail(format!("{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.get(k).copied().unwrap_or(1.0)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }

    pub fn pmax_w(&self) -> f64 {
        dbm_to_watts(self.pmax_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Path loss in dB at `distance_m` meters.
pub fn path_loss_db(distance_m: f64) -> f64 {
    38.46 + 35.0 * distance_m.log10()
}

/// Linear channel power gain (`10^{-PL/10}`).
pub fn path_gain(distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(distance_m) / 10.0)
}

/// Power needed to reach a peer `distance_m` away at the target SNR.
pub fn backhaul_power(gamma_snr_db: f64, noise_w: f64, distance_m: f64) -> f64 {
    debug_assert!(distance_m >= 1.0, "backhaul distance {distance_m} below 1 m");
    let gamma = 10f64.powf(gamma_snr_db / 10.0);
    gamma * noise_w * 10f64.powf(path_loss_db(distance_m) / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkScenario {
    pub config: SimConfig,
    pub trial_index: u64,
    pub tx_positions: Vec<Point>,
    pub rx_positions: Vec<Point>,
    /// `channels[j][k]` is the channel from transmitter `j` to receiver `k`.
    pub channels: Vec<Vec<CVector>>,
    pub noise_w: Vec<f64>,
    pub pmax_w: Vec<f64>,
    /// Per-antenna transmit circuit power, W.
    pub circuit_tx_w: Vec<f64>,
    pub circuit_rx_w: Vec<f64>,
    pub backhaul_full_w: Vec<f64>,
    pub backhaul_limited_w: Vec<f64>,
    pub backhaul_noncoop_w: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Separate ChaCha streams per trial: even streams draw the network, odd
/// streams draw the initial beam powers.
pub(crate) fn trial_rng(seed: u64, trial_index: u64, purpose: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index.wrapping_mul(2).wrapping_add(purpose));
    rng
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl NetworkScenario {
    pub fn generate(config: &SimConfig, trial_index: u64) -> Result<Self, ScenarioError> {
        config.validate()?;
        let k_pairs = config.num_pairs;
        let m = config.num_antennas;
        let mut rng = trial_rng(config.seed, trial_index, 0);

        let (tx, rx) = place_pairs(config, &mut rng)?;

        let channels: Vec<Vec<CVector>> = (0..k_pairs)
            .map(|j| {
                (0..k_pairs)
                    .map(|k| {
                        let amp = path_gain(tx[j].distance(&rx[k])).sqrt();
                        CVector((0..m).map(|_| complex_gaussian(&mut rng) * amp).collect())
                    })
                    .collect()
            })
            .collect();

        let draw_mw = |rng: &mut ChaCha12Rng, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..=hi) * 1e-3
            } else {
                lo * 1e-3
            }
        };
        let circuit_tx_w: Vec<f64> = (0..k_pairs)
            .map(|_| draw_mw(&mut rng, config.circuit_tx_range_mw))
            .collect();
        let circuit_rx_w: Vec<f64> = (0..k_pairs)
            .map(|_| draw_mw(&mut rng, config.circuit_rx_range_mw))
            .collect();

        let noise = config.noise_power_w();
        let bh = |d: f64| backhaul_power(config.gamma_snr_db, noise, d.max(1.0));
        let backhaul_full_w = (0..k_pairs)
            .map(|k| bh(rx.iter().map(|r| tx[k].distance(r)).fold(0.0, f64::max)))
            .collect();
        let backhaul_limited_w = vec![bh(config.dth_m); k_pairs];
        let backhaul_noncoop_w = (0..k_pairs).map(|k| bh(tx[k].distance(&rx[k]))).collect();

        Ok(NetworkScenario {
            config: config.clone(),
            trial_index,
            tx_positions: tx,
            rx_positions: rx,
            channels,
            noise_w: vec![noise; k_pairs],
            pmax_w: vec![config.pmax_w(); k_pairs],
            circuit_tx_w,
            circuit_rx_w,
            backhaul_full_w,
            backhaul_limited_w,
            backhaul_noncoop_w,
            weights: (0..k_pairs).map(|k| config.weight(k)).collect(),
        })
    }

    pub fn num_pairs(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.config.num_antennas
    }

    pub fn rho(&self) -> f64 {
        self.config.amp_inefficiency
    }

    /// `h_{j,k}`: transmitter `j` to receiver `k`.
    pub fn channel(&self, tx: usize, rx: usize) -> &CVector {
        &self.channels[tx][rx]
    }

    pub fn backhaul_w(&self, k: usize, regime: Regime) -> f64 {
        match regime {
            Regime::Full => self.backhaul_full_w[k],
            Regime::Limited => self.backhaul_limited_w[k],
            Regime::Noncooperative => self.backhaul_noncoop_w[k],
        }
    }

    /// Beam-independent part of the consumed power: `M·P_ct + P_cr + P_bh`.
    pub fn static_power_w(&self, k: usize, regime: Regime) -> f64 {
        self.num_antennas() as f64 * self.circuit_tx_w[k]
            + self.circuit_rx_w[k]
            + self.backhaul_w(k, regime)
    }

    pub fn link_distance(&self, tx: usize, rx: usize) -> f64 {
        self.tx_positions[tx].distance(&self.rx_positions[rx])
    }

    /// Order-sensitive 64-bit digest of every number in the realisation.
    /// Two algorithms run on the same trial see the same digest.
    pub fn fingerprint(&self) -> u64 {
        const FNV_PRIME: u64 = 0x100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
        };
        for p in self.tx_positions.iter().chain(&self.rx_positions) {
            feed(p.x);
            feed(p.y);
        }
        for z in self.channels.iter().flatten().flat_map(|v| v.0.iter()) {
            feed(z.re);
            feed(z.im);
        }
        for v in [
            &self.noise_w,
            &self.pmax_w,
            &self.circuit_tx_w,
            &self.circuit_rx_w,
            &self.backhaul_full_w,
            &self.backhaul_limited_w,
            &self.backhaul_noncoop_w,
            &self.weights,
        ] {
            v.iter().for_each(|&x| feed(x));
        }
        h
    }
}

/// Drops pairs one at a time: the transmitter uniformly in the square, its
/// receiver at a uniform distance and angle, retrying the pair until it sits
/// inside the square and clears every cross distance to earlier pairs.
fn place_pairs(
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<Point>, Vec<Point>), ScenarioError> {
    let side = config.dlen_m;
    let mut tx: Vec<Point> = Vec::with_capacity(config.num_pairs);
    let mut rx: Vec<Point> = Vec::with_capacity(config.num_pairs);
    let mut attempts = 0usize;
    while tx.len() < config.num_pairs {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(ScenarioError::Placement {
                pairs: config.num_pairs,
                dlen_m: side,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
        let t = Point {
            x: rng.random_range(0.0..=side),
            y: rng.random_range(0.0..=side),
        };
        let d = rng.random_range(LINK_DISTANCE_M.0..=LINK_DISTANCE_M.1);
        let angle = rng.random_range(0.0..2.0 * PI);
        let r = Point {
            x: t.x + d * angle.cos(),
            y: t.y + d * angle.sin(),
        };
        if !(0.0..=side).contains(&r.x) || !(0.0..=side).contains(&r.y) {
            continue;
        }
        let clear = tx.iter().zip(&rx).all(|(ot, or)| {
            t.distance(or) >= MIN_CROSS_DISTANCE_M && ot.distance(&r) >= MIN_CROSS_DISTANCE_M
        });
        if clear {
            tx.push(t);
            rx.push(r);
        }
    }
    Ok((tx, rx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = SimConfig::default();
        assert_eq!(c.tolerance, 1e-3);
        assert_eq!(c.num_antennas, 4);
        assert_eq!(c.noise_psd_dbm_hz, -174.0);
        assert_eq!(c.bandwidth_hz, 20e6);
        assert!((1.0 / c.amp_inefficiency - 0.35).abs() < 1e-15);
        assert_eq!(c.gamma_snr_db, 4.0);
        assert_eq!(c.circuit_tx_range_mw, (50.0, 200.0));
        assert_eq!(c.circuit_rx_range_mw, (200.0, 400.0));
    }

    #[test]
    fn noise_power_from_psd() {
        // 10^((-174-30)/10) * 2e7
        let expected = 10f64.powf(-20.4) * 2e7;
        let got = SimConfig::default().noise_power_w();
        assert!((got - expected).abs() < 1e-12 * expected);
        assert!((got - 7.96e-14).abs() < 0.01e-14);
    }

    #[test]
    fn path_loss_at_30m() {
        assert!((path_loss_db(30.0) - 90.1597).abs() < 1e-3);
    }

    #[test]
    fn backhaul_power_values() {
        // PL at 1 m is 38.46 dB
        assert!((backhaul_power(-38.46, 1.0, 1.0) - 1.0).abs() < 1e-12);

        let sigma2 = 7.96e-14;
        let p = backhaul_power(4.0, sigma2, 30.0);
        let by_hand = sigma2 * 10f64.powf(0.4) * 10f64.powf(9.0159245);
        assert!((p - by_hand).abs() < 1e-4 * by_hand);
        assert!((p - 2.08e-4).abs() < 0.01e-4);

        let ratio = backhaul_power(4.0, sigma2, 80.0) / backhaul_power(4.0, sigma2, 40.0);
        assert!((ratio - 2f64.powf(3.5)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_trial() {
        let c = SimConfig {
            num_pairs: 6,
            ..SimConfig::default()
        };
        let a = NetworkScenario::generate(&c, 7).unwrap();
        let b = NetworkScenario::generate(&c, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let other = NetworkScenario::generate(&c, 8).unwrap();
        assert_ne!(a.fingerprint(), other.fingerprint());
    }

    #[test]
    fn distance_constraints_hold() {
        let c = SimConfig {
            num_pairs: 10,
            ..SimConfig::default()
        };
        for trial in 0..1000 {
            let s = NetworkScenario::generate(&c, trial).unwrap();
            for k in 0..s.num_pairs() {
                let own = s.link_distance(k, k);
                assert!((30.0 - 1e-9..=60.0 + 1e-9).contains(&own), "own distance {own}");
                for j in 0..s.num_pairs() {
                    if j != k {
                        assert!(s.link_distance(j, k) >= 30.0);
                    }
                }
                assert!(s.circuit_tx_w[k] >= 0.05 && s.circuit_tx_w[k] <= 0.2);
                assert!(s.circuit_rx_w[k] >= 0.2 && s.circuit_rx_w[k] <= 0.4);
                assert!(s.backhaul_full_w[k] > 0.0 && s.backhaul_noncoop_w[k] > 0.0);
                assert!(s.backhaul_full_w[k] >= s.backhaul_noncoop_w[k]);
            }
        }
    }

    #[test]
    fn channel_power_matches_path_gain() {
        let mut rng = trial_rng(99, 0, 0);
        let d = 45.0;
        let g = path_gain(d);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| (complex_gaussian(&mut rng) * g.sqrt()).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean / g - 1.0).abs() < 0.05);
    }

    #[test]
    fn infeasible_geometry_is_reported() {
        let c = SimConfig {
            num_pairs: 2,
            dlen_m: 20.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            NetworkScenario::generate(&c, 0),
            Err(ScenarioError::Placement { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            num_pairs: 0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            amp_inefficiency: 0.5,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            weights: vec![1.0; 3],
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn toml_overrides_defaults() {
        let c = SimConfig::from_toml_str("num_pairs = 7\npmax_dbm = 20.0\n").unwrap();
        assert_eq!(c.num_pairs, 7);
        assert_eq!(c.pmax_dbm, 20.0);
        assert_eq!(c.num_antennas, 4);
        assert!(SimConfig::from_toml_str("bogus_key = 1").is_err());
    }
}
