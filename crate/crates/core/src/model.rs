//! Shared domain types and the simulation configuration schema.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for scalar comparisons across the crate.
pub const EPS: f64 = 1e-9;

/// Unique network-wide UAV identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 3D vector. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Scales the vector down so its magnitude is at most `max`, keeping direction.
    pub fn clamp_norm(self, max: f64) -> Vec3 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    /// Cosine of the angle between two vectors; `None` if either is zero.
    pub fn cos_angle(self, o: Vec3) -> Option<f64> {
        let denom = self.norm() * o.norm();
        if denom == 0.0 {
            None
        } else {
            Some((self.dot(o) / denom).clamp(-1.0, 1.0))
        }
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => &mut self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Kinematic and energy state of one UAV at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub id: NodeId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    /// Residual energy in joules.
    pub energy: f64,
}

impl UavState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn accel_magnitude(&self) -> f64 {
        self.acceleration.norm()
    }
}

/// Axis-aligned box the UAVs fly in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub min: Vec3,
    pub max: Vec3,
}

impl Arena {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p.component(a) >= self.min.component(a) && p.component(a) <= self.max.component(a))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// Coefficients of the mobility-energy difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MedWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for MedWeights {
    fn default() -> Self {
        MedWeights { c1: 0.4, c2: 0.3, c3: 0.3 }
    }
}

/// Coefficients of the overall stability factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsfWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for OsfWeights {
    fn default() -> Self {
        OsfWeights { alpha: 0.25, beta: 0.15, gamma: 0.25, delta: 0.20, epsilon: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MobilityModel {
    GaussMarkov,
    RandomWaypoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilitySpec {
    pub model: MobilityModel,
    /// m/s
    pub max_speed: f64,
    /// m/s²
    pub max_accel: f64,
    /// Per-tick memory of the Gauss-Markov process, in [0, 1].
    pub gm_alpha: f64,
    /// Speed the Gauss-Markov process reverts to, m/s.
    pub gm_mean_speed: f64,
    /// Standard deviation of the Gauss-Markov velocity noise, m/s.
    pub gm_sigma: f64,
    /// Random-waypoint pause at each waypoint, s.
    pub rwp_pause: f64,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        MobilitySpec {
            model: MobilityModel::GaussMarkov,
            max_speed: 60.0,
            max_accel: 10.0,
            gm_alpha: 0.98,
            gm_mean_speed: 30.0,
            gm_sigma: 10.0,
            rwp_pause: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    /// s
    pub per_hop_latency: f64,
    pub loss_prob: f64,
    pub max_retransmissions: u32,
    pub beacon_bits: f64,
    pub data_bits: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            per_hop_latency: 0.002,
            loss_prob: 0.05,
            max_retransmissions: 3,
            beacon_bits: 400.0,
            data_bits: 256.0,
        }
    }
}

/// First-order radio energy model plus a constant idle drain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyModel {
    /// J/bit
    pub e_elec: f64,
    /// J/bit/m²
    pub e_amp: f64,
    /// W
    pub idle_power: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { e_elec: 5e-8, e_amp: 1e-10, idle_power: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub flows: u32,
    /// s
    pub packet_interval: f64,
    pub payload_bits: f64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec { flows: 20, packet_interval: 1.0, payload_bits: 4096.0 }
    }
}

/// Ground station placement and availability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsConfig {
    pub position: Vec3,
    /// m
    pub range: f64,
    /// Fraction of each duty period the GS is available, in [0, 1].
    pub duty_cycle: f64,
    /// Length of one on/off period, s.
    pub duty_period: f64,
    /// s
    pub check_interval: f64,
}

impl Default for GsConfig {
    fn default() -> Self {
        GsConfig {
            position: Vec3::new(500.0, 500.0, 0.0),
            range: 500.0,
            duty_cycle: 0.5,
            duty_period: 60.0,
            check_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineParams {
    /// Links shorter than this are link-unsafe for PICA-lite, m.
    pub safe_distance: f64,
    pub pica_mobility_weight: f64,
    pub pica_energy_weight: f64,
    pub osca_degree_weight: f64,
    pub osca_energy_weight: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            safe_distance: 30.0,
            pica_mobility_weight: 0.5,
            pica_energy_weight: 0.5,
            osca_degree_weight: 0.5,
            osca_energy_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Sefc,
    PicaLite,
    OscaLite,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Sefc, Algorithm::PicaLite, Algorithm::OscaLite];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sefc => "SEFC",
            Algorithm::PicaLite => "PICA_LITE",
            Algorithm::OscaLite => "OSCA_LITE",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SEFC" => Ok(Algorithm::Sefc),
            "PICA_LITE" => Ok(Algorithm::PicaLite),
            "OSCA_LITE" => Ok(Algorithm::OscaLite),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

/// Every knob of a run. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_uavs: u32,
    pub arena: Arena,
    /// s
    pub sim_duration: f64,
    /// s
    pub tick_dt: f64,
    /// m
    pub comm_range: f64,
    pub med_weights: MedWeights,
    pub osf_weights: OsfWeights,
    pub med_threshold: f64,
    pub direction_cos_threshold: f64,
    pub degree_ref: f64,
    /// s
    pub clustering_interval: f64,
    pub mobility: MobilitySpec,
    pub radio: RadioConfig,
    pub energy_model: EnergyModel,
    pub traffic: TrafficSpec,
    pub gs: GsConfig,
    pub handover_margin: f64,
    pub recluster_threshold: f64,
    pub baselines: BaselineParams,
    /// Mean initial battery energy, J.
    pub initial_energy: f64,
    /// Initial energies are drawn uniformly from `initial_energy * (1 ± jitter)`.
    pub initial_energy_jitter: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_uavs: 100,
            arena: Arena { min: Vec3::ZERO, max: Vec3::new(1000.0, 1000.0, 200.0) },
            sim_duration: 300.0,
            tick_dt: 0.1,
            comm_range: 250.0,
            med_weights: MedWeights::default(),
            osf_weights: OsfWeights::default(),
            med_threshold: 0.5,
            direction_cos_threshold: 0.707,
            degree_ref: 10.0,
            clustering_interval: 5.0,
            mobility: MobilitySpec::default(),
            radio: RadioConfig::default(),
            energy_model: EnergyModel::default(),
            traffic: TrafficSpec::default(),
            gs: GsConfig::default(),
            handover_margin: 0.10,
            recluster_threshold: 0.1,
            baselines: BaselineParams::default(),
            initial_energy: 100.0,
            initial_energy_jitter: 0.1,
            algorithm: Algorithm::Sefc,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("at least one UAV required")]
    NoUavs,
    #[error("{field}: weights must sum to 1 (sum {sum})")]
    WeightSum { field: &'static str, sum: f64 },
    #[error("{field}: weight {value} must be non-negative")]
    NegativeWeight { field: &'static str, value: f64 },
    #[error("{field} = {value} is out of range (expected {expected})")]
    OutOfRange { field: &'static str, value: f64, expected: &'static str },
    #[error("arena: min {min:?} must be strictly below max {max:?} on every axis")]
    DegenerateArena { min: Vec3, max: Vec3 },
    #[error("{field} = {value} must be at least tick_dt = {tick_dt}")]
    BelowTick { field: &'static str, value: f64, tick_dt: f64 },
}

fn check(field: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, value, expected })
    }
}

fn check_simplex(field: &'static str, weights: &[f64]) -> Result<(), ConfigError> {
    if let Some(&value) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(ConfigError::NegativeWeight { field, value });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > EPS {
        return Err(ConfigError::WeightSum { field, sum });
    }
    Ok(())
}

impl MedWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_simplex("med_weights", &[self.c1, self.c2, self.c3])
    }
}

impl OsfWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_simplex("osf_weights", &[self.alpha, self.beta, self.gamma, self.delta, self.epsilon])
    }
}

impl SimConfig {
    /// Checks every invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_uavs == 0 {
            return Err(ConfigError::NoUavs);
        }
        let a = &self.arena;
        if !a.min.is_finite() || !a.max.is_finite() || (0..3).any(|i| a.min.component(i) >= a.max.component(i)) {
            return Err(ConfigError::DegenerateArena { min: a.min, max: a.max });
        }
        check("sim_duration", self.sim_duration, self.sim_duration >= 0.0, ">= 0")?;
        check("tick_dt", self.tick_dt, self.tick_dt > 0.0, "> 0")?;
        check("comm_range", self.comm_range, self.comm_range > 0.0, "> 0")?;
        self.med_weights.validate()?;
        self.osf_weights.validate()?;
        check("med_threshold", self.med_threshold, self.med_threshold > 0.0 && self.med_threshold <= 1.0, "in (0, 1]")?;
        check(
            "direction_cos_threshold",
            self.direction_cos_threshold,
            (-1.0..=1.0).contains(&self.direction_cos_threshold),
            "in [-1, 1]",
        )?;
        check("degree_ref", self.degree_ref, self.degree_ref >= 1.0, ">= 1")?;
        self.check_interval("clustering_interval", self.clustering_interval)?;

        let m = &self.mobility;
        check("mobility.max_speed", m.max_speed, m.max_speed > 0.0, "> 0")?;
        check("mobility.max_accel", m.max_accel, m.max_accel > 0.0, "> 0")?;
        check("mobility.gm_alpha", m.gm_alpha, (0.0..=1.0).contains(&m.gm_alpha), "in [0, 1]")?;
        check("mobility.gm_mean_speed", m.gm_mean_speed, m.gm_mean_speed >= 0.0, ">= 0")?;
        check("mobility.gm_sigma", m.gm_sigma, m.gm_sigma >= 0.0, ">= 0")?;
        check("mobility.rwp_pause", m.rwp_pause, m.rwp_pause >= 0.0, ">= 0")?;

        let r = &self.radio;
        check("radio.per_hop_latency", r.per_hop_latency, r.per_hop_latency >= 0.0, ">= 0")?;
        check("radio.loss_prob", r.loss_prob, (0.0..1.0).contains(&r.loss_prob), "in [0, 1)")?;
        check("radio.beacon_bits", r.beacon_bits, r.beacon_bits >= 0.0, ">= 0")?;
        check("radio.data_bits", r.data_bits, r.data_bits >= 0.0, ">= 0")?;

        let e = &self.energy_model;
        check("energy_model.e_elec", e.e_elec, e.e_elec >= 0.0, ">= 0")?;
        check("energy_model.e_amp", e.e_amp, e.e_amp >= 0.0, ">= 0")?;
        check("energy_model.idle_power", e.idle_power, e.idle_power >= 0.0, ">= 0")?;

        self.check_interval("traffic.packet_interval", self.traffic.packet_interval)?;
        check("traffic.payload_bits", self.traffic.payload_bits, self.traffic.payload_bits >= 0.0, ">= 0")?;

        let g = &self.gs;
        if !g.position.is_finite() {
            return Err(ConfigError::OutOfRange { field: "gs.position", value: f64::NAN, expected: "finite" });
        }
        check("gs.range", g.range, g.range > 0.0, "> 0")?;
        check("gs.duty_cycle", g.duty_cycle, (0.0..=1.0).contains(&g.duty_cycle), "in [0, 1]")?;
        check("gs.duty_period", g.duty_period, g.duty_period > 0.0, "> 0")?;
        self.check_interval("gs.check_interval", g.check_interval)?;

        check("handover_margin", self.handover_margin, self.handover_margin >= 0.0, ">= 0")?;
        check("recluster_threshold", self.recluster_threshold, self.recluster_threshold >= 0.0, ">= 0")?;

        let b = &self.baselines;
        check("baselines.safe_distance", b.safe_distance, b.safe_distance >= 0.0, ">= 0")?;
        check_simplex("baselines.pica_weights", &[b.pica_mobility_weight, b.pica_energy_weight])?;
        check_simplex("baselines.osca_weights", &[b.osca_degree_weight, b.osca_energy_weight])?;

        check("initial_energy", self.initial_energy, self.initial_energy > 0.0, "> 0")?;
        check(
            "initial_energy_jitter",
            self.initial_energy_jitter,
            (0.0..1.0).contains(&self.initial_energy_jitter),
            "in [0, 1)",
        )?;
        Ok(())
    }

    fn check_interval(&self, field: &'static str, value: f64) -> Result<(), ConfigError> {
        if !value.is_finite() || value < self.tick_dt {
            return Err(ConfigError::BelowTick { field, value, tick_dt: self.tick_dt });
        }
        Ok(())
    }

    /// Number of whole ticks in an interval given in seconds (at least one).
    pub fn ticks(&self, seconds: f64) -> u64 {
        ((seconds / self.tick_dt).round() as u64).max(1)
    }

    pub fn total_ticks(&self) -> u64 {
        (self.sim_duration / self.tick_dt).round() as u64
    }
}

/// Returns the config iff every invariant holds.
pub fn validate_config(raw: SimConfig) -> Result<SimConfig, ConfigError> {
    raw.validate()?;
    Ok(raw)
}
