//! Run configuration.
//!
//! Every subcommand reads the same TOML document. All keys are optional;
//! missing keys take the defaults below. Unknown keys are rejected so typos
//! surface as configuration errors instead of silently using defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable consulted for the config path when `--config` is absent.
pub const CONFIG_ENV: &str = "TETHERNET_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Four corner units; the mouth is closed by a winch-driven thread.
    FourMu,
    /// Four corner plus four side-midpoint units; the mouth is closed by docking.
    EightMu,
}

impl Variant {
    pub fn mu_count(self) -> usize {
        match self {
            Variant::FourMu => 4,
            Variant::EightMu => 8,
        }
    }

    /// Maximum number of locked pairs an ideal capture reaches.
    pub fn max_locked_pairs(self) -> usize {
        match self {
            Variant::FourMu => 12,
            Variant::EightMu => 8,
        }
    }

    /// Minimum number of locked pairs for a successful capture.
    pub fn locked_pair_threshold(self) -> usize {
        match self {
            Variant::FourMu => 8,
            Variant::EightMu => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FourMu => "four-mu",
            Variant::EightMu => "eight-mu",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four-mu" | "4" | "four" => Ok(Variant::FourMu),
            "eight-mu" | "8" | "eight" => Ok(Variant::EightMu),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub variant: Variant,
    pub seed: u64,
    pub net: NetConfig,
    pub tether: TetherConfig,
    pub chaser: ChaserConfig,
    pub debris: DebrisConfig,
    pub contact: ContactConfig,
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub capture: CaptureConfig,
    pub surrogate: SurrogateConfig,
    pub policy: PolicyConfig,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            variant: Variant::FourMu,
            seed: 0,
            net: NetConfig::default(),
            tether: TetherConfig::default(),
            chaser: ChaserConfig::default(),
            debris: DebrisConfig::default(),
            contact: ContactConfig::default(),
            sim: SimConfig::default(),
            controller: ControllerConfig::default(),
            capture: CaptureConfig::default(),
            surrogate: SurrogateConfig::default(),
            policy: PolicyConfig::default(),
            run: RunConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Nodes per side of the square mesh.
    pub mesh: usize,
    /// Side length of the flat net, m.
    pub side_length: f64,
    /// Total mass of all net nodes, kg.
    pub net_mass: f64,
    /// Per-link axial stiffness, N/m.
    pub stiffness: f64,
    /// Per-link axial damping, N s/m.
    pub damping: f64,
    /// Length of the thread between each MU and its attachment node, m.
    pub thread_length: f64,
    pub thread_stiffness: f64,
    pub thread_damping: f64,
    pub mu_mass: f64,
    /// MU box dimensions, m.
    pub mu_size: [f64; 3],
    /// Side of the stowed (folded) net as a fraction of the flat side.
    pub stowed_fraction: f64,
    /// Gap between the chaser face and the stowed net, m.
    pub stowed_gap: f64,
    /// Contact radius of a net node, m.
    pub node_radius: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            mesh: 23,
            side_length: 20.8,
            net_mass: 2.0,
            stiffness: 2000.0,
            damping: 0.5,
            thread_length: 2.5,
            thread_stiffness: 2000.0,
            thread_damping: 0.5,
            mu_mass: 2.5,
            mu_size: [0.1, 0.1, 0.2],
            stowed_fraction: 0.1,
            stowed_gap: 0.2,
            node_radius: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TetherConfig {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for TetherConfig {
    fn default() -> Self {
        Self {
            stiffness: 2000.0,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ChaserConfig {
    pub mass: f64,
    pub side_length: f64,
}

impl Default for ChaserConfig {
    fn default() -> Self {
        Self {
            mass: 1600.0,
            side_length: 1.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DebrisConfig {
    pub mass: f64,
    /// Capsule radius, m.
    pub radius: f64,
    /// Tip-to-tip capsule length, m.
    pub length: f64,
    /// Unit vector of the long axis in the inertial frame.
    pub axis: [f64; 3],
    /// Initial spin rate about the long axis, rad/s.
    pub spin_rate: f64,
    /// Debris centre of mass used by `simulate` when no scenario is given, m.
    pub position: [f64; 3],
}

impl Default for DebrisConfig {
    fn default() -> Self {
        Self {
            mass: 9000.0,
            radius: 1.95,
            length: 10.4,
            axis: [1.0, 0.0, 0.0],
            spin_rate: 0.0,
            position: [0.0, 0.0, -50.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub normal_stiffness: f64,
    pub normal_damping: f64,
    pub friction_coefficient: f64,
    pub friction_regularization_velocity: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            normal_stiffness: 2.0e4,
            normal_damping: 1.0,
            friction_coefficient: 0.3,
            friction_regularization_velocity: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Base integration step, s.
    pub dt: f64,
    /// Steps per base step while any body is in (or near) contact and during
    /// the whole capture phase. `0` derives the count from contact stiffness
    /// and node mass.
    pub capture_substeps: usize,
    /// Clearance below which a body counts as near contact, m.
    pub contact_margin: f64,
    /// Deployment is abandoned (no trigger) after this time, s.
    pub max_deploy_time: f64,
    /// Interval between trajectory-log records, s.
    pub log_interval: f64,
    /// Interval between CQI samples in the capture phase, s.
    pub cqi_interval: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0e-3,
            capture_substeps: 0,
            contact_margin: 0.05,
            max_deploy_time: 40.0,
            log_interval: 0.5,
            cqi_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Per-axis thrust bound, N.
    pub thrust_limit_per_axis: f64,
    pub command_rate: f64,
    pub sensor_rate: f64,
    /// 3-sigma bound of position noise, m.
    pub pos_noise_3sigma: f64,
    /// 3-sigma bound of velocity noise, m/s.
    pub vel_noise_3sigma: f64,
    pub isp: f64,
    pub g0: f64,
    /// Deployment duration, s.
    pub t_final: f64,
    /// Clear the integral accumulator when an MU is retargeted for docking.
    pub reset_integral_on_retarget: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kp: 10.0,
            ki: 6.0,
            kd: 6.0,
            thrust_limit_per_axis: 5.1,
            command_rate: 20.0,
            sensor_rate: 20.0,
            pos_noise_3sigma: 0.1,
            vel_noise_3sigma: 0.1,
            isp: 60.0,
            g0: 9.81,
            t_final: 25.0,
            reset_integral_on_retarget: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureConfig {
    /// Reference debris volume for the CQI, m^3.
    pub target_volume: f64,
    /// Reference debris surface for the CQI, m^2.
    pub target_surface: f64,
    /// Characteristic length for the CQI, m.
    pub characteristic_length: f64,
    /// Net-COM to debris-COM distance that starts closing, m.
    pub trigger_distance: f64,
    /// Capture phase duration after the trigger, s.
    pub settle_time: f64,
    pub cqi_threshold: f64,
    /// Reel-in speed of each of the four closing winches, m/s.
    pub reel_rate: f64,
    pub closing_thread_stiffness: f64,
    pub closing_thread_damping: f64,
    /// Shortest total closing-thread rest length, m.
    pub closing_min_length: f64,
    /// Number of closing-loop nodes threaded by the winch line.
    pub closing_node_count: usize,
    /// Adjacent closing nodes closer than this count as locked, m.
    pub lock_distance: f64,
    /// MUs closer than this engage a docking joint, m.
    pub dock_distance: f64,
    pub joint_stiffness: f64,
    pub joint_damping: f64,
    /// Radius of the docking ring, m.
    pub closing_ring_radius: f64,
    /// Distance of the docking ring behind the debris COM along the
    /// approach axis, m. `None` uses the debris extent along that axis.
    pub closing_ring_offset: Option<f64>,
    /// Duration of the ramp from the trigger position to the docking point, s.
    pub closing_time: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            target_volume: 159.9,
            target_surface: 59.9,
            characteristic_length: 1.95,
            trigger_distance: 2.5,
            settle_time: 15.0,
            cqi_threshold: 2.5,
            reel_rate: 2.0,
            closing_thread_stiffness: 2000.0,
            closing_thread_damping: 0.5,
            closing_min_length: 0.0,
            closing_node_count: 12,
            lock_distance: 0.05,
            dock_distance: 0.5,
            joint_stiffness: 200.0,
            joint_damping: 20.0,
            closing_ring_radius: 0.5,
            closing_ring_offset: None,
            closing_time: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuFeatures {
    /// No MU states; the corner nodes on the outer loop stand in for them.
    None,
    /// Only the side-midpoint MUs (indices 4..8) of the eight-unit net.
    Side,
    All,
}

/// Scale on which the CQI output is regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CqiTarget {
    #[default]
    Linear,
    /// `ln(1 + CQI)`; compresses the long tail of failed captures.
    Log1p,
}

impl CqiTarget {
    pub fn forward(self, cqi: f64) -> f64 {
        match self {
            Self::Linear => cqi,
            Self::Log1p => cqi.max(0.0).ln_1p(),
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            Self::Linear => v,
            Self::Log1p => v.exp_m1(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub hidden: Vec<usize>,
    /// Nodes on the three feature loops. `None` scales 165 by mesh size.
    pub feature_node_count: Option<usize>,
    /// MU states appended to the features; `None` picks per variant.
    pub mu_features: Option<MuFeatures>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on the weight matrices, added to the per-sample loss.
    pub weight_decay: f64,
    pub cqi_target: CqiTarget,
    /// Validation residuals above this true CQI are left out of the error model.
    pub error_model_cqi_cutoff: f64,
    /// Feed a short trailing window of snapshots instead of one.
    pub recurrent_window: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![500, 300],
            feature_node_count: None,
            mu_features: None,
            learning_rate: 1.0e-5,
            epochs: 500,
            batch_size: 32,
            weight_decay: 0.0,
            cqi_target: CqiTarget::Linear,
            error_model_cqi_cutoff: 20.0,
            recurrent_window: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureMode {
    SurrogateCapture,
    FullCapture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundPolicy {
    /// Out-of-range offsets are clipped to the action box.
    Clip,
    /// Out-of-range offsets are rejected.
    Reject,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub epochs_per_batch: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    /// Initial exploration standard deviation of the offsets, m.
    pub init_action_std: f64,
    /// Fuel-reward weight; `None` picks 1.0 (four units) or 1.5 (eight units).
    pub fuel_weight: Option<f64>,
    /// Reference total fuel, kg; `None` calibrates from nominal episodes.
    pub max_fuel: Option<f64>,
    pub calibration_episodes: usize,
    pub calibration_percentile: f64,
    pub mode: CaptureMode,
    pub training_bounds: BoundPolicy,
    pub evaluation_bounds: BoundPolicy,
    /// Use the printed nominal table (with its duplicated coordinates)
    /// instead of the symmetric completion.
    pub raw_nominal_table: bool,
    /// Sentinel settled CQI for episodes where closing never triggered.
    pub no_trigger_cqi: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            iterations: 355,
            episodes_per_iteration: 32,
            minibatch_size: 64,
            learning_rate: 1.0e-3,
            clip_ratio: 0.2,
            epochs_per_batch: 4,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            init_action_std: 1.0,
            fuel_weight: None,
            max_fuel: None,
            calibration_episodes: 100,
            calibration_percentile: 95.0,
            mode: CaptureMode::SurrogateCapture,
            training_bounds: BoundPolicy::Clip,
            evaluation_bounds: BoundPolicy::Reject,
            raw_nominal_table: false,
            no_trigger_cqi: 50.0,
        }
    }
}

impl PolicyConfig {
    pub fn fuel_weight_for(&self, variant: Variant) -> f64 {
        self.fuel_weight.unwrap_or(match variant {
            Variant::FourMu => 1.0,
            Variant::EightMu => 1.5,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Episodes dispatched per wave to the worker pool.
    pub workers: usize,
    /// Worker threads; `0` uses all available cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workers: 32,
            threads: 0,
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {value}")))
    }
}

fn non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be non-negative, got {value}"
        )))
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn debris_position(&self) -> Vector3<f64> {
        Vector3::from(self.debris.position)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.net;
        if n.mesh < 3 {
            return Err(Error::Config(format!(
                "mesh resolution must be at least 3x3, got {0}x{0}",
                n.mesh
            )));
        }
        positive("net.side_length", n.side_length)?;
        positive("net.net_mass", n.net_mass)?;
        positive("net.stiffness", n.stiffness)?;
        non_negative("net.damping", n.damping)?;
        positive("net.thread_length", n.thread_length)?;
        positive("net.thread_stiffness", n.thread_stiffness)?;
        non_negative("net.thread_damping", n.thread_damping)?;
        positive("net.mu_mass", n.mu_mass)?;
        for (i, d) in n.mu_size.iter().enumerate() {
            positive(&format!("net.mu_size[{i}]"), *d)?;
        }
        positive("net.stowed_fraction", n.stowed_fraction)?;
        non_negative("net.stowed_gap", n.stowed_gap)?;
        non_negative("net.node_radius", n.node_radius)?;

        positive("tether.stiffness", self.tether.stiffness)?;
        non_negative("tether.damping", self.tether.damping)?;
        positive("chaser.mass", self.chaser.mass)?;
        positive("chaser.side_length", self.chaser.side_length)?;

        let d = &self.debris;
        positive("debris.mass", d.mass)?;
        positive("debris.radius", d.radius)?;
        positive("debris.length", d.length)?;
        if d.length < 2.0 * d.radius {
            return Err(Error::Config(
                "debris.length must be at least twice debris.radius".into(),
            ));
        }
        let axis = Vector3::from(d.axis);
        if !(axis.norm() > 1e-9) {
            return Err(Error::Config("debris.axis must be non-zero".into()));
        }

        let c = &self.contact;
        positive("contact.normal_stiffness", c.normal_stiffness)?;
        positive("contact.normal_damping", c.normal_damping)?;
        positive("contact.friction_coefficient", c.friction_coefficient)?;
        if c.friction_coefficient > 2.0 {
            return Err(Error::Config(
                "contact.friction_coefficient must not exceed 2".into(),
            ));
        }
        positive(
            "contact.friction_regularization_velocity",
            c.friction_regularization_velocity,
        )?;

        positive("sim.dt", self.sim.dt)?;
        non_negative("sim.contact_margin", self.sim.contact_margin)?;
        positive("sim.max_deploy_time", self.sim.max_deploy_time)?;
        positive("sim.log_interval", self.sim.log_interval)?;
        positive("sim.cqi_interval", self.sim.cqi_interval)?;

        let k = &self.controller;
        positive("controller.command_rate", k.command_rate)?;
        positive("controller.sensor_rate", k.sensor_rate)?;
        positive("controller.thrust_limit_per_axis", k.thrust_limit_per_axis)?;
        non_negative("controller.pos_noise_3sigma", k.pos_noise_3sigma)?;
        non_negative("controller.vel_noise_3sigma", k.vel_noise_3sigma)?;
        positive("controller.isp", k.isp)?;
        positive("controller.g0", k.g0)?;
        positive("controller.t_final", k.t_final)?;
        for (name, gain) in [("kp", k.kp), ("ki", k.ki), ("kd", k.kd)] {
            non_negative(&format!("controller.{name}"), gain)?;
        }
        let ticks = 1.0 / (k.command_rate * self.sim.dt);
        if (ticks - ticks.round()).abs() > 1e-6 {
            return Err(Error::Config(
                "sim.dt must divide the command period evenly".into(),
            ));
        }

        let cap = &self.capture;
        positive("capture.target_volume", cap.target_volume)?;
        positive("capture.target_surface", cap.target_surface)?;
        positive("capture.characteristic_length", cap.characteristic_length)?;
        positive("capture.trigger_distance", cap.trigger_distance)?;
        positive("capture.settle_time", cap.settle_time)?;
        non_negative("capture.reel_rate", cap.reel_rate)?;
        positive("capture.closing_thread_stiffness", cap.closing_thread_stiffness)?;
        non_negative("capture.closing_min_length", cap.closing_min_length)?;
        if cap.closing_node_count < 3 {
            return Err(Error::Config(
                "capture.closing_node_count must be at least 3".into(),
            ));
        }
        positive("capture.lock_distance", cap.lock_distance)?;
        positive("capture.dock_distance", cap.dock_distance)?;
        positive("capture.closing_ring_radius", cap.closing_ring_radius)?;
        positive("capture.closing_time", cap.closing_time)?;

        let s = &self.surrogate;
        if s.hidden.is_empty() || s.hidden.contains(&0) {
            return Err(Error::Config("surrogate.hidden must list positive widths".into()));
        }
        positive("surrogate.learning_rate", s.learning_rate)?;
        if !(s.weight_decay.is_finite() && s.weight_decay >= 0.0) {
            return Err(Error::Config("surrogate.weight_decay must be finite and non-negative".into()));
        }
        if s.batch_size == 0 || s.recurrent_window == 0 {
            return Err(Error::Config(
                "surrogate.batch_size and surrogate.recurrent_window must be positive".into(),
            ));
        }

        let p = &self.policy;
        if p.episodes_per_iteration == 0 || p.minibatch_size == 0 || p.epochs_per_batch == 0 {
            return Err(Error::Config("policy batch sizes must be positive".into()));
        }
        positive("policy.learning_rate", p.learning_rate)?;
        positive("policy.clip_ratio", p.clip_ratio)?;
        positive("policy.init_action_std", p.init_action_std)?;
        if let Some(w) = p.fuel_weight {
            positive("policy.fuel_weight", w)?;
        }
        if let Some(m) = p.max_fuel {
            positive("policy.max_fuel", m)?;
        }
        if !(0.0..=100.0).contains(&p.calibration_percentile) {
            return Err(Error::Config(
                "policy.calibration_percentile must lie in [0, 100]".into(),
            ));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("run.workers must be positive".into()));
        }
        Ok(())
    }
}
