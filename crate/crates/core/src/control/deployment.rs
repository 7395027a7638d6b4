use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ControllerConfig;
use crate::control::pid::{desired_position, pid_thrust, Measurement, MuControllerState, Sensor};
use crate::dynamics::{NetAssembly, SystemState};
use crate::error::{Error, Result};

/// Tolerance when comparing simulation time against the tick grid, s.
const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlPhase {
    Deploying,
    /// Thrusters off for the rest of the episode.
    Deactivated,
    /// Flying to the docking positions.
    Closing,
}

/// One MU at one command tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub time: f64,
    pub mu: usize,
    pub desired: Vector3<f64>,
    pub measured: Measurement,
    /// True position at the tick.
    pub position: Vector3<f64>,
    pub thrust: Vector3<f64>,
    pub fuel: f64,
}

impl ControlRecord {
    /// L2 distance between the desired and true position.
    pub fn tracking_error(&self) -> f64 {
        (self.desired - self.position).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFaultEvent {
    pub time: f64,
    pub mu: usize,
}

/// Straight-line guidance segment shared by every MU.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    start_time: f64,
    duration: f64,
    from: Vec<Vector3<f64>>,
    to: Vec<Vector3<f64>>,
}

/// Drives every MU along its ramp with sampled, noisy feedback and
/// zero-order-held thrust.
#[derive(Debug, Clone)]
pub struct DeploymentController {
    config: ControllerConfig,
    sensor: Sensor,
    rng: ChaCha8Rng,
    segment: Segment,
    phase: ControlPhase,
    mus: Vec<MuControllerState>,
    held: Vec<Vector3<f64>>,
    measurements: Vec<Measurement>,
    command_period: f64,
    sensor_period: f64,
    next_command: u64,
    next_sample: u64,
    faults: Vec<SensorFaultEvent>,
    log: Option<Vec<ControlRecord>>,
}

impl DeploymentController {
    /// Ramps start from the MU positions in `state` at activation (t = 0).
    pub fn new(
        assembly: &NetAssembly,
        state: &SystemState,
        aiming: Vec<Vector3<f64>>,
        config: &ControllerConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let n = assembly.mu_count();
        if aiming.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} aiming points, got {}",
                aiming.len()
            )));
        }
        if !(config.t_final > 0.0) || !(config.command_rate > 0.0) || !(config.sensor_rate > 0.0) {
            return Err(Error::Config("controller rates and t_final must be positive".into()));
        }
        let from: Vec<_> = (0..n).map(|j| state.mu_position(assembly, j)).collect();
        let measurements = (0..n)
            .map(|j| Measurement {
                position: from[j],
                velocity: state.mu_velocity(assembly, j),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            sensor: Sensor::from_config(config),
            rng,
            segment: Segment {
                start_time: state.time,
                duration: config.t_final,
                from,
                to: aiming,
            },
            phase: ControlPhase::Deploying,
            mus: vec![MuControllerState::default(); n],
            held: vec![Vector3::zeros(); n],
            measurements,
            command_period: 1.0 / config.command_rate,
            sensor_period: 1.0 / config.sensor_rate,
            next_command: 0,
            next_sample: 0,
            faults: Vec::new(),
            log: None,
        })
    }

    /// Keep a per-tick record of every MU.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn phase(&self) -> ControlPhase {
        self.phase
    }

    pub fn aiming_points(&self) -> &[Vector3<f64>] {
        &self.segment.to
    }

    pub fn controllers(&self) -> &[MuControllerState] {
        &self.mus
    }

    pub fn fuel_per_mu(&self) -> Vec<f64> {
        self.mus.iter().map(|m| m.fuel_used).collect()
    }

    pub fn total_fuel(&self) -> f64 {
        self.mus.iter().map(|m| m.fuel_used).sum()
    }

    pub fn faults(&self) -> &[SensorFaultEvent] {
        &self.faults
    }

    pub fn log(&self) -> Option<&[ControlRecord]> {
        self.log.as_deref()
    }

    pub fn take_log(&mut self) -> Vec<ControlRecord> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Desired position of MU `j` at time `t`.
    pub fn desired(&self, j: usize, t: f64) -> Vector3<f64> {
        let s = &self.segment;
        // Duration is validated positive, so the ramp cannot fail.
        desired_position(t - s.start_time, &s.from[j], &s.to[j], s.duration)
            .unwrap_or(s.to[j])
    }

    /// Switches every thruster off for the rest of the episode.
    pub fn deactivate(&mut self) {
        self.phase = ControlPhase::Deactivated;
        for m in &mut self.mus {
            m.active = false;
            m.last_command = Vector3::zeros();
        }
        self.held.iter_mut().for_each(|h| *h = Vector3::zeros());
    }

    /// New ramp from the current MU positions to `targets` over `duration`.
    pub fn retarget(
        &mut self,
        assembly: &NetAssembly,
        state: &SystemState,
        targets: Vec<Vector3<f64>>,
        duration: f64,
    ) -> Result<()> {
        if targets.len() != self.mus.len() || !(duration > 0.0) {
            return Err(Error::InvalidInput(
                "retarget needs one target per MU and a positive duration".into(),
            ));
        }
        self.segment = Segment {
            start_time: state.time,
            duration,
            from: (0..self.mus.len()).map(|j| state.mu_position(assembly, j)).collect(),
            to: targets,
        };
        if self.config.reset_integral_on_retarget {
            self.mus.iter_mut().for_each(|m| m.integral = Vector3::zeros());
        }
        self.phase = ControlPhase::Closing;
        Ok(())
    }

    /// Thrust to apply over the coming integration step.
    ///
    /// Sensor samples and commands are refreshed when `state.time` reaches
    /// the next point of their grids; otherwise the held values are returned.
    pub fn thrusts(&mut self, assembly: &NetAssembly, state: &SystemState) -> &[Vector3<f64>] {
        let t = state.time;
        if t + TICK_EPS >= self.next_sample as f64 * self.sensor_period {
            for j in 0..self.mus.len() {
                self.measurements[j] = self.sensor.sense(
                    &state.mu_position(assembly, j),
                    &state.mu_velocity(assembly, j),
                    &mut self.rng,
                );
            }
            while t + TICK_EPS >= self.next_sample as f64 * self.sensor_period {
                self.next_sample += 1;
            }
        }
        if t + TICK_EPS >= self.next_command as f64 * self.command_period {
            let tick_time = self.next_command as f64 * self.command_period;
            while t + TICK_EPS >= self.next_command as f64 * self.command_period {
                self.next_command += 1;
            }
            self.command_tick(assembly, state, tick_time);
        }
        &self.held
    }

    fn command_tick(&mut self, assembly: &NetAssembly, state: &SystemState, tick_time: f64) {
        for j in 0..self.mus.len() {
            let desired = self.desired(j, tick_time);
            let measured = self.measurements[j];
            let thrust = match pid_thrust(
                &mut self.mus[j],
                &measured,
                &desired,
                self.command_period,
                &self.config,
            ) {
                Ok(u) => u,
                Err(_) => {
                    self.faults.push(SensorFaultEvent {
                        time: tick_time,
                        mu: j,
                    });
                    Vector3::zeros()
                }
            };
            self.held[j] = thrust;
            if let Some(log) = self.log.as_mut() {
                log.push(ControlRecord {
                    time: tick_time,
                    mu: j,
                    desired,
                    measured,
                    position: state.mu_position(assembly, j),
                    thrust,
                    fuel: self.mus[j].fuel_used,
                });
            }
        }
    }
}
