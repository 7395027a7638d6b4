//! One capture episode: PID-guided deployment up to the closing trigger,
//! then (optionally) the simulated closing phase up to the settle time.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capture::{
    closing_positions, cqi_of_state, docking_params, engage_docking_joints, engage_winch,
    locked_pairs, mouth_area_of_state, CaptureLog, CqiSample, TargetGeometry, TriggerLatch,
};
use crate::config::{Config, Variant};
use crate::control::{ControlRecord, DeploymentController};
use crate::dynamics::{build_assembly, Dynamics, NetAssembly, SystemState, WinchMode};
use crate::error::Result;

/// Position and velocity of one body at one log sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub time: f64,
    pub body: usize,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LogOptions {
    /// Record every body every `log_interval`.
    pub trajectory: bool,
    /// Record every MU at every command tick.
    pub control: bool,
}

/// Built assembly plus everything needed to run episodes on it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: Config,
    pub assembly: NetAssembly,
    pub initial: SystemState,
    pub target: TargetGeometry,
    capture_substeps: usize,
}

/// State of an episode after deployment.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub state: SystemState,
    pub controller: DeploymentController,
    pub trigger: TriggerLatch,
    pub mouth_area_at_trigger: f64,
    /// States at the last few sensor ticks, oldest first, ending at the trigger.
    pub history: VecDeque<SystemState>,
    /// Net-COM to debris-COM distance at every sensor tick.
    pub com_distance: Vec<(f64, f64)>,
    pub trajectory: Vec<TrajectoryRecord>,
    pub diverged: Option<String>,
    pub steps: u64,
}

impl Deployment {
    pub fn triggered(&self) -> bool {
        self.trigger.fired()
    }

    /// State at the trigger instant, if the trigger fired.
    pub fn snapshot(&self) -> Option<&SystemState> {
        self.triggered().then_some(&self.state)
    }

    pub fn control_log(&self) -> &[ControlRecord] {
        self.controller.log().unwrap_or(&[])
    }
}

impl Simulation {
    pub fn new(config: &Config) -> Result<Self> {
        let (assembly, initial) = build_assembly(config)?;
        let target = TargetGeometry::from_config(&config.capture)?;
        let capture_substeps = match config.sim.capture_substeps {
            0 => auto_substeps(&assembly, config.sim.dt),
            n => n,
        };
        Ok(Self {
            config: config.clone(),
            assembly,
            initial,
            target,
            capture_substeps,
        })
    }

    pub fn variant(&self) -> Variant {
        self.assembly.variant
    }

    /// Integration steps per base step while in contact.
    pub fn capture_substeps(&self) -> usize {
        self.capture_substeps
    }

    /// Flies the MUs towards `aiming` until the closing trigger fires or the
    /// deployment time runs out.
    pub fn deploy(&self, aiming: Vec<Vector3<f64>>, rng: ChaCha8Rng, logs: LogOptions) -> Result<Deployment> {
        let cfg = &self.config;
        let mut controller =
            DeploymentController::new(&self.assembly, &self.initial, aiming, &cfg.controller, rng)?;
        if logs.control {
            controller = controller.with_log();
        }
        let mut deployment = Deployment {
            state: self.initial.clone(),
            controller,
            trigger: TriggerLatch::new(cfg.capture.trigger_distance),
            mouth_area_at_trigger: 0.0,
            history: VecDeque::new(),
            com_distance: Vec::new(),
            trajectory: Vec::new(),
            diverged: None,
            steps: 0,
        };
        let dt = cfg.sim.dt;
        let steps_per_sample = (1.0 / (cfg.controller.sensor_rate * dt)).round().max(1.0) as u64;
        let steps_per_log = (cfg.sim.log_interval / dt).round().max(1.0) as u64;
        let max_steps = (cfg.sim.max_deploy_time / dt).round() as u64;
        let window = cfg.surrogate.recurrent_window.max(1);
        let mut dynamics = Dynamics::new(&self.assembly);
        let mut near_contact = false;

        for k in 0..=max_steps {
            let d = &mut deployment;
            if logs.trajectory && k % steps_per_log == 0 {
                push_trajectory(&mut d.trajectory, &d.state);
            }
            if k % steps_per_sample == 0 {
                let gap = (d.state.net_com(&self.assembly) - d.state.debris_com(&self.assembly)).norm();
                d.com_distance.push((d.state.time, gap));
                if d.history.len() == window {
                    d.history.pop_front();
                }
                d.history.push_back(d.state.clone());
                if d.trigger.update(&d.state, &self.assembly) {
                    d.mouth_area_at_trigger = mouth_area_of_state(&d.state, &self.assembly);
                    break;
                }
            }
            if k == max_steps {
                break;
            }
            let thrusts = d.controller.thrusts(&self.assembly, &d.state).to_vec();
            let n = if near_contact { self.capture_substeps } else { 1 };
            match advance(&mut dynamics, &self.assembly, &mut d.state, &thrusts, dt, n) {
                Ok(clearance) => near_contact = clearance < cfg.sim.contact_margin,
                Err(e) => {
                    d.diverged = Some(e.to_string());
                    break;
                }
            }
            d.steps += n as u64;
        }
        Ok(deployment)
    }

    /// Switches on the closing mechanism of the variant at the trigger.
    pub fn begin_closing(&self, deployment: &mut Deployment) -> Result<()> {
        let cfg = &self.config.capture;
        let d = deployment;
        d.state.winch_mode = WinchMode::Locked;
        match self.assembly.variant {
            Variant::FourMu => {
                d.controller.deactivate();
                engage_winch(&self.assembly, &mut d.state, cfg);
            }
            Variant::EightMu => {
                let targets = closing_positions(&self.assembly, &d.state, cfg);
                d.controller
                    .retarget(&self.assembly, &d.state, targets, cfg.closing_time)?;
                d.state.docking = Some(docking_params(cfg));
                engage_docking_joints(&mut d.state, &self.assembly, cfg.dock_distance);
            }
        }
        Ok(())
    }

    /// Simulates the closing phase from the trigger to the settle time.
    pub fn capture(&self, deployment: &mut Deployment, logs: LogOptions) -> Result<CaptureLog> {
        let mut log = CaptureLog {
            trigger_time: deployment.trigger.fired_at,
            mouth_area_at_trigger: deployment.mouth_area_at_trigger,
            ..CaptureLog::default()
        };
        if deployment.diverged.is_some() {
            log.diverged = true;
        }
        if !deployment.triggered() || log.diverged {
            log.fuel_per_mu = deployment.controller.fuel_per_mu();
            return Ok(log);
        }
        self.begin_closing(deployment)?;

        let cfg = &self.config;
        let dt = cfg.sim.dt;
        let total = (cfg.capture.settle_time / dt).round() as u64;
        let steps_per_sample = (1.0 / (cfg.controller.sensor_rate * dt)).round().max(1.0) as u64;
        let steps_per_cqi = (cfg.sim.cqi_interval / dt).round().max(1.0) as u64;
        let steps_per_log = (cfg.sim.log_interval / dt).round().max(1.0) as u64;
        let mut dynamics = Dynamics::new(&self.assembly);
        let n = self.capture_substeps;
        let d = deployment;

        for k in 0..total {
            if k % steps_per_cqi == 0 {
                log.cqi_series.push(cqi_of_state(&d.state, &self.assembly, &self.target));
            }
            if logs.trajectory && k % steps_per_log == 0 && k > 0 {
                push_trajectory(&mut d.trajectory, &d.state);
            }
            if self.assembly.variant == Variant::EightMu && k % steps_per_sample == 0 {
                engage_docking_joints(&mut d.state, &self.assembly, cfg.capture.dock_distance);
            }
            let thrusts = d.controller.thrusts(&self.assembly, &d.state).to_vec();
            if let Err(e) = advance(&mut dynamics, &self.assembly, &mut d.state, &thrusts, dt, n) {
                d.diverged = Some(e.to_string());
                log.diverged = true;
                break;
            }
            d.steps += n as u64;
        }
        if !log.diverged {
            if self.assembly.variant == Variant::EightMu {
                engage_docking_joints(&mut d.state, &self.assembly, cfg.capture.dock_distance);
            }
            let mut settled: CqiSample = cqi_of_state(&d.state, &self.assembly, &self.target);
            // Remove the drift of summed substeps from the reported time.
            settled.time = log.trigger_time.unwrap_or(0.0) + cfg.capture.settle_time;
            log.cqi_series.push(settled);
            log.settled = Some(settled);
            log.locked_pairs = locked_pairs(&d.state, &self.assembly, cfg.capture.lock_distance);
            if logs.trajectory {
                push_trajectory(&mut d.trajectory, &d.state);
            }
        }
        log.fuel_per_mu = d.controller.fuel_per_mu();
        Ok(log)
    }
}

/// Substeps that resolve a node bouncing on the contact spring.
pub fn auto_substeps(assembly: &NetAssembly, dt: f64) -> usize {
    let k = assembly.contact.normal_stiffness;
    let m = assembly.node_mass.min(assembly.mu.mass);
    let period = std::f64::consts::TAU * (m / k).sqrt();
    // Twenty-five steps per contact oscillation period.
    (25.0 * dt / period).ceil().max(1.0) as usize
}

/// `n` substeps of `dt / n`; returns the smallest contact clearance seen.
fn advance(
    dynamics: &mut Dynamics,
    assembly: &NetAssembly,
    state: &mut SystemState,
    thrusts: &[Vector3<f64>],
    dt: f64,
    n: usize,
) -> Result<f64> {
    let h = dt / n as f64;
    let mut clearance = f64::INFINITY;
    for _ in 0..n {
        let report = dynamics.step(assembly, state, thrusts, h)?;
        clearance = clearance.min(report.contact.min_clearance);
    }
    Ok(clearance)
}

fn push_trajectory(out: &mut Vec<TrajectoryRecord>, state: &SystemState) {
    for (body, (p, v)) in state.positions.iter().zip(&state.velocities).enumerate() {
        out.push(TrajectoryRecord {
            time: state.time,
            body,
            position: [p.x, p.y, p.z],
            velocity: [v.x, v.y, v.z],
        });
    }
}

/// Convenience: deploy, then simulate closing, returning both stages.
pub fn run_full(
    sim: &Simulation,
    aiming: Vec<Vector3<f64>>,
    rng: ChaCha8Rng,
    logs: LogOptions,
) -> Result<(Deployment, CaptureLog)> {
    let mut d = sim.deploy(aiming, rng, logs)?;
    let log = sim.capture(&mut d, logs)?;
    Ok((d, log))
}

