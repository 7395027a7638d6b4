use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::dynamics::assembly::NetAssembly;
use crate::dynamics::forces::{
    accumulate_closing_forces, accumulate_contact_forces, accumulate_docking_forces, cable_force,
    tether_force, ContactSummary,
};
use crate::dynamics::state::{SystemState, WinchMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Smallest applied cable tension this step (never negative).
    pub min_tension: f64,
    pub max_tension: f64,
    pub degenerate_links: usize,
    pub contact: ContactSummary,
    pub tether_tension: f64,
    pub closing_tension: f64,
}

/// Fixed-step semi-implicit Euler integrator with a reusable force buffer.
#[derive(Debug, Clone)]
pub struct Dynamics {
    forces: Vec<Vector3<f64>>,
    inverse_mass: Vec<f64>,
    debris_inertia: Vector3<f64>,
    /// Cap regularized friction so it cannot reverse slip within a step.
    pub friction_cap: bool,
}

impl Dynamics {
    pub fn new(assembly: &NetAssembly) -> Self {
        let total = assembly.body_count();
        Self {
            forces: vec![Vector3::zeros(); total],
            inverse_mass: (0..total).map(|i| 1.0 / assembly.mass_of(i)).collect(),
            debris_inertia: assembly.debris.principal_inertia(),
            friction_cap: true,
        }
    }

    /// Net force on every body from the most recent step.
    pub fn last_forces(&self) -> &[Vector3<f64>] {
        &self.forces
    }

    /// Advances `state` by `dt` under the given MU thrusts.
    ///
    /// Velocities are updated from the accumulated forces first, then
    /// positions from the new velocities.
    pub fn step(
        &mut self,
        assembly: &NetAssembly,
        state: &mut SystemState,
        thrusts: &[Vector3<f64>],
        dt: f64,
    ) -> Result<StepReport> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        if thrusts.len() != assembly.mu_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} MU thrusts, got {}",
                assembly.mu_count(),
                thrusts.len()
            )));
        }
        let layout = assembly.layout;
        self.forces.iter_mut().for_each(|f| *f = Vector3::zeros());

        let mut report = StepReport {
            min_tension: f64::INFINITY,
            max_tension: 0.0,
            degenerate_links: 0,
            contact: ContactSummary::default(),
            tether_tension: 0.0,
            closing_tension: 0.0,
        };
        for link in assembly.links.iter().chain(&assembly.threads) {
            let f = cable_force(link, &state.positions, &state.velocities);
            debug_assert!(f.tension >= 0.0, "cable pushed with tension {}", f.tension);
            report.min_tension = report.min_tension.min(f.tension);
            report.max_tension = report.max_tension.max(f.tension);
            report.degenerate_links += f.degenerate as usize;
            self.forces[link.a] += f.on_a;
            self.forces[link.b] += f.on_b;
        }

        let cap = self.friction_cap.then_some(dt);
        report.contact =
            accumulate_contact_forces(state, assembly, &assembly.contact, cap, &mut self.forces);

        let tether = tether_force(state, assembly, state.winch_mode);
        if state.winch_mode == WinchMode::FreeSpool {
            state.deployed_tether_length = state.deployed_tether_length.max(tether.separation);
        }
        self.forces[assembly.central_knot] += tether.on_knot;
        self.forces[layout.chaser()] += tether.on_chaser;
        report.tether_tension = tether.tension;

        if let Some(line) = state.closing.as_mut() {
            report.closing_tension = accumulate_closing_forces(
                &assembly.closing_loop,
                line,
                &state.positions,
                &state.velocities,
                &mut self.forces,
            );
            line.rest_length = (line.rest_length - line.reel_rate * dt).max(line.min_length);
        }
        if let Some(params) = state.docking {
            accumulate_docking_forces(state, assembly, &params, &mut self.forces);
        }
        for (j, thrust) in thrusts.iter().enumerate() {
            self.forces[layout.mu(j)] += thrust;
        }

        let debris = layout.debris();
        let mut first_bad = None;
        for i in 0..layout.total() {
            let v = state.velocities[i] + self.forces[i] * (self.inverse_mass[i] * dt);
            state.velocities[i] = v;
            let p = state.positions[i] + v * dt;
            state.positions[i] = p;
            if first_bad.is_none() && !(p.iter().chain(v.iter()).all(|x| x.is_finite())) {
                first_bad = Some(i);
            }
        }

        // Debris attitude: Euler's equations in the inertial frame.
        let torque = report.contact.debris_torque;
        let rot = state.debris_orientation.to_rotation_matrix();
        let inertia_world: Matrix3<f64> =
            rot.matrix() * Matrix3::from_diagonal(&self.debris_inertia) * rot.matrix().transpose();
        let inv_world: Matrix3<f64> = rot.matrix()
            * Matrix3::from_diagonal(&self.debris_inertia.map(|i| 1.0 / i))
            * rot.matrix().transpose();
        let w = state.debris_angular_velocity;
        let w_new = w + inv_world * (torque - w.cross(&(inertia_world * w))) * dt;
        state.debris_angular_velocity = w_new;
        state.debris_orientation =
            UnitQuaternion::from_scaled_axis(w_new * dt) * state.debris_orientation;

        state.time += dt;

        if let Some(body) = first_bad {
            return Err(Error::Diverged {
                body,
                time: state.time,
            });
        }
        if !state.debris_angular_velocity.iter().all(|x| x.is_finite()) {
            return Err(Error::Diverged {
                body: debris,
                time: state.time,
            });
        }
        if report.min_tension == f64::INFINITY {
            report.min_tension = 0.0;
        }
        Ok(report)
    }
}

/// Single-step convenience wrapper returning the advanced state.
pub fn step(
    state: &SystemState,
    assembly: &NetAssembly,
    thrusts: &[Vector3<f64>],
    dt: f64,
) -> Result<SystemState> {
    let mut next = state.clone();
    Dynamics::new(assembly).step(assembly, &mut next, thrusts, dt)?;
    Ok(next)
}
