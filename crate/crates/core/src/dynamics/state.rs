use std::collections::BTreeSet;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::assembly::NetAssembly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WinchMode {
    FreeSpool,
    Locked,
}

/// Winch-driven closing line threaded through the closing loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingLine {
    pub rest_length: f64,
    /// Total reel-in speed of the line, m/s.
    pub reel_rate: f64,
    pub min_length: f64,
    pub stiffness: f64,
    pub damping: f64,
}

/// Zero-length spring-damper joint between two docked MUs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingParams {
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub time: f64,
    /// One entry per body, in `BodyLayout` order.
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub debris_orientation: UnitQuaternion<f64>,
    /// Inertial-frame angular velocity of the debris, rad/s.
    pub debris_angular_velocity: Vector3<f64>,
    pub winch_mode: WinchMode,
    pub deployed_tether_length: f64,
    /// Engaged docking joints as ordered MU index pairs.
    pub docking_joints: BTreeSet<(usize, usize)>,
    pub docking: Option<DockingParams>,
    pub closing: Option<ClosingLine>,
}

impl SystemState {
    pub fn new(
        positions: Vec<Vector3<f64>>,
        velocities: Vec<Vector3<f64>>,
        debris_orientation: UnitQuaternion<f64>,
        debris_angular_velocity: Vector3<f64>,
        winch_mode: WinchMode,
    ) -> Self {
        assert_eq!(positions.len(), velocities.len());
        Self {
            time: 0.0,
            positions,
            velocities,
            debris_orientation,
            debris_angular_velocity,
            winch_mode,
            deployed_tether_length: 0.0,
            docking_joints: BTreeSet::new(),
            docking: None,
            closing: None,
        }
    }

    /// Mass-weighted centre of the net nodes (MUs excluded).
    pub fn net_com(&self, assembly: &NetAssembly) -> Vector3<f64> {
        let n = assembly.node_count;
        self.positions[..n].iter().sum::<Vector3<f64>>() / n as f64
    }

    pub fn debris_com(&self, assembly: &NetAssembly) -> Vector3<f64> {
        self.positions[assembly.layout.debris()]
    }

    pub fn mu_position(&self, assembly: &NetAssembly, j: usize) -> Vector3<f64> {
        self.positions[assembly.layout.mu(j)]
    }

    pub fn mu_velocity(&self, assembly: &NetAssembly, j: usize) -> Vector3<f64> {
        self.velocities[assembly.layout.mu(j)]
    }

    /// Debris long axis in the inertial frame.
    pub fn debris_axis(&self) -> Vector3<f64> {
        self.debris_orientation * Vector3::x()
    }

    /// Net nodes and MU positions used for the convex hull.
    pub fn net_points(&self, assembly: &NetAssembly) -> Vec<Vector3<f64>> {
        self.positions[..assembly.layout.chaser()].to_vec()
    }

    pub fn total_linear_momentum(&self, assembly: &NetAssembly) -> Vector3<f64> {
        self.velocities
            .iter()
            .enumerate()
            .map(|(i, v)| v * assembly.mass_of(i))
            .sum()
    }

    /// Linear momentum of the net nodes and MUs only.
    pub fn net_momentum(&self, assembly: &NetAssembly) -> Vector3<f64> {
        (0..assembly.layout.chaser())
            .map(|i| self.velocities[i] * assembly.mass_of(i))
            .sum()
    }
}
