//! MU guidance: linear ramps, sampled noisy sensing, saturated PID thrust
//! with zero-order hold, and propellant accounting.

pub mod deployment;
pub mod pid;

pub use deployment::{ControlPhase, ControlRecord, DeploymentController, SensorFaultEvent};
pub use pid::{
    desired_position, fuel_increment, pid_thrust, Measurement, MuControllerState, Sensor,
    SensorFault,
};
