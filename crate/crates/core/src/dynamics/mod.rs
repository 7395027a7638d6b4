//! Lumped-parameter net, rigid bodies, tether and contact dynamics.

pub mod assembly;
pub mod forces;
pub mod integrator;
pub mod state;

pub use assembly::{
    build_assembly, BodyKind, BodyLayout, CableLink, ContactParams, Geometry, NetAssembly,
    RigidBodySpec, TetherSpec,
};
pub use forces::{cable_force, contact_forces, tether_force, CapsuleFrame, ContactForces, LinkForce};
pub use integrator::{step, Dynamics, StepReport};
pub use state::{ClosingLine, DockingParams, SystemState, WinchMode};

