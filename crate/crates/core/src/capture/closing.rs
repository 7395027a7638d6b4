//! The two closing mechanisms: a winch-reeled line through the mouth of the
//! four-unit net and docking joints between the units of the eight-unit net.

use nalgebra::Vector3;

use crate::config::CaptureConfig;
use crate::dynamics::forces::{closing_line_length, CapsuleFrame};
use crate::dynamics::{ClosingLine, DockingParams, NetAssembly, SystemState};

/// Closing line whose rest length starts at the current threaded length.
///
/// Each of the four corner winches reels at `reel_rate`, so the total line
/// shortens four times as fast.
pub fn winch_closing(assembly: &NetAssembly, state: &SystemState, config: &CaptureConfig) -> ClosingLine {
    ClosingLine {
        rest_length: closing_line_length(&assembly.closing_loop, &state.positions),
        reel_rate: 4.0 * config.reel_rate,
        min_length: config.closing_min_length,
        stiffness: config.closing_thread_stiffness,
        damping: config.closing_thread_damping,
    }
}

/// Starts winch closing on `state`: locks nothing else, just threads the line.
pub fn engage_winch(assembly: &NetAssembly, state: &mut SystemState, config: &CaptureConfig) {
    state.closing = Some(winch_closing(assembly, state, config));
}

/// Engages a joint for every adjacent MU pair within `dock_distance`.
///
/// Joints are permanent; returns the number engaged by this call.
pub fn engage_docking_joints(state: &mut SystemState, assembly: &NetAssembly, dock_distance: f64) -> usize {
    let mut engaged = 0;
    for (a, b) in assembly.adjacent_mu_pairs() {
        if state.docking_joints.contains(&(a, b)) {
            continue;
        }
        if (state.mu_position(assembly, a) - state.mu_position(assembly, b)).norm() <= dock_distance {
            state.docking_joints.insert((a, b));
            engaged += 1;
        }
    }
    engaged
}

pub fn docking_params(config: &CaptureConfig) -> DockingParams {
    DockingParams {
        stiffness: config.joint_stiffness,
        damping: config.joint_damping,
    }
}

/// Extent of the debris capsule along unit direction `dir`, m.
fn extent_along(frame: &CapsuleFrame, dir: &Vector3<f64>) -> f64 {
    2.0 * (frame.radius + frame.half_segment * frame.axis.dot(dir).abs())
}

/// Docking positions on a ring behind the debris.
///
/// The ring is centred on the approach line (chaser to debris) beyond the
/// debris COM. MUs keep their cyclic order around the perimeter and the ring
/// is rotated so the first unit's slot lies at its current bearing.
pub fn closing_positions(
    assembly: &NetAssembly,
    state: &SystemState,
    config: &CaptureConfig,
) -> Vec<Vector3<f64>> {
    let debris = state.debris_com(assembly);
    let chaser = state.positions[assembly.layout.chaser()];
    let approach = (debris - chaser).try_normalize(1e-9).unwrap_or(-Vector3::z());
    let frame = CapsuleFrame::of_debris(state, assembly);
    let offset = config
        .closing_ring_offset
        .unwrap_or_else(|| extent_along(&frame, &approach));
    let centre = debris + approach * offset;

    let e1 = approach
        .cross(&Vector3::x())
        .try_normalize(1e-6)
        .unwrap_or_else(|| approach.cross(&Vector3::y()).normalize());
    let e2 = approach.cross(&e1);
    let bearing = |p: &Vector3<f64>| {
        let d = p - debris;
        d.dot(&e2).atan2(d.dot(&e1))
    };

    let n = assembly.mu_count();
    let order = perimeter_order(assembly);
    let first = bearing(&state.mu_position(assembly, order[0]));
    // Direction of travel around the ring follows the units' own winding.
    let second = bearing(&state.mu_position(assembly, order[1]));
    let mut step = (second - first).rem_euclid(std::f64::consts::TAU);
    let sign = if step > std::f64::consts::PI { -1.0 } else { 1.0 };
    step = sign * std::f64::consts::TAU / n as f64;

    let mut out = vec![Vector3::zeros(); n];
    for (slot, &j) in order.iter().enumerate() {
        let angle = first + step * slot as f64;
        out[j] = centre + (e1 * angle.cos() + e2 * angle.sin()) * config.closing_ring_radius;
    }
    out
}

/// MU indices in cyclic order around the net perimeter.
pub fn perimeter_order(assembly: &NetAssembly) -> Vec<usize> {
    match assembly.mu_count() {
        8 => vec![0, 4, 1, 5, 3, 7, 2, 6],
        _ => vec![0, 1, 3, 2],
    }
}
