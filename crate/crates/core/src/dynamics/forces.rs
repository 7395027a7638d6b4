//! Force laws: tension-only cables, penalty contact against the debris
//! capsule, the main tether, the closing line and docking joints.
//!
//! Every law produces equal-and-opposite pairs so the sum of internal forces
//! vanishes up to rounding.

use nalgebra::Vector3;

use crate::dynamics::assembly::{CableLink, ContactParams, Geometry, NetAssembly};
use crate::dynamics::state::{ClosingLine, DockingParams, SystemState, WinchMode};

/// Endpoints closer than this are treated as coincident.
pub const DEGENERATE_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkForce {
    pub on_a: Vector3<f64>,
    pub on_b: Vector3<f64>,
    pub tension: f64,
    pub degenerate: bool,
}

impl LinkForce {
    const ZERO: LinkForce = LinkForce {
        on_a: Vector3::new(0.0, 0.0, 0.0),
        on_b: Vector3::new(0.0, 0.0, 0.0),
        tension: 0.0,
        degenerate: false,
    };
}

/// Tension-only spring-damper between the two endpoints of `link`.
///
/// The tension `k (len - l0) + c d(len)/dt` is applied only while the link is
/// stretched, and never pushes.
#[inline]
pub fn cable_force(
    link: &CableLink,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
) -> LinkForce {
    let d = positions[link.b] - positions[link.a];
    // Most links are slack; decide on the squared length before the root.
    let len2 = d.norm_squared();
    if len2 < DEGENERATE_LENGTH * DEGENERATE_LENGTH {
        return LinkForce {
            degenerate: true,
            ..LinkForce::ZERO
        };
    }
    if len2 <= link.rest_length * link.rest_length {
        return LinkForce::ZERO;
    }
    let len = len2.sqrt();
    let u = d / len;
    let rate = (velocities[link.b] - velocities[link.a]).dot(&u);
    let tension = (link.stiffness * (len - link.rest_length) + link.damping * rate).max(0.0);
    LinkForce {
        on_a: u * tension,
        on_b: -u * tension,
        tension,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapsuleFrame {
    pub centre: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub half_segment: f64,
    pub radius: f64,
}

impl CapsuleFrame {
    pub fn of_debris(state: &SystemState, assembly: &NetAssembly) -> Self {
        let (radius, length) = match assembly.debris.geometry {
            Geometry::Capsule { radius, length } => (radius, length),
            Geometry::Box { half_extents } => (half_extents[1], 2.0 * half_extents[0]),
        };
        Self {
            centre: state.debris_com(assembly),
            axis: state.debris_axis(),
            half_segment: (0.5 * length - radius).max(0.0),
            radius,
        }
    }

    /// Closest point on the capsule core segment and the offset from it.
    pub fn closest_on_core(&self, p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let rel = p - self.centre;
        let s = rel.dot(&self.axis).clamp(-self.half_segment, self.half_segment);
        let q = self.centre + self.axis * s;
        (q, p - q)
    }

    /// Signed distance from `p` to the capsule surface.
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        self.closest_on_core(p).1.norm() - self.radius
    }
}

/// Aggregate contact output of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactSummary {
    pub debris_force: Vector3<f64>,
    pub debris_torque: Vector3<f64>,
    pub active_contacts: usize,
    /// Smallest surface clearance among the net nodes and MUs, m.
    pub min_clearance: f64,
}

/// Penalty contact between net nodes/MUs and the debris capsule, added into
/// `forces`.
///
/// Normal force is `k_n delta + c_n max(0, approach speed)` along the outward
/// normal; friction is regularized Coulomb `mu |F_n| tanh(|v_t| / v_reg)`.
/// When `step_dt` is given, friction is additionally limited to the force
/// that would stop the tangential slip within one step, which keeps the
/// explicit update stable for very light nodes.
pub fn accumulate_contact_forces(
    state: &SystemState,
    assembly: &NetAssembly,
    params: &ContactParams,
    step_dt: Option<f64>,
    forces: &mut [Vector3<f64>],
) -> ContactSummary {
    let capsule = CapsuleFrame::of_debris(state, assembly);
    let v_debris = state.velocities[assembly.layout.debris()];
    let omega = state.debris_angular_velocity;
    let mut summary = ContactSummary {
        min_clearance: f64::INFINITY,
        ..Default::default()
    };
    let bodies = assembly.layout.chaser();
    // Bounding-sphere cull radius.
    let reach = capsule.half_segment + capsule.radius + assembly.mu_radius.max(assembly.node_radius);
    // Squared distance of the nearest culled body; one square root at the end.
    let mut nearest_culled = f64::INFINITY;
    for i in 0..bodies {
        let p = state.positions[i];
        let rel = p - capsule.centre;
        let r2 = rel.norm_squared();
        if r2 > reach * reach {
            nearest_culled = nearest_culled.min(r2);
            continue;
        }
        let body_radius = if i < assembly.node_count {
            assembly.node_radius
        } else {
            assembly.mu_radius
        };
        let (q, offset) = capsule.closest_on_core(&p);
        let dist = offset.norm();
        let clearance = dist - capsule.radius - body_radius;
        summary.min_clearance = summary.min_clearance.min(clearance);
        if clearance >= 0.0 {
            continue;
        }
        let depth = -clearance;
        let normal = if dist > 1e-12 {
            offset / dist
        } else {
            capsule.axis.cross(&Vector3::z()).try_normalize(1e-12).unwrap_or_else(Vector3::y)
        };
        let contact_point = q + normal * capsule.radius;
        let lever = contact_point - capsule.centre;
        let v_surface = v_debris + omega.cross(&lever);
        let v_rel = state.velocities[i] - v_surface;
        let v_n = v_rel.dot(&normal);
        let f_n = params.normal_stiffness * depth + params.normal_damping * (-v_n).max(0.0);
        let mut force = normal * f_n;
        let v_t = v_rel - normal * v_n;
        let slip = v_t.norm();
        if slip > 0.0 {
            let mut f_t = params.friction_coefficient
                * f_n
                * (slip / params.friction_regularization_velocity).tanh();
            if let Some(dt) = step_dt {
                f_t = f_t.min(assembly.mass_of(i) * slip / dt);
            }
            force -= v_t * (f_t / slip);
        }
        forces[i] += force;
        summary.debris_force -= force;
        summary.debris_torque += lever.cross(&(-force));
        summary.active_contacts += 1;
    }
    let approx = nearest_culled.sqrt() - capsule.half_segment - capsule.radius;
    summary.min_clearance = summary.min_clearance.min(approx);
    summary
}

/// Per-body contact forces plus the reaction wrench on the debris.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactForces {
    pub per_body: Vec<Vector3<f64>>,
    pub summary: ContactSummary,
}

pub fn contact_forces(
    state: &SystemState,
    assembly: &NetAssembly,
    params: &ContactParams,
) -> ContactForces {
    let mut per_body = vec![Vector3::zeros(); assembly.layout.chaser()];
    let summary = accumulate_contact_forces(state, assembly, params, None, &mut per_body);
    ContactForces { per_body, summary }
}

/// Main tether between the central knot and the chaser winch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetherForce {
    pub on_knot: Vector3<f64>,
    pub on_chaser: Vector3<f64>,
    pub tension: f64,
    /// Current knot-to-winch distance.
    pub separation: f64,
}

pub fn tether_force(state: &SystemState, assembly: &NetAssembly, mode: WinchMode) -> TetherForce {
    let knot = assembly.central_knot;
    let chaser = assembly.layout.chaser();
    let winch = state.positions[chaser] + assembly.tether.winch_offset;
    let d = winch - state.positions[knot];
    let separation = d.norm();
    let zero = TetherForce {
        on_knot: Vector3::zeros(),
        on_chaser: Vector3::zeros(),
        tension: 0.0,
        separation,
    };
    match mode {
        WinchMode::FreeSpool => zero,
        WinchMode::Locked => {
            let rest = state.deployed_tether_length;
            if separation <= rest || separation < DEGENERATE_LENGTH {
                return zero;
            }
            let u = d / separation;
            let rate = (state.velocities[chaser] - state.velocities[knot]).dot(&u);
            let tension = (assembly.tether.stiffness * (separation - rest)
                + assembly.tether.damping * rate)
                .max(0.0);
            TetherForce {
                on_knot: u * tension,
                on_chaser: -u * tension,
                tension,
                separation,
            }
        }
    }
}

/// Total length of the closing line through `nodes` (closed loop).
pub fn closing_line_length(nodes: &[usize], positions: &[Vector3<f64>]) -> f64 {
    let m = nodes.len();
    (0..m)
        .map(|k| (positions[nodes[(k + 1) % m]] - positions[nodes[k]]).norm())
        .sum()
}

/// Sliding closing line through the closing-loop nodes, added into `forces`.
///
/// The line slides freely through the nodes, so one tension value acts along
/// every segment. Returns the tension.
pub fn accumulate_closing_forces(
    nodes: &[usize],
    line: &ClosingLine,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
    forces: &mut [Vector3<f64>],
) -> f64 {
    let m = nodes.len();
    let segment = |k: usize| {
        let (a, b) = (nodes[k], nodes[(k + 1) % m]);
        let d = positions[b] - positions[a];
        let len = d.norm();
        let unit = if len > DEGENERATE_LENGTH {
            d / len
        } else {
            Vector3::zeros()
        };
        (a, b, len, unit)
    };
    let mut length = 0.0;
    let mut rate = 0.0;
    for k in 0..m {
        let (a, b, len, unit) = segment(k);
        length += len;
        rate += (velocities[b] - velocities[a]).dot(&unit);
    }
    if length <= line.rest_length {
        return 0.0;
    }
    let tension =
        (line.stiffness * (length - line.rest_length) + line.damping * rate).max(0.0);
    for k in 0..m {
        let (a, b, _, unit) = segment(k);
        forces[a] += unit * tension;
        forces[b] -= unit * tension;
    }
    tension
}

/// Zero-rest-length spring-damper joints between docked MUs, added into `forces`.
pub fn accumulate_docking_forces(
    state: &SystemState,
    assembly: &NetAssembly,
    params: &DockingParams,
    forces: &mut [Vector3<f64>],
) {
    for &(a, b) in &state.docking_joints {
        let (ia, ib) = (assembly.layout.mu(a), assembly.layout.mu(b));
        let f = (state.positions[ib] - state.positions[ia]) * params.stiffness
            + (state.velocities[ib] - state.velocities[ia]) * params.damping;
        forces[ia] += f;
        forces[ib] -= f;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Config, Variant};
    use crate::dynamics::assembly::build_assembly;

    fn link(k: f64, c: f64) -> CableLink {
        CableLink {
            a: 0,
            b: 1,
            rest_length: 1.0,
            stiffness: k,
            damping: c,
        }
    }

    #[test]
    fn cable_at_rest_length_is_force_free() {
        let p = [Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        let v = [Vector3::zeros(); 2];
        let f = cable_force(&link(1000.0, 10.0), &p, &v);
        assert_eq!(f.on_a, Vector3::zeros());
        assert_eq!(f.on_b, Vector3::zeros());
    }

    #[test]
    fn slack_cable_never_pushes() {
        let p = [Vector3::zeros(), Vector3::new(0.9, 0.0, 0.0)];
        let v = [Vector3::zeros(), Vector3::new(-5.0, 0.0, 0.0)];
        let f = cable_force(&link(1000.0, 10.0), &p, &v);
        assert_eq!(f.on_a, Vector3::zeros());
        assert_eq!(f.tension, 0.0);
    }

    #[test]
    fn stretched_cable_hooke_term() {
        let p = [Vector3::zeros(), Vector3::new(1.01, 0.0, 0.0)];
        let v = [Vector3::zeros(); 2];
        let f = cable_force(&link(1000.0, 0.0), &p, &v);
        assert!((f.tension - 10.0).abs() < 1e-9);
        assert!((f.on_a - Vector3::new(10.0, 0.0, 0.0)).norm() < 1e-9);
        assert_eq!(f.on_a, -f.on_b);
    }

    #[test]
    fn stretched_cable_closing_fast_clamps_at_zero() {
        let p = [Vector3::zeros(), Vector3::new(1.01, 0.0, 0.0)];
        let v = [Vector3::zeros(), Vector3::new(-10.0, 0.0, 0.0)];
        let f = cable_force(&link(1000.0, 10.0), &p, &v);
        assert_eq!(f.tension, 0.0);
    }

    #[test]
    fn coincident_endpoints_flagged() {
        let p = [Vector3::zeros(); 2];
        let v = [Vector3::zeros(); 2];
        let f = cable_force(&link(1000.0, 10.0), &p, &v);
        assert!(f.degenerate);
        assert_eq!(f.on_a, Vector3::zeros());
    }

    fn four_unit() -> (NetAssembly, SystemState) {
        let mut c = Config::default();
        c.variant = Variant::FourMu;
        c.net.mesh = 7;
        c.net.node_radius = 0.0;
        c.surrogate.feature_node_count = Some(24);
        build_assembly(&c).unwrap()
    }

    #[test]
    fn non_penetrating_node_feels_nothing() {
        let (a, s) = four_unit();
        let params = ContactParams::new(1e5, 1.0, 0.3, 0.01).unwrap();
        let out = contact_forces(&s, &a, &params);
        assert!(out.per_body.iter().all(|f| *f == Vector3::zeros()));
        assert_eq!(out.summary.active_contacts, 0);
    }

    #[test]
    fn static_penetration_penalty() {
        let (a, mut s) = four_unit();
        let params = ContactParams::new(1e5, 1e-9, 0.3, 0.01).unwrap();
        let debris = s.debris_com(&a);
        // Node 0 sits 1 mm inside the cylindrical surface, above the axis.
        s.positions[0] = debris + Vector3::new(0.0, 0.0, 1.95 - 0.001);
        let out = contact_forces(&s, &a, &params);
        assert!((out.per_body[0] - Vector3::new(0.0, 0.0, 100.0)).norm() < 1e-6);
        assert!((out.summary.debris_force + out.per_body[0]).norm() < 1e-12);
    }

    #[test]
    fn friction_opposes_slip() {
        let (a, mut s) = four_unit();
        let params = ContactParams::new(1e5, 1e-9, 0.5, 0.01).unwrap();
        let debris = s.debris_com(&a);
        s.positions[0] = debris + Vector3::new(0.0, 0.0, 1.95 - 0.001);
        s.velocities[0] = Vector3::new(1.0, 0.0, 0.0);
        let out = contact_forces(&s, &a, &params);
        let f = out.per_body[0];
        assert!(f.x < 0.0);
        assert!((f.x + 0.5 * 100.0 * (100.0f64).tanh()).abs() < 1e-6);
        // Torque of the reaction: lever (0,0,1.95) x (-f)
        let lever = Vector3::new(0.0, 0.0, 1.95);
        assert!((out.summary.debris_torque - lever.cross(&(-f))).norm() < 1e-9);
    }

    #[test]
    fn tether_free_spool_and_locked() {
        let (a, mut s) = four_unit();
        let knot = a.central_knot;
        s.positions[knot] = Vector3::new(0.0, 0.0, -20.0);
        let winch = a.tether.winch_offset;
        let sep = (winch - s.positions[knot]).norm();
        assert_eq!(tether_force(&s, &a, WinchMode::FreeSpool).on_knot, Vector3::zeros());

        s.deployed_tether_length = sep;
        let f = tether_force(&s, &a, WinchMode::Locked);
        assert_eq!(f.tension, 0.0);

        s.deployed_tether_length = sep - 0.1;
        let f = tether_force(&s, &a, WinchMode::Locked);
        assert!((f.tension - 2000.0 * 0.1).abs() < 1e-6);
        assert!(f.on_knot.z > 0.0);
        assert_eq!(f.on_knot, -f.on_chaser);
    }

    #[test]
    fn closing_line_pulls_loop_inward() {
        let nodes = [0, 1, 2, 3];
        let positions = vec![
            Vector3::new(-1.0, -1.0, 0.0),
            Vector3::new(1.0, -1.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(-1.0, 1.0, 0.0),
        ];
        let velocities = vec![Vector3::zeros(); 4];
        let line = ClosingLine {
            rest_length: 7.0,
            reel_rate: 1.0,
            min_length: 0.0,
            stiffness: 100.0,
            damping: 0.0,
        };
        let mut forces = vec![Vector3::zeros(); 4];
        let t = accumulate_closing_forces(&nodes, &line, &positions, &velocities, &mut forces);
        assert!((t - 100.0).abs() < 1e-9);
        for (p, f) in positions.iter().zip(&forces) {
            assert!(p.dot(f) < 0.0);
        }
        assert!(forces.iter().sum::<Vector3<f64>>().norm() < 1e-12);
    }
}
