use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Variant};
use crate::dynamics::state::{SystemState, WinchMode};
use crate::error::{Error, Result};

/// Node count of the three feature loops on the reference 23x23 mesh.
pub const REFERENCE_FEATURE_NODES: usize = 165;
const REFERENCE_MESH: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableLink {
    /// Body index of the first endpoint.
    pub a: usize,
    /// Body index of the second endpoint.
    pub b: usize,
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyKind {
    Chaser,
    Debris,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Box { half_extents: [f64; 3] },
    /// Capsule with tip-to-tip `length`.
    Capsule { radius: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodySpec {
    pub mass: f64,
    pub geometry: Geometry,
    pub kind: BodyKind,
}

impl RigidBodySpec {
    pub fn new(mass: f64, geometry: Geometry, kind: BodyKind) -> Result<Self> {
        let dims_ok = match geometry {
            Geometry::Box { half_extents } => half_extents.iter().all(|h| *h > 0.0),
            Geometry::Capsule { radius, length } => radius > 0.0 && length > 0.0,
        };
        if !(mass > 0.0) || !dims_ok {
            return Err(Error::Config(format!(
                "{kind:?} body needs positive mass and dimensions"
            )));
        }
        Ok(Self {
            mass,
            geometry,
            kind,
        })
    }

    /// Principal moments of inertia about the body axes, long axis first for
    /// capsules (modelled as a uniform solid cylinder).
    pub fn principal_inertia(&self) -> Vector3<f64> {
        let m = self.mass;
        match self.geometry {
            Geometry::Box { half_extents: [a, b, c] } => {
                let (x, y, z) = (2.0 * a, 2.0 * b, 2.0 * c);
                Vector3::new(
                    m * (y * y + z * z) / 12.0,
                    m * (x * x + z * z) / 12.0,
                    m * (x * x + y * y) / 12.0,
                )
            }
            Geometry::Capsule { radius, length } => {
                let axial = 0.5 * m * radius * radius;
                let transverse = m * (3.0 * radius * radius + length * length) / 12.0;
                Vector3::new(axial, transverse, transverse)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub normal_stiffness: f64,
    pub normal_damping: f64,
    pub friction_coefficient: f64,
    pub friction_regularization_velocity: f64,
}

impl ContactParams {
    pub fn new(
        normal_stiffness: f64,
        normal_damping: f64,
        friction_coefficient: f64,
        friction_regularization_velocity: f64,
    ) -> Result<Self> {
        let all_positive = [
            normal_stiffness,
            normal_damping,
            friction_coefficient,
            friction_regularization_velocity,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive || friction_coefficient > 2.0 {
            return Err(Error::Config(
                "contact parameters must be positive with friction coefficient <= 2".into(),
            ));
        }
        Ok(Self {
            normal_stiffness,
            normal_damping,
            friction_coefficient,
            friction_regularization_velocity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetherSpec {
    pub stiffness: f64,
    pub damping: f64,
    /// Winch position relative to the chaser centre.
    pub winch_offset: Vector3<f64>,
}

/// Body index layout: net nodes, then MUs, then chaser, then debris.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyLayout {
    pub nodes: usize,
    pub mus: usize,
}

impl BodyLayout {
    pub fn mu(&self, j: usize) -> usize {
        self.nodes + j
    }
    pub fn chaser(&self) -> usize {
        self.nodes + self.mus
    }
    pub fn debris(&self) -> usize {
        self.nodes + self.mus + 1
    }
    pub fn total(&self) -> usize {
        self.nodes + self.mus + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetAssembly {
    pub variant: Variant,
    pub mesh: usize,
    pub side_length: f64,
    pub node_count: usize,
    pub node_mass: f64,
    pub node_radius: f64,
    pub mu_radius: f64,
    /// Net links between node indices.
    pub links: Vec<CableLink>,
    /// Threads tying each MU (body index) to its attachment node.
    pub threads: Vec<CableLink>,
    /// MU index -> net node index.
    pub mu_attachments: Vec<usize>,
    /// Boundary nodes in order around the mouth.
    pub perimeter_loop: Vec<usize>,
    pub surrogate_loops: [Vec<usize>; 3],
    /// Nodes threaded by the closing line (four-unit net only).
    pub closing_loop: Vec<usize>,
    pub central_knot: usize,
    /// Node positions of the fully flat net, centred at the origin.
    pub flat_positions: Vec<Vector3<f64>>,
    pub mu: RigidBodySpec,
    pub chaser: RigidBodySpec,
    pub debris: RigidBodySpec,
    /// Unit long axis of the debris in its body frame is +x; this is the
    /// initial inertial direction of that axis.
    pub debris_axis: Vector3<f64>,
    pub tether: TetherSpec,
    pub contact: ContactParams,
    pub layout: BodyLayout,
}

fn grid_index(mesh: usize, row: usize, col: usize) -> usize {
    row * mesh + col
}

/// Nodes at Chebyshev distance `ring` from the centre, ordered around the ring.
fn square_ring(mesh: usize, centre: usize, ring: usize) -> Vec<usize> {
    if ring == 0 {
        return vec![grid_index(mesh, centre, centre)];
    }
    let lo = centre - ring;
    let hi = centre + ring;
    let mut out = Vec::with_capacity(8 * ring);
    for col in lo..hi {
        out.push(grid_index(mesh, lo, col));
    }
    for row in lo..hi {
        out.push(grid_index(mesh, row, hi));
    }
    for col in (lo + 1..=hi).rev() {
        out.push(grid_index(mesh, hi, col));
    }
    for row in (lo + 1..=hi).rev() {
        out.push(grid_index(mesh, row, lo));
    }
    out
}

/// Evenly spaced subsequence of `items` with `count` members.
fn even_subset(items: &[usize], count: usize) -> Vec<usize> {
    let n = items.len();
    (0..count).map(|k| items[k * n / count]).collect()
}

/// Ring radii of the three feature loops for a mesh.
fn feature_rings(mesh: usize) -> [usize; 3] {
    let half = (mesh - 1) / 2;
    let mut rings = [0; 3];
    for (j, r) in rings.iter_mut().enumerate() {
        *r = ((half * (j + 1)) as f64 / 3.0).round().max(1.0) as usize;
    }
    // Keep the loops disjoint on very small meshes.
    for j in 1..3 {
        if rings[j] <= rings[j - 1] {
            rings[j] = rings[j - 1] + 1;
        }
    }
    rings
}

/// Default feature-node count: 165 on the 23x23 mesh, scaled by loop size.
pub fn default_feature_node_count(mesh: usize) -> usize {
    let total = |m: usize| feature_rings(m).iter().map(|r| 8 * r).sum::<usize>();
    let scaled = REFERENCE_FEATURE_NODES as f64 * total(mesh) as f64 / total(REFERENCE_MESH) as f64;
    (scaled.round() as usize).min(total(mesh))
}

fn build_feature_loops(mesh: usize, count: usize) -> Result<[Vec<usize>; 3]> {
    let rings = feature_rings(mesh);
    let centre = (mesh - 1) / 2;
    if rings[2] > centre {
        return Err(Error::Config(format!(
            "mesh {mesh} is too small for three feature loops"
        )));
    }
    let full: Vec<Vec<usize>> = rings.iter().map(|&r| square_ring(mesh, centre, r)).collect();
    let available: usize = full.iter().map(Vec::len).sum();
    if count > available || count < 9 {
        return Err(Error::Config(format!(
            "feature loops hold between 9 and {available} nodes on a {mesh}x{mesh} mesh, \
             {count} requested"
        )));
    }
    // Largest-remainder allocation proportional to ring length.
    let exact: Vec<f64> = full
        .iter()
        .map(|r| count as f64 * r.len() as f64 / available as f64)
        .collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .partial_cmp(&(exact[a] - exact[a].floor()))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut missing = count - alloc.iter().sum::<usize>();
    for &j in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if alloc[j] < full[j].len() {
            alloc[j] += 1;
            missing -= 1;
        }
    }
    Ok([
        even_subset(&full[0], alloc[0]),
        even_subset(&full[1], alloc[1]),
        even_subset(&full[2], alloc[2]),
    ])
}

/// Builds the net assembly and its stowed initial state.
///
/// The chaser sits at the origin and faces -z. The stowed net is a square of
/// `stowed_fraction` of the flat side just in front of the chaser face, with
/// the MUs protruding from its corners (and side midpoints for eight units).
/// The debris starts at `config.debris.position`.
pub fn build_assembly(config: &Config) -> Result<(NetAssembly, SystemState)> {
    config.validate()?;
    let net = &config.net;
    let mesh = net.mesh;
    let variant = config.variant;
    let node_count = mesh * mesh;
    let spacing = net.side_length / (mesh - 1) as f64;
    let half_side = 0.5 * net.side_length;
    let centre = (mesh - 1) / 2;
    let last = mesh - 1;

    let flat_positions: Vec<Vector3<f64>> = (0..mesh)
        .flat_map(|row| {
            (0..mesh).map(move |col| {
                Vector3::new(
                    -half_side + col as f64 * spacing,
                    -half_side + row as f64 * spacing,
                    0.0,
                )
            })
        })
        .collect();

    let mut links = Vec::with_capacity(2 * mesh * (mesh - 1));
    for row in 0..mesh {
        for col in 0..mesh {
            let i = grid_index(mesh, row, col);
            if col + 1 < mesh {
                links.push(CableLink {
                    a: i,
                    b: grid_index(mesh, row, col + 1),
                    rest_length: spacing,
                    stiffness: net.stiffness,
                    damping: net.damping,
                });
            }
            if row + 1 < mesh {
                links.push(CableLink {
                    a: i,
                    b: grid_index(mesh, row + 1, col),
                    rest_length: spacing,
                    stiffness: net.stiffness,
                    damping: net.damping,
                });
            }
        }
    }

    // Unit order follows the nominal aiming table: 1 (-,-), 2 (+,-), 3 (-,+),
    // 4 (+,+), then side midpoints 5 (0,-), 6 (+,0), 7 (-,0), 8 (0,+).
    let mut mu_attachments = vec![
        grid_index(mesh, 0, 0),
        grid_index(mesh, 0, last),
        grid_index(mesh, last, 0),
        grid_index(mesh, last, last),
    ];
    if variant == Variant::EightMu {
        mu_attachments.extend([
            grid_index(mesh, 0, centre),
            grid_index(mesh, centre, last),
            grid_index(mesh, centre, 0),
            grid_index(mesh, last, centre),
        ]);
    }
    let mu_count = mu_attachments.len();
    let layout = BodyLayout {
        nodes: node_count,
        mus: mu_count,
    };

    let threads = mu_attachments
        .iter()
        .enumerate()
        .map(|(j, &node)| CableLink {
            a: layout.mu(j),
            b: node,
            rest_length: net.thread_length,
            stiffness: net.thread_stiffness,
            damping: net.thread_damping,
        })
        .collect();

    let perimeter_loop = square_ring_boundary(mesh);
    let feature_count = config
        .surrogate
        .feature_node_count
        .unwrap_or_else(|| default_feature_node_count(mesh));
    let surrogate_loops = build_feature_loops(mesh, feature_count)?;

    let closing_loop = match variant {
        Variant::FourMu => {
            let count = config.capture.closing_node_count;
            if count > perimeter_loop.len() {
                return Err(Error::Config(format!(
                    "closing loop of {count} nodes exceeds the perimeter"
                )));
            }
            even_subset(&perimeter_loop, count)
        }
        Variant::EightMu => Vec::new(),
    };

    let [mx, my, mz] = net.mu_size;
    let mu = RigidBodySpec::new(
        net.mu_mass,
        Geometry::Box {
            half_extents: [0.5 * mx, 0.5 * my, 0.5 * mz],
        },
        BodyKind::Mu,
    )?;
    let ch = 0.5 * config.chaser.side_length;
    let chaser = RigidBodySpec::new(
        config.chaser.mass,
        Geometry::Box {
            half_extents: [ch; 3],
        },
        BodyKind::Chaser,
    )?;
    let debris = RigidBodySpec::new(
        config.debris.mass,
        Geometry::Capsule {
            radius: config.debris.radius,
            length: config.debris.length,
        },
        BodyKind::Debris,
    )?;
    let c = &config.contact;
    let contact = ContactParams::new(
        c.normal_stiffness,
        c.normal_damping,
        c.friction_coefficient,
        c.friction_regularization_velocity,
    )?;

    let assembly = NetAssembly {
        variant,
        mesh,
        side_length: net.side_length,
        node_count,
        node_mass: net.net_mass / node_count as f64,
        node_radius: net.node_radius,
        mu_radius: 0.5 * mx.min(my).min(mz),
        links,
        threads,
        mu_attachments,
        perimeter_loop,
        surrogate_loops,
        closing_loop,
        central_knot: grid_index(mesh, centre, centre),
        flat_positions,
        mu,
        chaser,
        debris,
        debris_axis: Vector3::from(config.debris.axis).normalize(),
        tether: TetherSpec {
            stiffness: config.tether.stiffness,
            damping: config.tether.damping,
            winch_offset: Vector3::new(0.0, 0.0, -ch),
        },
        contact,
        layout,
    };
    assembly.check_invariants()?;

    let stow_z = -ch - net.stowed_gap;
    let scale = net.stowed_fraction;
    let mut positions: Vec<Vector3<f64>> = assembly
        .flat_positions
        .iter()
        .map(|p| Vector3::new(p.x * scale, p.y * scale, stow_z))
        .collect();
    let protrusion = 0.5 * mz.max(mx);
    for &node in &assembly.mu_attachments {
        let p = positions[node];
        let outward = Vector3::new(p.x, p.y, 0.0);
        let dir = if outward.norm() > 0.0 {
            outward.normalize()
        } else {
            Vector3::zeros()
        };
        positions.push(p + dir * protrusion);
    }
    positions.push(Vector3::zeros());
    positions.push(config.debris_position());

    let total = layout.total();
    let velocities = vec![Vector3::zeros(); total];
    let spin = config.debris.spin_rate * assembly.debris_axis;

    let state = SystemState::new(
        positions,
        velocities,
        nalgebra::UnitQuaternion::rotation_between(&Vector3::x(), &assembly.debris_axis)
            .unwrap_or_else(|| {
                nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI)
            }),
        spin,
        WinchMode::FreeSpool,
    );
    Ok((assembly, state))
}

/// Boundary nodes of a square mesh, in order.
fn square_ring_boundary(mesh: usize) -> Vec<usize> {
    let last = mesh - 1;
    let mut out = Vec::with_capacity(4 * last);
    for col in 0..last {
        out.push(grid_index(mesh, 0, col));
    }
    for row in 0..last {
        out.push(grid_index(mesh, row, last));
    }
    for col in (1..=last).rev() {
        out.push(grid_index(mesh, last, col));
    }
    for row in (1..=last).rev() {
        out.push(grid_index(mesh, row, 0));
    }
    out
}

impl NetAssembly {
    pub fn mu_count(&self) -> usize {
        self.mu_attachments.len()
    }

    pub fn body_count(&self) -> usize {
        self.layout.total()
    }

    pub fn mass_of(&self, body: usize) -> f64 {
        let l = &self.layout;
        if body < l.nodes {
            self.node_mass
        } else if body < l.chaser() {
            self.mu.mass
        } else if body == l.chaser() {
            self.chaser.mass
        } else {
            self.debris.mass
        }
    }

    /// Mouth area of the fully flat net.
    pub fn max_mouth_area(&self) -> f64 {
        self.side_length * self.side_length
    }

    pub fn feature_node_count(&self) -> usize {
        self.surrogate_loops.iter().map(Vec::len).sum()
    }

    /// Pairs of MU indices adjacent along the net perimeter (eight-unit net).
    pub fn adjacent_mu_pairs(&self) -> Vec<(usize, usize)> {
        // Perimeter order of the eight units: 1, 5, 2, 6, 4, 8, 3, 7.
        let ring = [0usize, 4, 1, 5, 3, 7, 2, 6];
        match self.variant {
            Variant::EightMu => (0..ring.len())
                .map(|k| {
                    let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
                    (a.min(b), a.max(b))
                })
                .collect(),
            Variant::FourMu => Vec::new(),
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.node_count;
        for link in &self.links {
            if link.a == link.b || link.a >= n || link.b >= n {
                return Err(Error::Config(format!(
                    "link ({}, {}) references invalid nodes",
                    link.a, link.b
                )));
            }
        }
        if !self.link_graph_connected() {
            return Err(Error::Config("net link graph is disconnected".into()));
        }
        let expected_mus = self.variant.mu_count();
        if self.mu_attachments.len() != expected_mus {
            return Err(Error::Config(format!(
                "{} needs {expected_mus} MU attachments, found {}",
                self.variant,
                self.mu_attachments.len()
            )));
        }
        if !is_simple_cycle(&self.perimeter_loop, n) {
            return Err(Error::Config("perimeter loop is not a simple cycle".into()));
        }
        let mut seen = vec![false; n];
        for lp in &self.surrogate_loops {
            if !is_simple_cycle(lp, n) {
                return Err(Error::Config("feature loop is not a simple cycle".into()));
            }
            for &i in lp {
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config("feature loops overlap".into()));
                }
            }
        }
        Ok(())
    }

    fn link_graph_connected(&self) -> bool {
        let n = self.node_count;
        let mut adjacency = vec![Vec::new(); n];
        for link in &self.links {
            adjacency[link.a].push(link.b);
            adjacency[link.b].push(link.a);
        }
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !visited[j] {
                    visited[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }
}

fn is_simple_cycle(nodes: &[usize], bound: usize) -> bool {
    let mut seen = std::collections::HashSet::new();
    nodes.len() >= 3 && nodes.iter().all(|&i| i < bound && seen.insert(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(variant: Variant, mesh: usize) -> Config {
        let mut c = Config::default();
        c.variant = variant;
        c.net.mesh = mesh;
        c
    }

    #[test]
    fn four_unit_attachments_are_corners() {
        let (a, _) = build_assembly(&config(Variant::FourMu, 23)).unwrap();
        assert_eq!(a.mu_attachments, vec![0, 22, 506, 528]);
        assert_eq!(a.closing_loop.len(), 12);
        for corner in &a.mu_attachments {
            assert!(a.closing_loop.contains(corner));
        }
    }

    #[test]
    fn eight_unit_attachments_are_corners_and_midpoints() {
        let (a, s) = build_assembly(&config(Variant::EightMu, 23)).unwrap();
        assert_eq!(a.mu_attachments.len(), 8);
        assert_eq!(&a.mu_attachments[..4], &[0, 22, 506, 528]);
        assert_eq!(&a.mu_attachments[4..], &[11, 11 * 23 + 22, 11 * 23, 22 * 23 + 11]);
        assert!(a.closing_loop.is_empty());
        assert_eq!(s.positions.len(), 529 + 8 + 2);
        assert_eq!(a.adjacent_mu_pairs().len(), 8);
    }

    #[test]
    fn reference_mesh_counts() {
        let (a, s) = build_assembly(&config(Variant::FourMu, 23)).unwrap();
        assert_eq!(a.node_count, 529);
        assert_eq!(a.perimeter_loop.len(), 4 * (23 - 1));
        assert_eq!(a.perimeter_loop.len(), 88);
        assert_eq!(a.feature_node_count(), 165);
        assert_eq!(a.central_knot, 11 * 23 + 11);
        assert!((a.node_mass * 529.0 - 2.0).abs() < 1e-12);
        assert_eq!(s.velocities.len(), a.body_count());
        assert!((a.max_mouth_area() - 432.64).abs() < 1e-9);
    }

    #[test]
    fn rejects_small_meshes_and_bad_constants() {
        assert!(build_assembly(&config(Variant::FourMu, 2)).is_err());
        let mut c = config(Variant::FourMu, 9);
        c.net.net_mass = 0.0;
        assert!(build_assembly(&c).is_err());
        let mut c = config(Variant::FourMu, 9);
        c.debris.radius = -1.0;
        assert!(build_assembly(&c).is_err());
    }

    #[test]
    fn feature_loops_are_disjoint_rings() {
        for mesh in [9, 11, 15, 23] {
            let (a, _) = build_assembly(&config(Variant::EightMu, mesh)).unwrap();
            assert_eq!(a.feature_node_count(), default_feature_node_count(mesh));
            a.check_invariants().unwrap();
        }
    }

    #[test]
    fn stowed_net_is_compact_and_slack() {
        let (a, s) = build_assembly(&config(Variant::FourMu, 23)).unwrap();
        for link in &a.links {
            let len = (s.positions[link.b] - s.positions[link.a]).norm();
            assert!(len < link.rest_length);
        }
        let extent = s.positions[..a.node_count]
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(0.0, f64::max);
        assert!((extent - 1.04).abs() < 1e-9);
        for thread in &a.threads {
            let len = (s.positions[thread.b] - s.positions[thread.a]).norm();
            assert!(len < thread.rest_length);
        }
    }

    #[test]
    fn capsule_inertia() {
        let d = RigidBodySpec::new(
            12.0,
            Geometry::Capsule {
                radius: 1.0,
                length: 2.0,
            },
            BodyKind::Debris,
        )
        .unwrap();
        let i = d.principal_inertia();
        assert!((i.x - 6.0).abs() < 1e-12);
        assert!((i.y - 7.0).abs() < 1e-12);
    }
}
