//! Quickhull in three dimensions, used only for volume and surface area.

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullMetrics {
    pub volume: f64,
    pub surface_area: f64,
    /// The points are coplanar (or worse); `surface_area` is then the area of
    /// the planar hull and `volume` is zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(v: [usize; 3], pts: &[Vector3<f64>]) -> Self {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { n };
        Self {
            v,
            normal,
            offset: normal.dot(&pts[v[0]]),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Triangulated convex hull as outward-oriented vertex triples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    pub triangles: Vec<[usize; 3]>,
}

/// Volume and facet-area sum of the convex hull of `points`.
pub fn convex_hull_metrics(points: &[Vector3<f64>]) -> HullMetrics {
    match convex_hull(points) {
        Some(hull) => {
            let (mut volume, mut area) = (0.0, 0.0);
            let origin = points[hull.triangles[0][0]];
            for t in &hull.triangles {
                let (a, b, c) = (points[t[0]] - origin, points[t[1]] - origin, points[t[2]] - origin);
                let cross = (b - a).cross(&(c - a));
                area += 0.5 * cross.norm();
                volume += a.dot(&b.cross(&c));
            }
            HullMetrics {
                volume: volume.abs() / 6.0,
                surface_area: area,
                degenerate: false,
            }
        }
        None => HullMetrics {
            volume: 0.0,
            surface_area: planar_hull_area(points),
            degenerate: true,
        },
    }
}

fn tolerance(points: &[Vector3<f64>]) -> f64 {
    let scale = points
        .iter()
        .flat_map(|p| p.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max);
    1e-12 * scale.max(1.0) * 3.0
}

/// Hull triangles, or `None` when the input spans less than three dimensions.
pub fn convex_hull(points: &[Vector3<f64>]) -> Option<ConvexHull> {
    if points.len() < 4 {
        return None;
    }
    let eps = tolerance(points);
    let simplex = initial_simplex(points, eps)?;
    let [i0, i1, i2, i3] = simplex;

    let mut faces: Vec<Face> = Vec::new();
    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = Face::new(tri, points);
        if f.distance(&interior) > 0.0 {
            f = Face::new([tri[0], tri[2], tri[1]], points);
        }
        faces.push(f);
    }
    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(i);
        }
    }

    while let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[fi]
                    .distance(&points[a])
                    .total_cmp(&faces[fi].distance(&points[b]))
            })
            .expect("outside set is non-empty");
        let p = points[apex];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&k| faces[k].alive && faces[k].distance(&p) > eps)
            .collect();

        // Directed edges of visible faces whose reverse is not visible.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &k in &visible {
            let v = faces[k].v;
            for e in 0..3 {
                edges.push((v[e], v[(e + 1) % 3]));
            }
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();

        let mut orphans = Vec::new();
        for &k in &visible {
            faces[k].alive = false;
            orphans.append(&mut faces[k].outside);
        }
        let first_new = faces.len();
        for (a, b) in horizon {
            faces.push(Face::new([a, b, apex], points));
        }
        for i in orphans {
            if i == apex {
                continue;
            }
            if let Some(f) = faces[first_new..]
                .iter_mut()
                .find(|f| f.distance(&points[i]) > eps)
            {
                f.outside.push(i);
            }
        }
    }

    Some(ConvexHull {
        triangles: faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect(),
    })
}

fn initial_simplex(points: &[Vector3<f64>], eps: f64) -> Option<[usize; 4]> {
    // Most distant pair among the axis extremes.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let by = |a: &&Vector3<f64>, b: &&Vector3<f64>| a[axis].total_cmp(&b[axis]);
        let (lo, _) = points.iter().enumerate().min_by(|a, b| by(&a.1, &b.1))?;
        let (hi, _) = points.iter().enumerate().max_by(|a, b| by(&a.1, &b.1))?;
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (0, 0, 0.0);
    for &a in &extremes {
        for &b in &extremes {
            let d = (points[a] - points[b]).norm_squared();
            if d > best.2 {
                best = (a, b, d);
            }
        }
    }
    let (i0, i1) = (best.0, best.1);
    if best.2.sqrt() <= eps {
        return None;
    }
    let dir = (points[i1] - points[i0]).normalize();
    let line_dist = |p: &Vector3<f64>| {
        let r = p - points[i0];
        (r - dir * r.dot(&dir)).norm()
    };
    let i2 = (0..points.len()).max_by(|&a, &b| line_dist(&points[a]).total_cmp(&line_dist(&points[b])))?;
    if line_dist(&points[i2]) <= eps {
        return None;
    }
    let n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let plane_dist = |p: &Vector3<f64>| n.dot(&(p - points[i0])).abs();
    let i3 = (0..points.len()).max_by(|&a, &b| plane_dist(&points[a]).total_cmp(&plane_dist(&points[b])))?;
    if plane_dist(&points[i3]) <= eps {
        return None;
    }
    Some([i0, i1, i2, i3])
}

/// Unit normal of the least-squares plane through `points` and their centroid.
pub fn best_fit_plane(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let n = points.len().max(1) as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    (eig.eigenvectors.column(k).into_owned(), centroid)
}

/// Area of the 2-D hull of the points projected onto their best-fit plane.
fn planar_hull_area(points: &[Vector3<f64>]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let (normal, centroid) = best_fit_plane(points);
    let u = normal.cross(&Vector3::x());
    let u = if u.norm() < 1e-6 { normal.cross(&Vector3::y()) } else { u }.normalize();
    let v = normal.cross(&u);
    let mut flat: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| {
            let d = p - centroid;
            Vector2::new(d.dot(&u), d.dot(&v))
        })
        .collect();
    flat.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    // Andrew's monotone chain.
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * flat.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> = if pass == 0 {
            Box::new(flat.iter())
        } else {
            Box::new(flat.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let m = hull.len();
    if m < 3 {
        return 0.0;
    }
    (0..m)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % m]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        .abs()
        * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube() -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        pts
    }

    #[test]
    fn unit_cube() {
        let m = convex_hull_metrics(&cube());
        assert_eq!((m.volume, m.surface_area), (1.0, 6.0));
        assert!(!m.degenerate);
    }

    #[test]
    fn regular_tetrahedron() {
        let s = 1.0 / 2f64.sqrt();
        let pts = [
            Vector3::new(s, 0.0, 0.0),
            Vector3::new(0.0, s, 0.0),
            Vector3::new(0.0, 0.0, s),
            Vector3::new(s, s, s),
        ];
        let m = convex_hull_metrics(&pts);
        assert_relative_eq!(m.volume, 2f64.sqrt() / 12.0, epsilon = 1e-12);
        assert_relative_eq!(m.surface_area, 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn interior_points_ignored() {
        let mut pts = cube();
        pts.push(Vector3::new(0.5, 0.5, 0.5));
        pts.push(Vector3::new(0.2, 0.7, 0.1));
        let m = convex_hull_metrics(&pts);
        assert_relative_eq!(m.volume, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coplanar_square_is_degenerate() {
        let pts: Vec<_> = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0)]
            .iter()
            .map(|&(x, y)| Vector3::new(x, y, 3.0))
            .collect();
        let m = convex_hull_metrics(&pts);
        assert!(m.degenerate);
        assert_eq!(m.volume, 0.0);
        assert_relative_eq!(m.surface_area, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_has_no_area() {
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let m = convex_hull_metrics(&pts);
        assert!(m.degenerate);
        assert_eq!(m.surface_area, 0.0);
    }

    #[test]
    fn sphere_samples_approach_sphere() {
        let mut pts = Vec::new();
        let n = 40;
        for i in 0..n {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            for j in 0..2 * n {
                let phi = std::f64::consts::PI * j as f64 / n as f64;
                pts.push(Vector3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ));
            }
        }
        let m = convex_hull_metrics(&pts);
        let four_thirds_pi = 4.0 * std::f64::consts::PI / 3.0;
        assert!((m.volume / four_thirds_pi - 1.0).abs() < 0.01);
        assert!((m.surface_area / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.01);
    }
}
