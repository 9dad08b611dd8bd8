//! Moving points between a mesh and its sphere image.
//!
//! A point on a triangle mesh is stored as a [`SurfaceLocation`]: a triangle
//! index plus barycentric coordinates `(s, t)` such that the position is
//! `p₁ + s (p₂ − p₁) + t (p₃ − p₁)`. Because a mesh and its sphere image
//! share connectivity, the same location addresses corresponding points on
//! both, which makes the piecewise-linear map between them bijective.

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

/// Slack allowed on barycentric coordinates before construction fails.
pub const BARY_SLACK: f64 = 1e-10;

/// Slack on the signed-volume containment tests of the sphere locator.
pub const CONTAINMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("triangle index {index} out of range ({count} triangles)")]
    TriangleIndex { index: usize, count: usize },
    #[error("barycentric coordinates ({s}, {t}) lie outside the triangle")]
    InvalidBarycentric { s: f64, t: f64 },
    #[error("no triangle contains the direction ({x}, {y}, {z})")]
    NotFound { x: f64, y: f64, z: f64 },
    #[error("expected {expected} per-vertex values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("invalid sampling weights: {0}")]
    Weights(String),
}

/// A point on a triangle mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceLocation {
    triangle: usize,
    s: f64,
    t: f64,
}

impl SurfaceLocation {
    /// Coordinates within [`BARY_SLACK`] of the simplex are clamped onto it.
    pub fn new(triangle: usize, s: f64, t: f64) -> Result<Self, TransportError> {
        let inside = s >= -BARY_SLACK && t >= -BARY_SLACK && s + t <= 1.0 + BARY_SLACK;
        if !inside || !s.is_finite() || !t.is_finite() {
            return Err(TransportError::InvalidBarycentric { s, t });
        }
        Ok(Self::clamped(triangle, s, t))
    }

    /// Projects arbitrary coordinates onto the simplex.
    pub fn clamped(triangle: usize, s: f64, t: f64) -> Self {
        let mut s = s.max(0.0);
        let mut t = t.max(0.0);
        let total = s + t;
        if total > 1.0 {
            s /= total;
            t /= total;
        }
        Self { triangle, s, t }
    }

    /// Location of corner `k` (0, 1 or 2) of `triangle`.
    pub fn corner(triangle: usize, k: usize) -> Self {
        let (s, t) = match k {
            0 => (0.0, 0.0),
            1 => (1.0, 0.0),
            _ => (0.0, 1.0),
        };
        Self { triangle, s, t }
    }

    pub fn triangle(&self) -> usize {
        self.triangle
    }

    pub fn bary(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    /// Weights of the three corners.
    pub fn weights(&self) -> [f64; 3] {
        [1.0 - self.s - self.t, self.s, self.t]
    }

    fn check(&self, mesh: &TriangleMesh) -> Result<(), TransportError> {
        if self.triangle >= mesh.triangle_count() {
            return Err(TransportError::TriangleIndex {
                index: self.triangle,
                count: mesh.triangle_count(),
            });
        }
        Ok(())
    }
}

/// Which way [`map_location`] carries a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    SourceToSphere,
    SphereToSource,
}

/// `p₁ + s (p₂ − p₁) + t (p₃ − p₁)`.
pub fn position_of(mesh: &TriangleMesh, loc: &SurfaceLocation) -> Result<Vec3, TransportError> {
    loc.check(mesh)?;
    let [a, b, c] = mesh.corners(loc.triangle);
    Ok(a + (b - a) * loc.s + (c - a) * loc.t)
}

/// Maps a location between two meshes with shared connectivity. Triangle
/// and barycentric coordinates carry over unchanged; only the mesh they are
/// evaluated against differs.
pub fn map_location(
    source: &TriangleMesh,
    sphere: &TriangleMesh,
    loc: &SurfaceLocation,
    direction: MapDirection,
) -> Result<SurfaceLocation, TransportError> {
    let target = match direction {
        MapDirection::SourceToSphere => sphere,
        MapDirection::SphereToSource => source,
    };
    loc.check(target)?;
    Ok(*loc)
}

/// Barycentric interpolation of per-vertex values.
pub fn interpolate_scalar(
    mesh: &TriangleMesh,
    values: &[f64],
    loc: &SurfaceLocation,
) -> Result<f64, TransportError> {
    loc.check(mesh)?;
    if values.len() != mesh.vertex_count() {
        return Err(TransportError::ValueCount {
            expected: mesh.vertex_count(),
            actual: values.len(),
        });
    }
    let tri = mesh.triangles()[loc.triangle];
    let w = loc.weights();
    Ok(w[0] * values[tri[0]] + w[1] * values[tri[1]] + w[2] * values[tri[2]])
}

/// Barycentric coordinates of the orthogonal projection of `point` onto the
/// plane of triangle `t`, clamped to the triangle.
pub fn locate_in_triangle(
    mesh: &TriangleMesh,
    t: usize,
    point: &Vec3,
) -> Result<SurfaceLocation, TransportError> {
    let (s, u) = raw_bary(mesh, t, point)?;
    Ok(SurfaceLocation::clamped(t, s, u))
}

fn raw_bary(mesh: &TriangleMesh, t: usize, point: &Vec3) -> Result<(f64, f64), TransportError> {
    if t >= mesh.triangle_count() {
        return Err(TransportError::TriangleIndex {
            index: t,
            count: mesh.triangle_count(),
        });
    }
    let [a, b, c] = mesh.corners(t);
    let e1 = b - a;
    let e2 = c - a;
    let d = point - a;
    let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
    let (r1, r2) = (d.dot(&e1), d.dot(&e2));
    let det = g11 * g22 - g12 * g12;
    Ok(((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det))
}

/// Closest point of the mesh to `point`, by exhaustive search.
pub fn closest_location(mesh: &TriangleMesh, point: &Vec3) -> SurfaceLocation {
    let mut best = (f64::INFINITY, SurfaceLocation::corner(0, 0));
    for t in 0..mesh.triangle_count() {
        let loc = closest_on_triangle(mesh, t, point);
        let q = position_of(mesh, &loc).expect("triangle index in range");
        let d2 = (q - point).norm_squared();
        if d2 < best.0 {
            best = (d2, loc);
        }
    }
    best.1
}

fn closest_on_triangle(mesh: &TriangleMesh, t: usize, point: &Vec3) -> SurfaceLocation {
    let (s, u) = raw_bary(mesh, t, point).expect("triangle index in range");
    if s >= 0.0 && u >= 0.0 && s + u <= 1.0 {
        return SurfaceLocation::clamped(t, s, u);
    }
    // Outside: the closest point lies on one of the three edges.
    let [a, b, c] = mesh.corners(t);
    let on_segment = |p: Vec3, q: Vec3| -> f64 {
        let e = q - p;
        ((point - p).dot(&e) / e.norm_squared()).clamp(0.0, 1.0)
    };
    let x_bc = on_segment(b, c);
    let candidates = [
        (on_segment(a, b), 0.0),
        (0.0, on_segment(a, c)),
        (1.0 - x_bc, x_bc),
    ];
    candidates
        .into_iter()
        .map(|(s, u)| {
            let loc = SurfaceLocation::clamped(t, s, u);
            let q = a + (b - a) * loc.s + (c - a) * loc.t;
            ((q - point).norm_squared(), loc)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, loc)| loc)
        .expect("three candidates")
}

/// Point location on a mesh whose vertices lie on the unit sphere, by
/// radial (gnomonic) projection.
#[derive(Debug, Clone)]
pub struct SphereLocator {
    mesh: TriangleMesh,
    neighbors: Vec<[Option<usize>; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
}

/// Signed volumes `p·(b×c)`, `p·(c×a)`, `p·(a×b)`; all nonnegative when the
/// ray through `p` crosses the triangle.
fn signed_volumes(mesh: &TriangleMesh, t: usize, p: &Vec3) -> [f64; 3] {
    let [a, b, c] = mesh.corners(t);
    [
        p.dot(&b.cross(&c)),
        p.dot(&c.cross(&a)),
        p.dot(&a.cross(&b)),
    ]
}

impl SphereLocator {
    pub fn new(sphere_mesh: TriangleMesh) -> Self {
        let neighbors = sphere_mesh.triangle_neighbors();
        let vertex_triangles = sphere_mesh.vertex_triangles();
        Self {
            mesh: sphere_mesh,
            neighbors,
            vertex_triangles,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Whether the ray from the origin through `p` meets triangle `t`.
    pub fn contains(&self, t: usize, p: &Vec3) -> bool {
        let v = signed_volumes(&self.mesh, t, p);
        v.iter().all(|&x| x >= -CONTAINMENT_EPS) && v.iter().sum::<f64>() > 0.0
    }

    /// Finds the triangle whose radial projection contains `p` by walking
    /// from `hint`, falling back to a breadth-first sweep. Among several
    /// containing triangles (points on shared edges or vertices) the lowest
    /// index wins.
    pub fn locate(&self, p: &Vec3, hint: usize) -> Result<SurfaceLocation, TransportError> {
        let count = self.mesh.triangle_count();
        let mut current = if hint < count { hint } else { 0 };
        let mut found = None;
        for _ in 0..2 * count {
            if self.contains(current, p) {
                found = Some(current);
                break;
            }
            let v = signed_volumes(&self.mesh, current, p);
            // Volume k is opposite corner k; the edge opposite corner k runs
            // from corner k + 1 to k + 2, i.e. neighbor slot (k + 1) % 3.
            let k = (0..3)
                .min_by(|&i, &j| v[i].total_cmp(&v[j]))
                .expect("three volumes");
            match self.neighbors[current][(k + 1) % 3] {
                Some(next) => current = next,
                None => break,
            }
        }
        let t = match found {
            Some(t) => t,
            None => self.sweep(p, current)?,
        };
        let t = self.lowest_containing(t, p);
        Ok(self.bary_in(t, p))
    }

    fn sweep(&self, p: &Vec3, start: usize) -> Result<usize, TransportError> {
        let mut seen = vec![false; self.mesh.triangle_count()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(t) = queue.pop_front() {
            if self.contains(t, p) {
                return Ok(t);
            }
            for n in self.neighbors[t].iter().flatten() {
                if !seen[*n] {
                    seen[*n] = true;
                    queue.push_back(*n);
                }
            }
        }
        // Disconnected pieces are not reachable by the sweep.
        (0..self.mesh.triangle_count())
            .find(|&t| self.contains(t, p))
            .ok_or(TransportError::NotFound {
                x: p.x,
                y: p.y,
                z: p.z,
            })
    }

    fn lowest_containing(&self, t: usize, p: &Vec3) -> usize {
        let v = signed_volumes(&self.mesh, t, p);
        let scale = v.iter().sum::<f64>();
        if v.iter().all(|&x| x > 1e-9 * scale) {
            return t;
        }
        let mut best = t;
        for &vertex in &self.mesh.triangles()[t] {
            for &other in &self.vertex_triangles[vertex] {
                if other < best && self.contains(other, p) {
                    best = other;
                }
            }
        }
        best
    }

    /// Barycentric coordinates of the radial projection of `p` into `t`.
    pub fn bary_in(&self, t: usize, p: &Vec3) -> SurfaceLocation {
        let v = signed_volumes(&self.mesh, t, p);
        let total = v[0] + v[1] + v[2];
        SurfaceLocation::clamped(t, v[1] / total, v[2] / total)
    }

    /// Unit-sphere point for a location: the radial projection of the
    /// affine position on the flat triangle.
    pub fn sphere_point(&self, loc: &SurfaceLocation) -> Result<Vec3, TransportError> {
        Ok(position_of(&self.mesh, loc)?.normalize())
    }
}

/// Draws `count` locations on `mesh` (normally the sphere image), choosing
/// triangle `k` with probability `weights[k] / Σ weights` (normally the
/// source-mesh areas) and a uniform point inside it.
pub fn sample_points(
    mesh: &TriangleMesh,
    weights: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<SurfaceLocation>, TransportError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_points_with(mesh, weights, count, &mut rng)
}

pub fn sample_points_with<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<SurfaceLocation>, TransportError> {
    if weights.len() != mesh.triangle_count() {
        return Err(TransportError::ValueCount {
            expected: mesh.triangle_count(),
            actual: weights.len(),
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let table = WeightedIndex::new(weights).map_err(|e| TransportError::Weights(e.to_string()))?;
    Ok((0..count)
        .map(|_| {
            let t = table.sample(rng);
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let root = r1.sqrt();
            SurfaceLocation::clamped(t, root * (1.0 - r2), root * r2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn right_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn position_landmarks() {
        let m = right_triangle();
        let first = position_of(&m, &SurfaceLocation::new(0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(first, Vec3::zeros());
        let third = 1.0 / 3.0;
        let c = position_of(&m, &SurfaceLocation::new(0, third, third).unwrap()).unwrap();
        assert!((c - Vec3::new(third, third, 0.0)).norm() < 1e-15);
        assert!(position_of(&m, &SurfaceLocation::corner(1, 0)).is_err());
    }

    #[test]
    fn construction_clamps_within_slack_only() {
        let loc = SurfaceLocation::new(0, -1e-11, 0.5).unwrap();
        assert_eq!(loc.bary(), (0.0, 0.5));
        assert!(SurfaceLocation::new(0, -1e-6, 0.5).is_err());
        assert!(SurfaceLocation::new(0, 0.7, 0.7).is_err());
    }

    #[test]
    fn locate_round_trip() {
        let m = shapes::blob(1);
        for t in [0, 7, 79] {
            let loc = SurfaceLocation::new(t, 0.2, 0.3).unwrap();
            let p = position_of(&m, &loc).unwrap();
            let back = locate_in_triangle(&m, t, &p).unwrap();
            assert!((back.bary().0 - 0.2).abs() < 1e-12);
            assert!((back.bary().1 - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_vertices_and_linear_fields() {
        let m = shapes::ellipsoid(1, 1.0, 2.0, 3.0);
        let values: Vec<f64> = m
            .vertices()
            .iter()
            .map(|v| 0.5 + 2.0 * v.x - v.y + 3.0 * v.z)
            .collect();
        for t in 0..m.triangle_count() {
            for k in 0..3 {
                let loc = SurfaceLocation::corner(t, k);
                let v = m.triangles()[t][k];
                assert_eq!(interpolate_scalar(&m, &values, &loc).unwrap(), values[v]);
            }
            let loc = SurfaceLocation::new(t, 0.25, 0.6).unwrap();
            let p = position_of(&m, &loc).unwrap();
            let expected = 0.5 + 2.0 * p.x - p.y + 3.0 * p.z;
            assert!((interpolate_scalar(&m, &values, &loc).unwrap() - expected).abs() < 1e-12);
        }
        assert!(interpolate_scalar(&m, &values[1..], &SurfaceLocation::corner(0, 0)).is_err());
    }

    #[test]
    fn map_location_is_identity_on_coordinates() {
        let source = shapes::blob(1);
        let sphere = shapes::icosphere(1, 1.0);
        let loc = SurfaceLocation::new(5, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        let there = map_location(&source, &sphere, &loc, MapDirection::SourceToSphere).unwrap();
        let back = map_location(&source, &sphere, &there, MapDirection::SphereToSource).unwrap();
        assert_eq!(back, loc);
        let c_sphere = position_of(&sphere, &there).unwrap();
        let expected = sphere.corners(5).iter().sum::<Vec3>() / 3.0;
        assert!((c_sphere - expected).norm() < 1e-15);
    }

    #[test]
    fn locator_finds_own_locations() {
        let locator = SphereLocator::new(shapes::icosphere(2, 1.0));
        for t in (0..locator.mesh().triangle_count()).step_by(13) {
            let loc = SurfaceLocation::new(t, 0.3, 0.45).unwrap();
            let p = locator.sphere_point(&loc).unwrap();
            let found = locator.locate(&p, t).unwrap();
            assert_eq!(found.triangle(), t);
            assert!((found.bary().0 - 0.3).abs() < 1e-9);
            assert!((found.bary().1 - 0.45).abs() < 1e-9);
            // Walking from far away ends at the same place.
            let far = locator.locate(&p, 0).unwrap();
            assert_eq!(far.triangle(), t);
        }
    }

    #[test]
    fn locator_on_vertex_picks_lowest_incident_triangle() {
        let mesh = shapes::icosphere(2, 1.0);
        let locator = SphereLocator::new(mesh.clone());
        let incident = mesh.vertex_triangles();
        for v in [0, 11, 50] {
            let p = mesh.vertices()[v];
            let loc = locator
                .locate(&p, incident[v][incident[v].len() - 1])
                .unwrap();
            assert_eq!(loc.triangle(), *incident[v].iter().min().unwrap());
            let q = locator.sphere_point(&loc).unwrap();
            assert!((q - p).norm() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_respects_weights() {
        let mesh = shapes::icosphere(0, 1.0);
        let mut weights = vec![0.0; mesh.triangle_count()];
        weights[3] = 1.0;
        let a = sample_points(&mesh, &weights, 50, 9).unwrap();
        let b = sample_points(&mesh, &weights, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|l| l.triangle() == 3));
        assert!(sample_points(&mesh, &weights, 0, 1).unwrap().is_empty());
        assert!(sample_points(&mesh, &[1.0], 3, 1).is_err());
    }
}
