//! Procedural test surfaces: subdivided icospheres, ellipsoids, a lobed
//! star-shaped "blob" and a torus.

use std::collections::HashMap;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

/// Icosphere of the given radius. `subdivisions = 4` gives 2562 vertices.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let (vertices, triangles) = unit_icosphere(subdivisions);
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(vertices, triangles).expect("icosphere is well formed")
}

/// Axis-aligned ellipsoid with semi-axes `(a, b, c)`.
pub fn ellipsoid(subdivisions: u32, a: f64, b: f64, c: f64) -> TriangleMesh {
    let (vertices, triangles) = unit_icosphere(subdivisions);
    let vertices = vertices
        .into_iter()
        .map(|v| Vec3::new(a * v.x, b * v.y, c * v.z))
        .collect();
    TriangleMesh::new(vertices, triangles).expect("ellipsoid is well formed")
}

/// Non-convex star-shaped surface with two ear-like lobes, a bump and a
/// dent. Stands in for scanned genus-zero models.
pub fn blob(subdivisions: u32) -> TriangleMesh {
    let lobes: [(Vec3, f64, f64); 4] = [
        (Vec3::new(0.35, 0.25, 1.0).normalize(), 0.55, 0.12),
        (Vec3::new(-0.35, 0.25, 1.0).normalize(), 0.55, 0.12),
        (Vec3::new(0.0, -1.0, 0.2).normalize(), 0.30, 0.30),
        (Vec3::new(1.0, 0.0, -0.3).normalize(), -0.18, 0.25),
    ];
    let (vertices, triangles) = unit_icosphere(subdivisions);
    let vertices = vertices
        .into_iter()
        .map(|d| {
            let mut r = 1.0;
            for (center, amplitude, width) in &lobes {
                let dist2 = (d - center).norm_squared();
                r += amplitude * (-dist2 / width).exp();
            }
            Vec3::new(d.x, 0.8 * d.y, 0.9 * d.z) * r
        })
        .collect();
    TriangleMesh::new(vertices, triangles).expect("blob is well formed")
}

/// Torus around the z axis (genus one, rejected by the conformal pipeline).
pub fn torus(major: f64, minor: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(segments * rings);
    for i in 0..segments {
        let u = std::f64::consts::TAU * i as f64 / segments as f64;
        for j in 0..rings {
            let v = std::f64::consts::TAU * j as f64 / rings as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % segments) * rings + (j % rings);
    let mut triangles = Vec::with_capacity(2 * segments * rings);
    for i in 0..segments {
        for j in 0..rings {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("torus is well formed")
}

fn unit_icosphere(subdivisions: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    (vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (level, v) in [(0, 12), (1, 42), (2, 162), (3, 642), (4, 2562)] {
            let m = icosphere(level, 1.0);
            assert_eq!(m.vertex_count(), v);
            assert_eq!(m.triangle_count(), 2 * v - 4);
        }
    }

    #[test]
    fn generated_surfaces_are_closed_genus0() {
        for m in [icosphere(2, 1.0), ellipsoid(2, 1.0, 1.0, 1.5), blob(3)] {
            let r = m.validate_closed_genus0();
            assert!(r.is_closed_genus0(), "{r:?}");
        }
    }

    #[test]
    fn icosphere_is_outward_oriented() {
        let m = icosphere(2, 1.0);
        for t in 0..m.triangle_count() {
            let c = m.corners(t).iter().sum::<Vec3>();
            assert!(m.face_normal(t).unwrap().dot(&c) > 0.0);
        }
    }

    #[test]
    fn torus_has_zero_euler_characteristic() {
        let r = torus(1.0, 0.3, 24, 12).validate_closed_genus0();
        assert_eq!(r.euler_characteristic, 0);
        assert_eq!(r.boundary_edge_count, 0);
        assert!(r.is_oriented);
        assert!(!r.is_closed_genus0());
    }
}
