//! Indexed triangle meshes: Wavefront OBJ I/O, topology checks and
//! per-face geometry.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::{CompensatedSum, Vec3};

/// Triangles whose area falls below this fraction of the squared
/// bounding-box diagonal are treated as degenerate.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face index {index} out of range (1..={vertex_count})")]
    FaceIndex {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("triangle {triangle} references vertex {vertex}, mesh has {vertex_count}")]
    VertexIndex {
        triangle: usize,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("mesh has no vertices or no faces")]
    Empty,
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("triangle index {index} out of range ({count} triangles)")]
    TriangleIndex { index: usize, count: usize },
}

/// Immutable indexed triangle mesh. Triangles are counter-clockwise when
/// seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

/// Counts and flags describing the combinatorial shape of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub face_count: usize,
    pub euler_characteristic: i64,
    pub boundary_edge_count: usize,
    /// Undirected edges used by more than two triangles.
    pub nonmanifold_edge_count: usize,
    pub is_oriented: bool,
    pub min_triangle_area: f64,
    pub degenerate_triangle_count: usize,
}

impl TopologyReport {
    /// Whether the mesh can enter the conformal pipeline.
    pub fn is_closed_genus0(&self) -> bool {
        self.euler_characteristic == 2
            && self.boundary_edge_count == 0
            && self.nonmanifold_edge_count == 0
            && self.is_oriented
            && self.degenerate_triangle_count == 0
    }

    /// Human-readable reason for rejection, if any.
    pub fn rejection_reason(&self) -> Option<String> {
        if self.boundary_edge_count != 0 {
            Some(format!(
                "mesh has {} boundary edges",
                self.boundary_edge_count
            ))
        } else if self.nonmanifold_edge_count != 0 {
            Some(format!(
                "mesh has {} non-manifold edges",
                self.nonmanifold_edge_count
            ))
        } else if !self.is_oriented {
            Some("mesh is not consistently oriented".to_string())
        } else if self.euler_characteristic != 2 {
            Some(format!(
                "Euler characteristic is {}, genus zero requires 2",
                self.euler_characteristic
            ))
        } else if self.degenerate_triangle_count != 0 {
            Some(format!(
                "mesh has {} degenerate triangles",
                self.degenerate_triangle_count
            ))
        } else {
            None
        }
    }
}

impl TriangleMesh {
    /// Builds a mesh, checking that every index is in range.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::VertexIndex {
                    triangle: t,
                    vertex: v,
                    vertex_count: n,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::Parse {
                line: 0,
                message: format!(
                    "vertex count mismatch: {} vs {}",
                    vertices.len(),
                    self.vertices.len()
                ),
            });
        }
        Ok(Self {
            vertices,
            triangles: self.triangles.clone(),
        })
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn check_triangle(&self, t: usize) -> Result<(), MeshError> {
        if t >= self.triangles.len() {
            return Err(MeshError::TriangleIndex {
                index: t,
                count: self.triangles.len(),
            });
        }
        Ok(())
    }

    /// Unnormalized normal `e1 × e2`, twice the area in length.
    pub fn area_vector(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, t: usize) -> Result<f64, MeshError> {
        self.check_triangle(t)?;
        Ok(0.5 * self.area_vector(t).norm())
    }

    /// Outward unit normal for a counter-clockwise triangle.
    pub fn face_normal(&self, t: usize) -> Result<Vec3, MeshError> {
        self.check_triangle(t)?;
        let n = self.area_vector(t);
        let double_area = n.norm();
        if 0.5 * double_area < self.degenerate_area_threshold() {
            return Err(MeshError::DegenerateTriangle(t));
        }
        Ok(n / double_area)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.area_vector(t).norm())
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }

    pub fn degenerate_area_threshold(&self) -> f64 {
        let d = self.bounding_box_diagonal();
        DEGENERATE_AREA_FRACTION * d * d
    }

    /// Errors on the first degenerate triangle.
    pub fn check_nondegenerate(&self) -> Result<(), MeshError> {
        let threshold = self.degenerate_area_threshold();
        for t in 0..self.triangles.len() {
            if 0.5 * self.area_vector(t).norm() < threshold {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }
        Ok(())
    }

    pub fn validate_closed_genus0(&self) -> TopologyReport {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), &count) in &directed {
            *undirected.entry((a.min(b), a.max(b))).or_default() += count;
        }
        let boundary_edge_count = undirected.values().filter(|&&c| c == 1).count();
        let nonmanifold_edge_count = undirected.values().filter(|&&c| c > 2).count();
        let is_oriented = directed.values().all(|&c| c == 1);

        let threshold = self.degenerate_area_threshold();
        let areas: Vec<f64> = (0..self.triangles.len())
            .map(|t| 0.5 * self.area_vector(t).norm())
            .collect();
        let min_triangle_area = areas.iter().copied().fold(f64::INFINITY, f64::min);
        let degenerate_triangle_count = areas.iter().filter(|&&a| a < threshold).count();

        let v = self.vertices.len();
        let e = undirected.len();
        let f = self.triangles.len();
        TopologyReport {
            vertex_count: v,
            edge_count: e,
            face_count: f,
            euler_characteristic: v as i64 - e as i64 + f as i64,
            boundary_edge_count,
            nonmanifold_edge_count,
            is_oriented,
            min_triangle_area,
            degenerate_triangle_count,
        }
    }

    /// For each triangle and each corner `k`, the triangle across the edge
    /// from corner `k` to corner `k + 1`, if the edge is shared.
    pub fn triangle_neighbors(&self) -> Vec<[Option<usize>; 3]> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        self.triangles
            .iter()
            .map(|tri| {
                let mut out = [None; 3];
                for (k, slot) in out.iter_mut().enumerate() {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    *slot = owner.get(&(b, a)).copied();
                }
                out
            })
            .collect()
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|tri| (0..3).map(move |k| (tri[k], tri[(k + 1) % 3])))
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v * factor).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let file = std::fs::File::open(path)?;
        Self::read_obj(BufReader::new(file))
    }

    pub fn read_obj(reader: impl Read) -> Result<Self, MeshError> {
        let reader = BufReader::new(reader);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.split('#').next().unwrap_or("");
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("v") => {
                    let coords: Vec<f64> = fields
                        .take(3)
                        .map(|s| {
                            s.parse::<f64>().map_err(|_| MeshError::Parse {
                                line: line_no,
                                message: format!("bad coordinate '{s}'"),
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                        return Err(MeshError::Parse {
                            line: line_no,
                            message: "vertex needs three finite coordinates".into(),
                        });
                    }
                    vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let corners: Vec<usize> = fields
                        .map(|s| parse_face_index(s, vertices.len(), line_no))
                        .collect::<Result<_, _>>()?;
                    if corners.len() < 3 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            message: "face needs at least three corners".into(),
                        });
                    }
                    // Fan triangulation around the first corner.
                    for k in 1..corners.len() - 1 {
                        triangles.push([corners[0], corners[k], corners[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
        }
        out
    }

    pub fn write_obj(&self, mut writer: impl Write) -> Result<(), MeshError> {
        writer.write_all(self.to_obj_string().as_bytes())?;
        Ok(())
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }
}

/// Parses `i`, `i/t`, `i//n` or `i/t/n`; negative indices count back from
/// the most recent vertex.
fn parse_face_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, MeshError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("bad face index '{token}'"),
    })?;
    let resolved = if raw < 0 {
        vertex_count as i64 + raw
    } else {
        raw - 1
    };
    if raw == 0 || resolved < 0 || resolved >= vertex_count as i64 {
        return Err(MeshError::FaceIndex {
            line,
            index: raw,
            vertex_count,
        });
    }
    Ok(resolved as usize)
}
