//! Conformal maps from closed genus-zero meshes to the unit sphere.
//!
//! The sphere image comes from conformalized mean-curvature flow: each step
//! solves `(D_k + δ L₀) f_{k+1} = D_k f_k`, where `L₀` is the cotangent
//! stiffness of the input (held fixed) and `D_k` the lumped mass of the
//! current embedding. Conformal factors are read off edge-length ratios and
//! differentiated per triangle.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ConformalFactor, DynamicsError, FactorSample};
use crate::geom::Vec3;
use crate::mesh::{MeshError, TriangleMesh};
use crate::sparse::{self, CgOptions, SolveError};
use crate::transport::{self, SphereLocator, SurfaceLocation, TransportError};

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 5e-3;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("mesh is not a closed genus-zero surface: {0}")]
    Topology(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("linear solve failed at flow iteration {iteration}: {source}")]
    Solve {
        iteration: usize,
        #[source]
        source: SolveError,
    },
    #[error("flow did not reach sphericity {tolerance:e} in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("triangle {0} has a zero or non-finite edge length")]
    DegenerateLength(usize),
    #[error("vertex {0} belongs to no triangle")]
    IsolatedVertex(usize),
    #[error("expected {expected} per-vertex values, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("invalid flow parameters: {0}")]
    Parameters(String),
}

/// Cotangent stiffness matrix and lumped mass diagonal of a mesh.
///
/// The stiffness is positive semi-definite: off-diagonal entries are
/// `−½(cot α + cot β)` and each diagonal entry is minus its row's
/// off-diagonal sum.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    stiffness: CsrMatrix<f64>,
    mass: Vec<f64>,
}

impl SparseOperator {
    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply_stiffness(&self, values: &[f64]) -> Vec<f64> {
        sparse::mul(&self.stiffness, values)
    }

    /// Stiffness entry `(i, j)`, zero outside the pattern.
    pub fn stiffness_entry(&self, i: usize, j: usize) -> f64 {
        self.stiffness
            .get_entry(i, j)
            .map(|e| e.into_value())
            .unwrap_or(0.0)
    }
}

fn cot(apex: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (u, v) = (a - apex, b - apex);
    u.dot(&v) / u.cross(&v).norm()
}

/// Cotangent stiffness and barycentric (area/3) mass.
pub fn cotan_laplacian(mesh: &TriangleMesh) -> Result<SparseOperator, ConformalError> {
    mesh.check_nondegenerate()?;
    let n = mesh.vertex_count();
    let mut coo = CooMatrix::new(n, n);
    let mut mass = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.corners(t);
        let area = mesh.face_area(t)?;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let w = 0.5 * cot(&p[k], &p[i], &p[j]);
            let (vi, vj) = (tri[i], tri[j]);
            coo.push(vi, vj, -w);
            coo.push(vj, vi, -w);
            coo.push(vi, vi, w);
            coo.push(vj, vj, w);
            mass[tri[k]] += area / 3.0;
        }
    }
    Ok(SparseOperator {
        stiffness: CsrMatrix::from(&coo),
        mass,
    })
}

/// Lumped area/3 mass of `positions` over the triangles of `mesh`.
pub fn lumped_mass(mesh: &TriangleMesh, positions: &[Vec3]) -> Vec<f64> {
    let mut mass = vec![0.0; positions.len()];
    for tri in mesh.triangles() {
        let [a, b, c] = tri.map(|v| positions[v]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        for &v in tri {
            mass[v] += area / 3.0;
        }
    }
    mass
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmcfParams {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_tolerance")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Flow steps taken even when the input already meets `tol`.
    #[serde(default)]
    pub min_iters: usize,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl Default for CmcfParams {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            tol: DEFAULT_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
            min_iters: 0,
        }
    }
}

impl CmcfParams {
    pub fn validate(&self) -> Result<(), ConformalError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ConformalError::Parameters(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ConformalError::Parameters(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.min_iters > self.max_iters {
            return Err(ConformalError::Parameters(
                "min_iters exceeds max_iters".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmcfResult {
    /// Unit vectors, one per input vertex.
    pub positions: Vec<Vec3>,
    pub iterations: usize,
    /// Sphericity residual of the last embedding before radial projection.
    pub residual: f64,
    pub converged: bool,
}

fn area_centroid(mesh: &TriangleMesh, positions: &[Vec3]) -> (Vec3, f64) {
    let mut weighted = Vec3::zeros();
    let mut total = 0.0;
    for tri in mesh.triangles() {
        let [a, b, c] = tri.map(|v| positions[v]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        weighted += (a + b + c) * (area / 3.0);
        total += area;
    }
    (weighted / total, total)
}

/// Recenters at the area centroid and rescales to total area 4π.
fn normalize_embedding(mesh: &TriangleMesh, positions: &mut [Vec3]) {
    let (centroid, area) = area_centroid(mesh, positions);
    let scale = (4.0 * PI / area).sqrt();
    for p in positions.iter_mut() {
        *p = (*p - centroid) * scale;
    }
}

/// `max_v | |v − c| / mean_radius − 1 |` with `c` the area centroid.
pub fn sphericity_residual(mesh: &TriangleMesh, positions: &[Vec3]) -> f64 {
    let (centroid, _) = area_centroid(mesh, positions);
    let radii: Vec<f64> = positions.iter().map(|p| (p - centroid).norm()).collect();
    let mean = radii.iter().sum::<f64>() / radii.len() as f64;
    radii
        .iter()
        .map(|r| (r / mean - 1.0).abs())
        .fold(0.0, f64::max)
}

fn require_closed_genus0(mesh: &TriangleMesh) -> Result<(), ConformalError> {
    let report = mesh.validate_closed_genus0();
    if let Some(reason) = report.rejection_reason() {
        return Err(ConformalError::Topology(reason));
    }
    mesh.check_nondegenerate()?;
    Ok(())
}

/// Flows `mesh` to a round sphere and projects the result onto the unit
/// sphere. Non-convergence is reported through `converged`, not as an error.
pub fn cmcf_to_sphere(
    mesh: &TriangleMesh,
    params: &CmcfParams,
) -> Result<CmcfResult, ConformalError> {
    params.validate()?;
    require_closed_genus0(mesh)?;
    let n = mesh.vertex_count();
    let stiffness = cotan_laplacian(mesh)?.stiffness;
    let diagonal: Vec<usize> = (0..n)
        .map(|i| {
            let row = stiffness.row(i);
            row.col_indices()
                .iter()
                .position(|&j| j == i)
                .expect("closed mesh vertices have diagonal entries")
        })
        .collect();

    let mut positions = mesh.vertices().to_vec();
    normalize_embedding(mesh, &mut positions);
    let mut residual = sphericity_residual(mesh, &positions);
    let mut iterations = 0;
    let options = CgOptions::default();
    while iterations < params.max_iters && (residual >= params.tol || iterations < params.min_iters)
    {
        let mass = lumped_mass(mesh, &positions);
        // System matrix D_k + δ L₀ shares the stiffness pattern.
        let mut system = stiffness.clone();
        for v in system.values_mut() {
            *v *= params.delta;
        }
        {
            let offsets = system.row_offsets().to_vec();
            let values = system.values_mut();
            for i in 0..n {
                values[offsets[i] + diagonal[i]] += mass[i];
            }
        }
        let mut next = positions.clone();
        for axis in 0..3 {
            let rhs: Vec<f64> = positions
                .iter()
                .zip(&mass)
                .map(|(p, m)| p[axis] * m)
                .collect();
            let mut x: Vec<f64> = positions.iter().map(|p| p[axis]).collect();
            sparse::solve_cg(&system, &rhs, &mut x, &options).map_err(|source| {
                ConformalError::Solve {
                    iteration: iterations,
                    source,
                }
            })?;
            for (p, value) in next.iter_mut().zip(x) {
                p[axis] = value;
            }
        }
        positions = next;
        normalize_embedding(mesh, &mut positions);
        iterations += 1;
        residual = sphericity_residual(mesh, &positions);
        log::debug!("cmcf iteration {iterations}: sphericity residual {residual:e}");
    }
    let converged = residual < params.tol;
    let positions = positions.into_iter().map(|p| p.normalize()).collect();
    Ok(CmcfResult {
        positions,
        iterations,
        residual,
        converged,
    })
}

fn edge_lengths(p: [Vec3; 3]) -> [f64; 3] {
    // Index k is the length of the edge opposite corner k.
    [
        (p[2] - p[1]).norm(),
        (p[0] - p[2]).norm(),
        (p[1] - p[0]).norm(),
    ]
}

/// Per-vertex log conformal factors from corner length ratios:
/// `e^{u_i} = (l̃_ij l̃_ki l_jk) / (l_ij l_ki l̃_jk)`, averaged in log space
/// over all corners at vertex `i`. `l̃` are lengths on `mesh`, `l` chord
/// lengths between `sphere_positions`.
pub fn conformal_log_factors(
    mesh: &TriangleMesh,
    sphere_positions: &[Vec3],
) -> Result<Vec<f64>, ConformalError> {
    let n = mesh.vertex_count();
    if sphere_positions.len() != n {
        return Err(ConformalError::ValueCount {
            expected: n,
            actual: sphere_positions.len(),
        });
    }
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let source = edge_lengths(mesh.corners(t));
        let target = edge_lengths(tri.map(|v| sphere_positions[v]));
        if source
            .iter()
            .chain(&target)
            .any(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(ConformalError::DegenerateLength(t));
        }
        for k in 0..3 {
            // Corner k: its two incident edges are opposite k+1 and k+2.
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let ratio = (source[a] * source[b] * target[k]) / (target[a] * target[b] * source[k]);
            sums[tri[k]] += ratio.ln();
            counts[tri[k]] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(v, (s, &c))| {
            if c == 0 {
                Err(ConformalError::IsolatedVertex(v))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

/// Piecewise-linear gradient per triangle:
/// `(1/2A) Σ_k f_k n̂ × e_k` with `e_k` the edge opposite corner `k`,
/// oriented counter-clockwise.
pub fn triangle_gradient(mesh: &TriangleMesh, values: &[f64]) -> Result<Vec<Vec3>, ConformalError> {
    if values.len() != mesh.vertex_count() {
        return Err(ConformalError::ValueCount {
            expected: mesh.vertex_count(),
            actual: values.len(),
        });
    }
    (0..mesh.triangle_count())
        .map(|t| {
            let p = mesh.corners(t);
            let normal = mesh.face_normal(t)?;
            let area = mesh.face_area(t)?;
            let tri = mesh.triangles()[t];
            let mut g = Vec3::zeros();
            for k in 0..3 {
                let edge = p[(k + 2) % 3] - p[(k + 1) % 3];
                g += normal.cross(&edge) * values[tri[k]];
            }
            Ok(g / (2.0 * area))
        })
        .collect()
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn corner_angles(p: [Vec3; 3]) -> [f64; 3] {
    std::array::from_fn(|k| {
        let (u, v) = (p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]);
        u.cross(&v).norm().atan2(u.dot(&v))
    })
}

/// The finished discrete conformal map `M → S²`.
#[derive(Debug, Clone)]
pub struct ConformalAtlas {
    source: TriangleMesh,
    locator: SphereLocator,
    log_factors: Vec<f64>,
    factors: Vec<f64>,
    triangle_grad_h: Vec<Vec3>,
    iterations_used: usize,
    sphericity_residual: f64,
}

impl ConformalAtlas {
    /// Runs the flow and factor extraction. Non-convergence is an error.
    pub fn build(source: TriangleMesh, params: &CmcfParams) -> Result<Self, ConformalError> {
        let flow = cmcf_to_sphere(&source, params)?;
        if !flow.converged {
            return Err(ConformalError::NotConverged {
                iterations: flow.iterations,
                residual: flow.residual,
                tolerance: params.tol,
            });
        }
        Self::from_sphere_positions(source, flow.positions, flow.iterations, flow.residual)
    }

    /// Assembles an atlas from a known sphere image of `source`.
    pub fn from_sphere_positions(
        source: TriangleMesh,
        sphere_positions: Vec<Vec3>,
        iterations_used: usize,
        sphericity_residual: f64,
    ) -> Result<Self, ConformalError> {
        let log_factors = conformal_log_factors(&source, &sphere_positions)?;
        let factors: Vec<f64> = log_factors.iter().map(|u| u.exp()).collect();
        let sphere = source.with_vertices(sphere_positions)?;
        sphere.check_nondegenerate()?;
        let triangle_grad_h = triangle_gradient(&sphere, &factors)?;
        Ok(Self {
            source,
            locator: SphereLocator::new(sphere),
            log_factors,
            factors,
            triangle_grad_h,
            iterations_used,
            sphericity_residual,
        })
    }

    pub fn source_mesh(&self) -> &TriangleMesh {
        &self.source
    }

    pub fn sphere_mesh(&self) -> &TriangleMesh {
        self.locator.mesh()
    }

    pub fn sphere_positions(&self) -> &[Vec3] {
        self.locator.mesh().vertices()
    }

    pub fn locator(&self) -> &SphereLocator {
        &self.locator
    }

    pub fn log_factors(&self) -> &[f64] {
        &self.log_factors
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn triangle_grad_h(&self) -> &[Vec3] {
        &self.triangle_grad_h
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    pub fn sphericity_residual(&self) -> f64 {
        self.sphericity_residual
    }

    /// Sphere image of a point given on the source mesh.
    pub fn to_sphere(&self, loc: &SurfaceLocation) -> Result<Vec3, TransportError> {
        self.locator.sphere_point(loc)
    }

    /// Source-mesh point corresponding to a location on the sphere mesh.
    pub fn to_surface(&self, loc: &SurfaceLocation) -> Result<Vec3, TransportError> {
        transport::position_of(&self.source, loc)
    }

    /// Median over edges of `|l̃_ij − e^{(u_i+u_j)/2} l_ij| / l̃_ij`.
    pub fn median_edge_residual(&self) -> f64 {
        let (m, s) = (self.source.vertices(), self.sphere_positions());
        let residuals = self
            .source
            .edges()
            .into_iter()
            .map(|(i, j)| {
                let source = (m[i] - m[j]).norm();
                let predicted = (0.5 * (self.log_factors[i] + self.log_factors[j])).exp()
                    * (s[i] - s[j]).norm();
                (source - predicted).abs() / source
            })
            .collect();
        median(residuals)
    }

    /// Median over triangles of the largest corner-angle change, in degrees.
    pub fn median_angle_distortion_deg(&self) -> f64 {
        let sphere = self.sphere_mesh();
        let per_triangle = (0..self.source.triangle_count())
            .map(|t| {
                let a = corner_angles(self.source.corners(t));
                let b = corner_angles(sphere.corners(t));
                (0..3)
                    .map(|k| (a[k] - b[k]).abs())
                    .fold(0.0, f64::max)
                    .to_degrees()
            })
            .collect();
        median(per_triangle)
    }

    /// `vertex_index,u,h` rows.
    pub fn factors_csv(&self) -> String {
        let mut out = String::from("vertex_index,u,h\n");
        for (v, (u, h)) in self.log_factors.iter().zip(&self.factors).enumerate() {
            writeln!(out, "{v},{u:?},{h:?}").expect("writing to a string");
        }
        out
    }

    /// `triangle_index,gx,gy,gz` rows.
    pub fn grad_h_csv(&self) -> String {
        let mut out = String::from("triangle_index,gx,gy,gz\n");
        for (t, g) in self.triangle_grad_h.iter().enumerate() {
            writeln!(out, "{t},{:?},{:?},{:?}", g.x, g.y, g.z).expect("writing to a string");
        }
        out
    }
}

impl ConformalFactor for ConformalAtlas {
    fn sample(&self, p: &Vec3, hint: &mut usize) -> Result<FactorSample, DynamicsError> {
        let loc = self.locator.locate(p, *hint)?;
        let t = loc.triangle();
        *hint = t;
        let tri = self.sphere_mesh().triangles()[t];
        let w = loc.weights();
        let h = (0..3).map(|k| w[k] * self.factors[tri[k]]).sum();
        Ok(FactorSample {
            h,
            grad_h: self.triangle_grad_h[t],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn tetrahedron() -> TriangleMesh {
        let s = 1.0 / 3f64.sqrt();
        TriangleMesh::new(
            vec![
                Vec3::new(s, s, s),
                Vec3::new(s, -s, -s),
                Vec3::new(-s, s, -s),
                Vec3::new(-s, -s, s),
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_weights_are_equal() {
        let op = cotan_laplacian(&tetrahedron()).unwrap();
        let w = op.stiffness_entry(0, 1);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            assert!((op.stiffness_entry(i, j) - w).abs() < 1e-14);
            assert_eq!(op.stiffness_entry(i, j), op.stiffness_entry(j, i));
        }
        // Equilateral faces: cot 60° from each side.
        assert!((w + 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let op = cotan_laplacian(&shapes::blob(2)).unwrap();
        let ones = vec![1.0; op.mass().len()];
        for r in op.apply_stiffness(&ones) {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn linear_functions_are_harmonic_on_flat_patches() {
        // Irregular fan around vertex 0 in the plane.
        let ring = [
            (1.0, 0.1),
            (0.4, 0.9),
            (-0.7, 0.8),
            (-1.1, -0.2),
            (-0.3, -1.0),
            (0.8, -0.7),
        ];
        let mut vertices = vec![Vec3::new(0.05, -0.02, 0.0)];
        vertices.extend(ring.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)));
        let triangles = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        let m = TriangleMesh::new(vertices, triangles).unwrap();
        let op = cotan_laplacian(&m).unwrap();
        let f: Vec<f64> = m
            .vertices()
            .iter()
            .map(|p| 2.0 * p.x - 3.0 * p.y + 0.5)
            .collect();
        assert!(op.apply_stiffness(&f)[0].abs() < 1e-10);
    }

    #[test]
    fn mass_sums_to_area() {
        let m = shapes::ellipsoid(2, 1.0, 1.0, 1.5);
        let op = cotan_laplacian(&m).unwrap();
        assert!((op.mass().iter().sum::<f64>() - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn unit_icosphere_is_a_fixed_point() {
        let m = shapes::icosphere(3, 1.0);
        let r = cmcf_to_sphere(&m, &CmcfParams::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!(r.residual < 1e-6);
        for p in &r.positions {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_is_rejected() {
        let m = shapes::torus(1.0, 0.3, 24, 12);
        assert!(matches!(
            cmcf_to_sphere(&m, &CmcfParams::default()),
            Err(ConformalError::Topology(_))
        ));
    }

    #[test]
    fn ellipsoid_converges() {
        let m = shapes::ellipsoid(4, 1.0, 1.0, 1.5);
        let r = cmcf_to_sphere(&m, &CmcfParams::default()).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        assert!(r.residual < DEFAULT_TOLERANCE);
    }

    #[test]
    fn sphericity_floor_shrinks_with_refinement() {
        // The fixed-stiffness flow stalls at a mesh-dependent roundness.
        let params = CmcfParams {
            tol: 1e-12,
            max_iters: 120,
            ..CmcfParams::default()
        };
        let coarse = cmcf_to_sphere(&shapes::ellipsoid(3, 1.0, 1.0, 1.5), &params).unwrap();
        let fine = cmcf_to_sphere(&shapes::ellipsoid(4, 1.0, 1.0, 1.5), &params).unwrap();
        assert!(!fine.converged);
        assert!(fine.residual < 3e-3, "{}", fine.residual);
        assert!(coarse.residual > 3.0 * fine.residual);
    }

    #[test]
    fn stiffness_is_fixed_across_iterations() {
        // A forced extra step on a round input leaves it nearly round.
        let m = shapes::icosphere(3, 1.0);
        let params = CmcfParams {
            min_iters: 1,
            ..CmcfParams::default()
        };
        let r = cmcf_to_sphere(&m, &params).unwrap();
        assert_eq!(r.iterations, 1);
        let atlas = ConformalAtlas::from_sphere_positions(m, r.positions, r.iterations, r.residual)
            .unwrap();
        for h in atlas.factors() {
            assert!((h - 1.0).abs() < 1e-3, "{h}");
        }
    }

    #[test]
    fn identity_map_has_unit_factors() {
        let m = shapes::icosphere(2, 1.0);
        let u = conformal_log_factors(&m, m.vertices()).unwrap();
        assert!(u.iter().all(|u| u.abs() < 1e-12));
    }

    #[test]
    fn scaled_sphere_factors_equal_the_radius() {
        let unit = shapes::icosphere(2, 1.0);
        for r in [0.5, 2.0, 5.0] {
            let u = conformal_log_factors(&unit.scaled(r), unit.vertices()).unwrap();
            for u in u {
                assert!((u.exp() / r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_landmarks() {
        let m = TriangleMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let g = triangle_gradient(&m, &[0.0, 1.0, 0.0]).unwrap();
        assert!((g[0] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let g = triangle_gradient(&m, &[4.0, 4.0, 4.0]).unwrap();
        assert!(g[0].norm() < 1e-15);
        assert!(triangle_gradient(&m, &[1.0]).is_err());
    }

    #[test]
    fn atlas_of_identity_samples_unit_factor() {
        let m = shapes::icosphere(3, 1.0);
        let atlas = ConformalAtlas::build(m, &CmcfParams::default()).unwrap();
        assert_eq!(atlas.iterations_used(), 0);
        let mut hint = 0;
        let s = atlas
            .sample(&Vec3::new(0.3, -0.4, 0.5).normalize(), &mut hint)
            .unwrap();
        assert!((s.h - 1.0).abs() < 1e-12);
        assert!(s.grad_h.norm() < 1e-10);
        assert!(atlas.median_edge_residual() < 1e-12);
        assert!(atlas.median_angle_distortion_deg() < 1e-9);
        assert!(atlas.factors_csv().starts_with("vertex_index,u,h\n0,"));
        assert_eq!(
            atlas.grad_h_csv().lines().count(),
            atlas.sphere_mesh().triangle_count() + 1
        );
    }
}
