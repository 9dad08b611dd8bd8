//! Point-vortex velocities, stream function and energies on the plane, the
//! unit sphere and (through a conformal factor) closed genus-zero surfaces.
//!
//! Closed surfaces are handled on their sphere image: positions are unit
//! vectors and the surface enters only through the conformal factor `h`
//! and its gradient, sampled through [`ConformalFactor`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{CompensatedSum, CompensatedVecSum, Vec3};
use crate::kernels::{
    self, green_plane_vec, green_sphere_vec, plane_interaction, sphere_interaction, PlanePoint,
    SingularityError, SpherePoint,
};
use crate::transport::TransportError;

/// Relative tolerance on `|Σ ωᵢ| / Σ |ωᵢ|` for a balanced system.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// Systems at least this large evaluate their pairwise sums in parallel.
const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Plane,
    Sphere,
    ClosedSurface,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Plane => "plane",
            Geometry::Sphere => "sphere",
            Geometry::ClosedSurface => "closed_surface",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("vortices {first} and {second} collide ({source})")]
    Collision {
        first: usize,
        second: usize,
        source: SingularityError,
    },
    #[error("evaluation point coincides with vortex {vortex} ({source})")]
    FieldSingularity {
        vortex: usize,
        source: SingularityError,
    },
    #[error("total vorticity {total:e} is not zero (tolerance {tolerance:e})")]
    NonzeroTotalVorticity { total: f64, tolerance: f64 },
    #[error("vortex {0} has a non-finite strength")]
    NonFiniteStrength(usize),
    #[error("vortex {0} has an invalid position")]
    InvalidPosition(usize),
    #[error("operation needs {expected} geometry, system is {found}")]
    GeometryMismatch { expected: Geometry, found: Geometry },
    #[error("counter vortex would coincide with vortex {0}")]
    CounterVortexCollision(usize),
    #[error("conformal factor unavailable: {0}")]
    Factor(#[from] TransportError),
    #[error("stream function is not available on {0} geometry")]
    StreamUnsupported(Geometry),
}

/// Sign in front of the conformal self term of the closed-surface law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum SelfTermSign {
    Plus,
    Minus,
}

impl SelfTermSign {
    pub fn value(self) -> f64 {
        match self {
            SelfTermSign::Plus => 1.0,
            SelfTermSign::Minus => -1.0,
        }
    }
}

impl Default for SelfTermSign {
    /// Selected by the metric-Hamiltonian drift experiment in the
    /// acceptance suite.
    fn default() -> Self {
        SelfTermSign::Plus
    }
}

impl TryFrom<i32> for SelfTermSign {
    type Error = String;
    fn try_from(v: i32) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(SelfTermSign::Plus),
            -1 => Ok(SelfTermSign::Minus),
            other => Err(format!("self term sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<SelfTermSign> for i32 {
    fn from(s: SelfTermSign) -> i32 {
        s.value() as i32
    }
}

impl std::str::FromStr for SelfTermSign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(SelfTermSign::Plus),
            "-1" | "-" => Ok(SelfTermSign::Minus),
            other => Err(format!("self term sign must be +1 or -1, got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointVortex {
    pub position: Vec3,
    pub strength: f64,
}

impl PointVortex {
    pub fn new(position: Vec3, strength: f64) -> Self {
        Self { position, strength }
    }

    pub fn plane(x: f64, y: f64, strength: f64) -> Self {
        Self::new(Vec3::new(x, y, 0.0), strength)
    }
}

/// An ordered set of point vortices on one geometry. Positions are
/// embedded in 3D: `z = 0` on the plane, unit vectors on the sphere and on
/// the sphere image of a closed surface. Strengths never change.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexSystem {
    geometry: Geometry,
    positions: Vec<Vec3>,
    strengths: Arc<[f64]>,
}

impl VortexSystem {
    /// Validates strengths and positions, projects positions onto the
    /// geometry and rejects coincident pairs.
    pub fn new(geometry: Geometry, vortices: &[PointVortex]) -> Result<Self, DynamicsError> {
        let mut positions = Vec::with_capacity(vortices.len());
        let mut strengths = Vec::with_capacity(vortices.len());
        for (i, v) in vortices.iter().enumerate() {
            if !v.strength.is_finite() {
                return Err(DynamicsError::NonFiniteStrength(i));
            }
            positions.push(normalize_position(geometry, &v.position, i)?);
            strengths.push(v.strength);
        }
        let sys = Self {
            geometry,
            positions,
            strengths: strengths.into(),
        };
        sys.check_distinct()?;
        Ok(sys)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn vortices(&self) -> impl Iterator<Item = PointVortex> + '_ {
        self.positions
            .iter()
            .zip(self.strengths.iter())
            .map(|(&position, &strength)| PointVortex { position, strength })
    }

    /// Same strengths at new positions. Positions are taken as given.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        Self {
            geometry: self.geometry,
            positions,
            strengths: Arc::clone(&self.strengths),
        }
    }

    /// Reinterprets the positions on another geometry.
    pub fn on_geometry(&self, geometry: Geometry) -> Result<Self, DynamicsError> {
        let vortices: Vec<PointVortex> = self.vortices().collect();
        Self::new(geometry, &vortices)
    }

    pub fn total_vorticity(&self) -> f64 {
        self.strengths
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn total_abs_vorticity(&self) -> f64 {
        self.strengths
            .iter()
            .map(|w| w.abs())
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn is_balanced(&self) -> bool {
        self.total_vorticity().abs() <= BALANCE_TOLERANCE * self.total_abs_vorticity()
    }

    fn check_balanced(&self) -> Result<(), DynamicsError> {
        if self.is_balanced() {
            Ok(())
        } else {
            Err(DynamicsError::NonzeroTotalVorticity {
                total: self.total_vorticity(),
                tolerance: BALANCE_TOLERANCE * self.total_abs_vorticity(),
            })
        }
    }

    fn check_distinct(&self) -> Result<(), DynamicsError> {
        for j in 0..self.len() {
            for i in 0..j {
                let separation = (self.positions[j] - self.positions[i]).norm();
                if separation < kernels::SINGULARITY_EPS {
                    return Err(DynamicsError::Collision {
                        first: i,
                        second: j,
                        source: SingularityError { separation },
                    });
                }
            }
        }
        Ok(())
    }

    fn expect(&self, expected: Geometry) -> Result<(), DynamicsError> {
        if self.geometry == expected {
            Ok(())
        } else {
            Err(DynamicsError::GeometryMismatch {
                expected,
                found: self.geometry,
            })
        }
    }

    fn expect_spherical(&self) -> Result<(), DynamicsError> {
        match self.geometry {
            Geometry::Sphere | Geometry::ClosedSurface => Ok(()),
            found => Err(DynamicsError::GeometryMismatch {
                expected: Geometry::Sphere,
                found,
            }),
        }
    }
}

fn normalize_position(geometry: Geometry, p: &Vec3, index: usize) -> Result<Vec3, DynamicsError> {
    if !p.iter().all(|c| c.is_finite()) {
        return Err(DynamicsError::InvalidPosition(index));
    }
    match geometry {
        Geometry::Plane => Ok(Vec3::new(p.x, p.y, 0.0)),
        Geometry::Sphere | Geometry::ClosedSurface => SpherePoint::new(*p)
            .map(|s| *s.vec())
            .ok_or(DynamicsError::InvalidPosition(index)),
    }
}

/// Conformal factor `h` and its gradient at a point of the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorSample {
    pub h: f64,
    pub grad_h: Vec3,
}

/// A conformal factor field on the unit sphere.
pub trait ConformalFactor: Sync {
    /// Samples the field at unit vector `p`. `hint` is a starting guess for
    /// any point-location search and is updated to the containing cell.
    fn sample(&self, p: &Vec3, hint: &mut usize) -> Result<FactorSample, DynamicsError>;
}

/// Constant conformal factor; `UniformFactor(1.0)` is the identity map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformFactor(pub f64);

impl ConformalFactor for UniformFactor {
    fn sample(&self, _p: &Vec3, _hint: &mut usize) -> Result<FactorSample, DynamicsError> {
        Ok(FactorSample {
            h: self.0,
            grad_h: Vec3::zeros(),
        })
    }
}

type Interaction = fn(&Vec3, &Vec3) -> Result<Vec3, SingularityError>;

/// `Σ_{i≠j} ωᵢ K(p_j, pᵢ)` for every j.
fn pairwise_sums(sys: &VortexSystem, interaction: Interaction) -> Result<Vec<Vec3>, DynamicsError> {
    let positions = &sys.positions;
    let strengths = &sys.strengths;
    let one = |j: usize| -> Result<Vec3, DynamicsError> {
        let mut acc = CompensatedVecSum::new();
        let pj = &positions[j];
        for (i, (pi, &wi)) in positions.iter().zip(strengths.iter()).enumerate() {
            if i == j {
                continue;
            }
            let k = interaction(pj, pi).map_err(|source| DynamicsError::Collision {
                first: i.min(j),
                second: i.max(j),
                source,
            })?;
            acc.add(&(k * wi));
        }
        Ok(acc.value())
    };
    if positions.len() >= PARALLEL_THRESHOLD {
        (0..positions.len()).into_par_iter().map(one).collect()
    } else {
        (0..positions.len()).map(one).collect()
    }
}

/// `Σᵢ ωᵢ K(x, pᵢ)`.
fn field_sum(
    x: &Vec3,
    sys: &VortexSystem,
    interaction: Interaction,
) -> Result<Vec3, DynamicsError> {
    let mut acc = CompensatedVecSum::new();
    for (i, (pi, &wi)) in sys.positions.iter().zip(sys.strengths.iter()).enumerate() {
        let k = interaction(x, pi)
            .map_err(|source| DynamicsError::FieldSingularity { vortex: i, source })?;
        acc.add(&(k * wi));
    }
    Ok(acc.value())
}

/// `u(p_j) = (1/2π) Σ_{i≠j} ωᵢ n × (p_j − pᵢ)/|p_j − pᵢ|²`.
pub fn planar_vortex_velocities(sys: &VortexSystem) -> Result<Vec<Vec3>, DynamicsError> {
    sys.expect(Geometry::Plane)?;
    let mut u = pairwise_sums(sys, plane_interaction)?;
    u.iter_mut().for_each(|v| *v /= 2.0 * PI);
    Ok(u)
}

/// Velocity at a passive point of the plane: the full sum over vortices.
pub fn planar_field_velocity(x: &PlanePoint, sys: &VortexSystem) -> Result<Vec3, DynamicsError> {
    sys.expect(Geometry::Plane)?;
    Ok(field_sum(&x.embed(), sys, plane_interaction)? / (2.0 * PI))
}

/// `u(p_j) = (1/4π) Σ_{i≠j} ωᵢ (p_j × pᵢ)/(1 − p_j·pᵢ)`.
pub fn sphere_vortex_velocities(sys: &VortexSystem) -> Result<Vec<Vec3>, DynamicsError> {
    sys.expect(Geometry::Sphere)?;
    let mut u = pairwise_sums(sys, sphere_interaction)?;
    u.iter_mut().for_each(|v| *v /= 4.0 * PI);
    Ok(u)
}

pub fn sphere_field_velocity(x: &SpherePoint, sys: &VortexSystem) -> Result<Vec3, DynamicsError> {
    sys.expect(Geometry::Sphere)?;
    Ok(field_sum(x.vec(), sys, sphere_interaction)? / (4.0 * PI))
}

/// Closed-surface vortex velocities on the sphere image:
///
/// `u(p_j) = 1/(4π h_j²) [ Σ_{i≠j} ωᵢ (p_j × pᵢ)/(1 − p_j·pᵢ) + σ (ω_j/h_j) p_j × ∇h_j ]`
///
/// with `σ` the self-term sign. Requires zero total vorticity.
pub fn surface_vortex_velocities(
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
    sign: SelfTermSign,
) -> Result<Vec<Vec3>, DynamicsError> {
    let mut hints = vec![0; sys.len()];
    surface_vortex_velocities_with_hints(sys, factor, sign, &mut hints)
}

/// As [`surface_vortex_velocities`], reusing and updating per-vortex
/// location hints.
pub fn surface_vortex_velocities_with_hints(
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
    sign: SelfTermSign,
    hints: &mut [usize],
) -> Result<Vec<Vec3>, DynamicsError> {
    sys.expect_spherical()?;
    sys.check_balanced()?;
    let samples = sample_factors(sys, factor, hints)?;
    let mut u = pairwise_sums(sys, sphere_interaction)?;
    for (j, v) in u.iter_mut().enumerate() {
        let FactorSample { h, grad_h } = samples[j];
        let p = &sys.positions[j];
        let self_term = p.cross(&grad_h) * (sign.value() * sys.strengths[j] / h);
        *v = (*v + self_term) / (4.0 * PI * h * h);
    }
    Ok(u)
}

fn sample_factors(
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
    hints: &mut [usize],
) -> Result<Vec<FactorSample>, DynamicsError> {
    assert_eq!(hints.len(), sys.len());
    sys.positions
        .iter()
        .zip(hints.iter_mut())
        .map(|(p, hint)| factor.sample(p, hint))
        .collect()
}

/// `u(x) = 1/(4π h(x)²) Σᵢ ωᵢ (x × pᵢ)/(1 − x·pᵢ)` at a passive point of the
/// sphere image.
pub fn surface_field_velocity(
    x: &SpherePoint,
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
) -> Result<Vec3, DynamicsError> {
    sys.expect_spherical()?;
    sys.check_balanced()?;
    let mut hint = 0;
    let FactorSample { h, .. } = factor.sample(x.vec(), &mut hint)?;
    Ok(field_sum(x.vec(), sys, sphere_interaction)? / (4.0 * PI * h * h))
}

/// `ψ(x) = Σᵢ ωᵢ G(x, pᵢ)` with the geometry's Green's function.
pub fn stream_function(x: &Vec3, sys: &VortexSystem) -> Result<f64, DynamicsError> {
    let green: fn(&Vec3, &Vec3) -> Result<f64, SingularityError> = match sys.geometry {
        Geometry::Plane => green_plane_vec,
        Geometry::Sphere => green_sphere_vec,
        Geometry::ClosedSurface => return Err(DynamicsError::StreamUnsupported(sys.geometry)),
    };
    let x = normalize_position(sys.geometry, x, usize::MAX)?;
    let mut acc = CompensatedSum::new();
    for (i, (pi, &wi)) in sys.positions.iter().zip(sys.strengths.iter()).enumerate() {
        let g = green(&x, pi)
            .map_err(|source| DynamicsError::FieldSingularity { vortex: i, source })?;
        acc.add(wi * g);
    }
    Ok(acc.value())
}

/// `E = −Σ_{i<j} ωᵢ ω_j G(pᵢ, p_j)`. Closed surfaces use the sphere kernel
/// on their images.
pub fn kinetic_energy(sys: &VortexSystem) -> Result<f64, DynamicsError> {
    let green: fn(&Vec3, &Vec3) -> Result<f64, SingularityError> = match sys.geometry {
        Geometry::Plane => green_plane_vec,
        Geometry::Sphere | Geometry::ClosedSurface => green_sphere_vec,
    };
    let mut acc = CompensatedSum::new();
    for j in 0..sys.len() {
        for i in 0..j {
            let g = green(&sys.positions[i], &sys.positions[j]).map_err(|source| {
                DynamicsError::Collision {
                    first: i,
                    second: j,
                    source,
                }
            })?;
            acc.add(-sys.strengths[i] * sys.strengths[j] * g);
        }
    }
    Ok(acc.value())
}

/// `H̃ = H − (1/4π) Σ ωᵢ² ln h(pᵢ)` for a balanced system on a sphere image.
pub fn metric_hamiltonian(
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
) -> Result<f64, DynamicsError> {
    let mut hints = vec![0; sys.len()];
    metric_hamiltonian_with_hints(sys, factor, &mut hints)
}

pub fn metric_hamiltonian_with_hints(
    sys: &VortexSystem,
    factor: &dyn ConformalFactor,
    hints: &mut [usize],
) -> Result<f64, DynamicsError> {
    sys.expect_spherical()?;
    sys.check_balanced()?;
    let h = kinetic_energy(sys)?;
    let samples = sample_factors(sys, factor, hints)?;
    let mut acc = CompensatedSum::new();
    acc.add(h);
    for (w, s) in sys.strengths.iter().zip(&samples) {
        acc.add(-w * w * s.h.ln() / (4.0 * PI));
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostics {
    pub kinetic_excess: f64,
    /// Only for closed surfaces.
    pub metric_hamiltonian: Option<f64>,
    pub total_vorticity: f64,
}

pub fn energy_diagnostics(
    sys: &VortexSystem,
    factor: Option<&dyn ConformalFactor>,
    hints: &mut [usize],
) -> Result<EnergyDiagnostics, DynamicsError> {
    let metric_hamiltonian = match (sys.geometry, factor) {
        (Geometry::ClosedSurface, Some(f)) => Some(metric_hamiltonian_with_hints(sys, f, hints)?),
        _ => None,
    };
    Ok(EnergyDiagnostics {
        kinetic_excess: kinetic_energy(sys)?,
        metric_hamiltonian,
        total_vorticity: sys.total_vorticity(),
    })
}

/// How to treat a system whose strengths do not sum to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BalanceMode {
    Reject,
    /// Append one vortex of strength `−Σ ωᵢ` at this position.
    CounterVortex(Vec3),
}

pub fn balance_vorticity(
    sys: &VortexSystem,
    mode: BalanceMode,
) -> Result<VortexSystem, DynamicsError> {
    if sys.is_balanced() {
        return Ok(sys.clone());
    }
    match mode {
        BalanceMode::Reject => Err(DynamicsError::NonzeroTotalVorticity {
            total: sys.total_vorticity(),
            tolerance: BALANCE_TOLERANCE * sys.total_abs_vorticity(),
        }),
        BalanceMode::CounterVortex(position) => {
            let mut vortices: Vec<PointVortex> = sys.vortices().collect();
            vortices.push(PointVortex::new(position, -sys.total_vorticity()));
            VortexSystem::new(sys.geometry, &vortices).map_err(|e| match e {
                DynamicsError::Collision { first, .. } => {
                    DynamicsError::CounterVortexCollision(first)
                }
                other => other,
            })
        }
    }
}
