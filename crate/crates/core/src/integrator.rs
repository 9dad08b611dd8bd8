//! Fixed-step fourth-order Runge–Kutta time stepping.
//!
//! On the plane this is classical RK4. On the sphere points are never moved
//! along straight lines: every update is a rotation, so positions stay on
//! the sphere to rounding. The default spherical scheme is the
//! Munthe-Kaas form of RK4 on SO(3): stages are rotation vectors about the
//! base point, combined through the inverse differential of the
//! exponential map, and the step ends with one rotation of the base point.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    energy_diagnostics, ConformalFactor, DynamicsError, EnergyDiagnostics, Geometry, VortexSystem,
};
use crate::geom::{project_tangent, rotate, Vec3};

/// How positions are advanced by a tangent velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    /// Straight-line RK4 on the plane.
    Planar,
    /// Rotational RK4 (Munthe-Kaas) on the unit sphere.
    Rotational,
    /// Rotational update with plainly averaged ambient stage tangents,
    /// projected onto the base tangent plane. Second order only; kept for
    /// comparison.
    RotationalAveraged,
}

impl Advection {
    pub fn for_geometry(geometry: Geometry) -> Self {
        match geometry {
            Geometry::Plane => Advection::Planar,
            Geometry::Sphere | Geometry::ClosedSurface => Advection::Rotational,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub steps: usize,
    pub advection: Advection,
    /// Energy diagnostics are evaluated every this many steps (and always
    /// on the first and last record).
    #[serde(default = "default_diagnostics_every")]
    pub diagnostics_every: usize,
}

fn default_diagnostics_every() -> usize {
    1
}

impl IntegratorConfig {
    pub fn new(dt: f64, steps: usize, advection: Advection) -> Self {
        Self {
            dt,
            steps,
            advection,
            diagnostics_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("time step must be positive, got {}", self.dt));
        }
        if self.diagnostics_every == 0 {
            return Err("diagnostics_every must be at least 1".into());
        }
        Ok(())
    }
}

/// Rotates `p` about `p × u` by the angle `|u| dt`, so the point travels
/// the arc length `|u| dt`. The velocity is projected onto the tangent
/// plane of `p` first.
pub fn advect_sphere(p: &Vec3, u: &Vec3, dt: f64) -> Vec3 {
    let u = project_tangent(u, p);
    rotate(p, &(p.cross(&u) * dt)).normalize()
}

/// Inverse of the differential of the exponential map of so(3), in the
/// cross-product representation: `v − ½ σ×v + c(θ) σ×(σ×v)`.
fn dexp_inv(sigma: &Vec3, v: &Vec3) -> Vec3 {
    let theta2 = sigma.norm_squared();
    let c = if theta2 < 1e-8 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        (1.0 - 0.5 * theta / (0.5 * theta).tan()) / theta2
    };
    let sv = sigma.cross(v);
    v - sv * 0.5 + sigma.cross(&sv) * c
}

/// One RK4 step. `rhs` maps a system to the velocity of every vortex.
/// A negative `dt` integrates backwards.
pub fn rk4_step<R>(
    sys: &VortexSystem,
    rhs: &mut R,
    dt: f64,
    advection: Advection,
) -> Result<VortexSystem, DynamicsError>
where
    R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
{
    match advection {
        Advection::Planar => planar_step(sys, rhs, dt),
        Advection::Rotational => lie_step(sys, rhs, dt),
        Advection::RotationalAveraged => averaged_step(sys, rhs, dt),
    }
}

fn planar_step<R>(sys: &VortexSystem, rhs: &mut R, dt: f64) -> Result<VortexSystem, DynamicsError>
where
    R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
{
    let p = sys.positions();
    let shifted = |k: &[Vec3], c: f64| -> Vec<Vec3> {
        p.iter().zip(k).map(|(x, v)| x + v * (c * dt)).collect()
    };
    let k1 = rhs(sys)?;
    let k2 = rhs(&sys.with_positions(shifted(&k1, 0.5)))?;
    let k3 = rhs(&sys.with_positions(shifted(&k2, 0.5)))?;
    let k4 = rhs(&sys.with_positions(shifted(&k3, 1.0)))?;
    let next = (0..p.len())
        .map(|i| p[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect();
    Ok(sys.with_positions(next))
}

fn lie_step<R>(sys: &VortexSystem, rhs: &mut R, dt: f64) -> Result<VortexSystem, DynamicsError>
where
    R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
{
    let base = sys.positions();
    let n = base.len();
    // Angular velocity q × u(q) generates u(q) = Ω × q at a unit point q.
    let omega = |points: &[Vec3], u: &[Vec3]| -> Vec<Vec3> {
        points.iter().zip(u).map(|(q, v)| q.cross(v)).collect()
    };
    let rotated = |sigma: &[Vec3]| -> Vec<Vec3> {
        base.iter()
            .zip(sigma)
            .map(|(p, s)| rotate(p, s).normalize())
            .collect()
    };

    let k1: Vec<Vec3> = omega(base, &rhs(sys)?).iter().map(|w| w * dt).collect();
    let mut stages = vec![k1];
    for c in [0.5, 0.5, 1.0] {
        let sigma: Vec<Vec3> = stages
            .last()
            .expect("stage")
            .iter()
            .map(|k| k * c)
            .collect();
        let points = rotated(&sigma);
        let u = rhs(&sys.with_positions(points.clone()))?;
        let w = omega(&points, &u);
        let k = (0..n).map(|i| dexp_inv(&sigma[i], &w[i]) * dt).collect();
        stages.push(k);
    }
    let sigma: Vec<Vec3> = (0..n)
        .map(|i| (stages[0][i] + (stages[1][i] + stages[2][i]) * 2.0 + stages[3][i]) / 6.0)
        .collect();
    Ok(sys.with_positions(rotated(&sigma)))
}

fn averaged_step<R>(sys: &VortexSystem, rhs: &mut R, dt: f64) -> Result<VortexSystem, DynamicsError>
where
    R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
{
    let base = sys.positions();
    let advected = |k: &[Vec3], c: f64| -> Vec<Vec3> {
        base.iter()
            .zip(k)
            .map(|(p, v)| advect_sphere(p, v, c * dt))
            .collect()
    };
    let k1 = rhs(sys)?;
    let k2 = rhs(&sys.with_positions(advected(&k1, 0.5)))?;
    let k3 = rhs(&sys.with_positions(advected(&k2, 0.5)))?;
    let k4 = rhs(&sys.with_positions(advected(&k3, 1.0)))?;
    let combined: Vec<Vec3> = (0..base.len())
        .map(|i| (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) / 6.0)
        .collect();
    Ok(sys.with_positions(advected(&combined, 1.0)))
}

/// State of the system after one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    /// Positions where the dynamics run: the plane, or the unit sphere.
    pub positions: Vec<Vec3>,
    /// Positions mapped back to the source surface (closed surfaces only).
    pub surface_positions: Option<Vec<Vec3>>,
    pub diagnostics: Option<EnergyDiagnostics>,
}

/// Turns a state into a [`TrajectoryRecord`].
pub trait Observer {
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        sys: &VortexSystem,
        with_diagnostics: bool,
    ) -> Result<TrajectoryRecord, DynamicsError>;
}

/// Records positions and energy diagnostics for the plane and the sphere,
/// or for a sphere image when given a conformal factor.
pub struct EnergyObserver<'a> {
    factor: Option<&'a dyn ConformalFactor>,
    hints: Vec<usize>,
}

impl<'a> EnergyObserver<'a> {
    pub fn new(factor: Option<&'a dyn ConformalFactor>) -> Self {
        Self {
            factor,
            hints: Vec::new(),
        }
    }
}

impl Observer for EnergyObserver<'_> {
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        sys: &VortexSystem,
        with_diagnostics: bool,
    ) -> Result<TrajectoryRecord, DynamicsError> {
        self.hints.resize(sys.len(), 0);
        let diagnostics = if with_diagnostics {
            Some(energy_diagnostics(sys, self.factor, &mut self.hints)?)
        } else {
            None
        };
        Ok(TrajectoryRecord {
            step,
            time,
            positions: sys.positions().to_vec(),
            surface_positions: None,
            diagnostics,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunAbort {
    /// Step whose evaluation failed.
    pub step: usize,
    pub error: DynamicsError,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: VortexSystem,
    /// Set when the run stopped early; `records` holds the partial run.
    pub abort: Option<RunAbort>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// Integrates `cfg.steps` steps, recording the initial state and every
/// step after it.
pub fn run<R, O>(
    initial: &VortexSystem,
    rhs: &mut R,
    cfg: &IntegratorConfig,
    observer: &mut O,
) -> RunOutcome
where
    R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
    O: Observer + ?Sized,
{
    let every = cfg.diagnostics_every.max(1);
    let wants = |step: usize| step % every == 0 || step == cfg.steps;
    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut state = initial.clone();
    match observer.observe(0, 0.0, &state, true) {
        Ok(r) => records.push(r),
        Err(error) => {
            return RunOutcome {
                records,
                final_state: state,
                abort: Some(RunAbort { step: 0, error }),
            }
        }
    }
    for step in 1..=cfg.steps {
        let next = rk4_step(&state, rhs, cfg.dt, cfg.advection).and_then(|next| {
            let record = observer.observe(step, step as f64 * cfg.dt, &next, wants(step))?;
            Ok((next, record))
        });
        match next {
            Ok((next, record)) => {
                state = next;
                records.push(record);
            }
            Err(error) => {
                return RunOutcome {
                    records,
                    final_state: state,
                    abort: Some(RunAbort { step, error }),
                }
            }
        }
    }
    RunOutcome {
        records,
        final_state: state,
        abort: None,
    }
}


#[cfg(test)]
mod order_tests {
    use super::*;
    use crate::dynamics::{planar_vortex_velocities, sphere_vortex_velocities, PointVortex};

    fn sphere_trio() -> VortexSystem {
        VortexSystem::new(
            Geometry::Sphere,
            &[
                PointVortex::new(Vec3::new(1.0, 0.2, 0.1), 1.0),
                PointVortex::new(Vec3::new(-0.3, 1.0, 0.4), 0.7),
                PointVortex::new(Vec3::new(0.2, -0.5, 1.0), -1.3),
            ],
        )
        .unwrap()
    }

    fn plane_trio() -> VortexSystem {
        VortexSystem::new(
            Geometry::Plane,
            &[
                PointVortex::plane(1.0, 0.0, 1.0),
                PointVortex::plane(-0.5, 0.6, 0.7),
                PointVortex::plane(0.1, -0.8, -1.3),
            ],
        )
        .unwrap()
    }

    fn integrate<R>(sys: &VortexSystem, rhs: &mut R, t: f64, n: usize, adv: Advection) -> Vec<Vec3>
    where
        R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
    {
        let mut s = sys.clone();
        for _ in 0..n {
            s = rk4_step(&s, rhs, t / n as f64, adv).unwrap();
        }
        s.positions().to_vec()
    }

    fn max_err(a: &[Vec3], b: &[Vec3]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn observed_order<R>(sys: &VortexSystem, rhs: &mut R, adv: Advection) -> f64
    where
        R: FnMut(&VortexSystem) -> Result<Vec<Vec3>, DynamicsError>,
    {
        let t = 1.0;
        let reference = integrate(sys, rhs, t, 4096, adv);
        let e1 = max_err(&integrate(sys, rhs, t, 16, adv), &reference);
        let e2 = max_err(&integrate(sys, rhs, t, 32, adv), &reference);
        (e1 / e2).log2()
    }

    #[test]
    fn planar_rk4_is_fourth_order() {
        let p = observed_order(
            &plane_trio(),
            &mut planar_vortex_velocities,
            Advection::Planar,
        );
        assert!(p > 3.8, "order {p}");
    }

    #[test]
    fn rotational_rk4_is_fourth_order() {
        let p = observed_order(
            &sphere_trio(),
            &mut sphere_vortex_velocities,
            Advection::Rotational,
        );
        assert!(p > 3.8, "order {p}");
    }

    #[test]
    fn averaged_rotation_is_only_second_order() {
        let p = observed_order(
            &sphere_trio(),
            &mut sphere_vortex_velocities,
            Advection::RotationalAveraged,
        );
        assert!(p < 2.5, "order {p}");
    }
}
