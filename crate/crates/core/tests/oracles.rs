//! Closed-form solutions checked against the integrators.

use std::f64::consts::PI;

use surfvort::dynamics::{
    kinetic_energy, planar_vortex_velocities, sphere_vortex_velocities, Geometry, PointVortex,
    VortexSystem,
};
use surfvort::geom::Vec3;
use surfvort::integrator::{self, Advection, EnergyObserver, IntegratorConfig};

fn rotate_z(p: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
}

fn ring(n: usize, radius: f64, z: f64, strength: f64) -> Vec<PointVortex> {
    (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            PointVortex::new(Vec3::new(radius * a.cos(), radius * a.sin(), z), strength)
        })
        .collect()
}

#[test]
fn planar_ring_rotates_rigidly() {
    // N equal vortices on a circle of radius R turn at Γ(N−1)/(4πR²).
    let (n, r, gamma) = (5, 0.7, 1.3);
    let sys = VortexSystem::new(Geometry::Plane, &ring(n, r, 0.0, gamma)).unwrap();
    let omega = gamma * (n as f64 - 1.0) / (4.0 * PI * r * r);
    let cfg = IntegratorConfig::new(0.01, 100, Advection::Planar);
    let out = integrator::run(
        &sys,
        &mut planar_vortex_velocities,
        &cfg,
        &mut EnergyObserver::new(None),
    );
    for (p0, p1) in sys.positions().iter().zip(out.final_state.positions()) {
        assert!((rotate_z(p0, omega) - p1).norm() < 1e-9);
    }
}

#[test]
fn spherical_ring_rotates_rigidly() {
    // Colatitude θ: |Ω| = Γ(N−1) cos θ / (4π sin²θ). The sphere kernel has
    // the opposite handedness to the planar one, so the ring turns clockwise.
    let (n, theta, gamma) = (4, 0.6f64, 0.8);
    let sys =
        VortexSystem::new(Geometry::Sphere, &ring(n, theta.sin(), theta.cos(), gamma)).unwrap();
    let omega = -gamma * (n as f64 - 1.0) * theta.cos() / (4.0 * PI * theta.sin().powi(2));
    let cfg = IntegratorConfig::new(0.01, 100, Advection::Rotational);
    let out = integrator::run(
        &sys,
        &mut sphere_vortex_velocities,
        &cfg,
        &mut EnergyObserver::new(None),
    );
    for (p0, p1) in sys.positions().iter().zip(out.final_state.positions()) {
        assert!((rotate_z(p0, omega) - p1).norm() < 1e-9);
    }
}

#[test]
fn equatorial_ring_is_stationary() {
    let sys = VortexSystem::new(Geometry::Sphere, &ring(6, 1.0, 0.0, 1.0)).unwrap();
    for u in sphere_vortex_velocities(&sys).unwrap() {
        assert!(u.norm() < 1e-14);
    }
}

#[test]
fn spherical_pair_speed() {
    // Opposite pair at angular separation d moves at Γ cot(d/2) / 4π.
    let d = 0.3f64;
    let sys = VortexSystem::new(
        Geometry::Sphere,
        &[
            PointVortex::new(Vec3::new((d / 2.0).cos(), (d / 2.0).sin(), 0.0), 1.0),
            PointVortex::new(Vec3::new((d / 2.0).cos(), -(d / 2.0).sin(), 0.0), -1.0),
        ],
    )
    .unwrap();
    let u = sphere_vortex_velocities(&sys).unwrap();
    let expected = 1.0 / ((d / 2.0).tan() * 4.0 * PI);
    for v in &u {
        assert!((v.norm() - expected).abs() < 1e-13);
    }
    assert!((u[0] - u[1]).norm() < 1e-13);
}

#[test]
fn planar_pair_energy() {
    // E = −Σ_{i<j} ω_i ω_j ln r / 2π, so an opposite pair at r = 2 has ln 2 / 2π.
    let sys = VortexSystem::new(
        Geometry::Plane,
        &[
            PointVortex::plane(1.0, 0.0, 1.0),
            PointVortex::plane(-1.0, 0.0, -1.0),
        ],
    )
    .unwrap();
    let e = kinetic_energy(&sys).unwrap();
    assert!((e - 2f64.ln() / (2.0 * PI)).abs() < 1e-14, "{e}");
}
