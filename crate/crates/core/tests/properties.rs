use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nalgebra::Rotation3;
use surfvort::dynamics::{
    kinetic_energy, planar_vortex_velocities, sphere_vortex_velocities, Geometry, PointVortex,
    VortexSystem,
};
use surfvort::geom::Vec3;
use surfvort::integrator::{rk4_step, Advection};
use surfvort::shapes;
use surfvort::transport::{self, SphereLocator};

fn strength() -> impl Strategy<Value = f64> {
    prop_oneof![0.3..2.0f64, -2.0..-0.3f64]
}

fn planar_system(n: usize) -> impl Strategy<Value = VortexSystem> {
    prop::collection::vec(((-1.0..1.0f64), (-1.0..1.0f64), strength()), n)
        .prop_filter("separated", |v| {
            (0..v.len()).all(|i| (0..i).all(|j| (v[i].0 - v[j].0).hypot(v[i].1 - v[j].1) > 0.2))
        })
        .prop_map(|v| {
            let vortices: Vec<_> = v
                .iter()
                .map(|&(x, y, w)| PointVortex::plane(x, y, w))
                .collect();
            VortexSystem::new(Geometry::Plane, &vortices).unwrap()
        })
}

fn unit() -> impl Strategy<Value = Vec3> {
    ((-1.0..1.0f64), (0.0..std::f64::consts::TAU)).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn sphere_system(n: usize) -> impl Strategy<Value = VortexSystem> {
    prop::collection::vec((unit(), strength()), n)
        .prop_filter("separated", |v| {
            (0..v.len()).all(|i| (0..i).all(|j| (v[i].0 - v[j].0).norm() > 0.2))
        })
        .prop_map(|v| {
            let vortices: Vec<_> = v.iter().map(|&(p, w)| PointVortex::new(p, w)).collect();
            VortexSystem::new(Geometry::Sphere, &vortices).unwrap()
        })
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    (unit(), -3.0..3.0f64).prop_map(|(axis, angle)| Rotation3::new(axis * angle))
}

fn max_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planar_time_reversal(sys in planar_system(4)) {
        let mut s = sys.clone();
        for _ in 0..50 {
            s = rk4_step(&s, &mut planar_vortex_velocities, 1e-3, Advection::Planar).unwrap();
        }
        for _ in 0..50 {
            s = rk4_step(&s, &mut planar_vortex_velocities, -1e-3, Advection::Planar).unwrap();
        }
        prop_assert!(max_distance(s.positions(), sys.positions()) < 1e-9);
    }

    #[test]
    fn sphere_time_reversal(sys in sphere_system(4)) {
        let mut s = sys.clone();
        for _ in 0..50 {
            s = rk4_step(&s, &mut sphere_vortex_velocities, 1e-3, Advection::Rotational).unwrap();
        }
        for _ in 0..50 {
            s = rk4_step(&s, &mut sphere_vortex_velocities, -1e-3, Advection::Rotational).unwrap();
        }
        prop_assert!(max_distance(s.positions(), sys.positions()) < 1e-9);
        for p in s.positions() {
            prop_assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn planar_rigid_motion(sys in planar_system(5), angle in -3.0..3.0f64, dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let r = Rotation3::from_axis_angle(&Vec3::z_axis(), angle);
        let shift = Vec3::new(dx, dy, 0.0);
        let moved = sys.with_positions(sys.positions().iter().map(|p| r * p + shift).collect());
        let u = planar_vortex_velocities(&sys).unwrap();
        let v = planar_vortex_velocities(&moved).unwrap();
        let rotated: Vec<Vec3> = u.iter().map(|x| r * x).collect();
        prop_assert!(max_distance(&rotated, &v) < 1e-10 * (1.0 + u.iter().map(|x| x.norm()).fold(0.0, f64::max)));
        let (e0, e1) = (kinetic_energy(&sys).unwrap(), kinetic_energy(&moved).unwrap());
        prop_assert!((e0 - e1).abs() < 1e-12 * (1.0 + e0.abs()));
    }

    #[test]
    fn sphere_rotation_invariance(sys in sphere_system(5), r in rotation()) {
        let moved = sys.with_positions(sys.positions().iter().map(|p| (r * p).normalize()).collect());
        let u = sphere_vortex_velocities(&sys).unwrap();
        let v = sphere_vortex_velocities(&moved).unwrap();
        let rotated: Vec<Vec3> = u.iter().map(|x| r * x).collect();
        prop_assert!(max_distance(&rotated, &v) < 1e-10 * (1.0 + u.iter().map(|x| x.norm()).fold(0.0, f64::max)));
        let (e0, e1) = (kinetic_energy(&sys).unwrap(), kinetic_energy(&moved).unwrap());
        prop_assert!((e0 - e1).abs() < 1e-12 * (1.0 + e0.abs()));
    }

    #[test]
    fn planar_scaling_equivariance(sys in planar_system(4), lambda in 0.1..10.0f64, c in 0.1..10.0f64) {
        // Positions ×λ and strengths ×c scale velocities by c/λ.
        let scaled: Vec<PointVortex> = sys
            .vortices()
            .map(|v| PointVortex::new(v.position * lambda, v.strength * c))
            .collect();
        let scaled = VortexSystem::new(Geometry::Plane, &scaled).unwrap();
        let u = planar_vortex_velocities(&sys).unwrap();
        let v = planar_vortex_velocities(&scaled).unwrap();
        for (a, b) in u.iter().zip(&v) {
            prop_assert!((a * (c / lambda) - b).norm() < 1e-10 * (1.0 + a.norm() * c / lambda));
        }
    }

    #[test]
    fn planar_impulse_is_stationary(sys in planar_system(5)) {
        // Σ ω u = 0, so the centre of vorticity does not move.
        let u = planar_vortex_velocities(&sys).unwrap();
        let impulse: Vec3 = sys.strengths().iter().zip(&u).map(|(w, v)| v * *w).sum();
        prop_assert!(impulse.norm() < 1e-12 * (1.0 + u.iter().map(|x| x.norm()).sum::<f64>()));
    }

    #[test]
    fn sphere_moment_is_stationary(sys in sphere_system(5)) {
        let u = sphere_vortex_velocities(&sys).unwrap();
        let moment: Vec3 = sys.strengths().iter().zip(&u).map(|(w, v)| v * *w).sum();
        prop_assert!(moment.norm() < 1e-12 * (1.0 + u.iter().map(|x| x.norm()).sum::<f64>()));
    }
}

/// Radial-projection containment, written independently of the locator.
fn brute_force_contains(corners: &[Vec3; 3], p: &Vec3) -> bool {
    let [a, b, c] = corners;
    let eps = 1e-12;
    p.dot(&a.cross(b)) >= -eps && p.dot(&b.cross(c)) >= -eps && p.dot(&c.cross(a)) >= -eps
}

#[test]
fn locator_matches_brute_force() {
    let mesh = shapes::icosphere(3, 1.0);
    let locator = SphereLocator::new(mesh.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut hint = 0;
    for _ in 0..10_000 {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        let p = Vec3::new(r * phi.cos(), r * phi.sin(), z);
        let loc = locator.locate(&p, hint).unwrap();
        let candidates: Vec<usize> = (0..mesh.triangle_count())
            .filter(|&t| brute_force_contains(&mesh.corners(t), &p))
            .collect();
        assert!(
            candidates.contains(&loc.triangle()),
            "{p:?}: located {} but containing triangles are {candidates:?}",
            loc.triangle()
        );
        // The radial image of the located point is p.
        let q = transport::position_of(&mesh, &loc).unwrap().normalize();
        assert!((q - p).norm() < 1e-9);
        hint = loc.triangle();
    }
}
