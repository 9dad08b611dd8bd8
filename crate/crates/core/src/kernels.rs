//! Closed-form Green's functions of the plane and the unit sphere and their
//! symplectic gradients `n × ∇ₓG`.
//!
//! Velocities follow `u = n × ∇ψ` with `ψ = Σ ωᵢ G(·, pᵢ)` on both
//! geometries. On the plane this fixes `G(x, y) = ln|x − y| / 2π`, the
//! Green's function of `+Δ`, which is the only sign for which the planar
//! velocity law `(1/2π) n × (x − y)/|x − y|²` is the rotated gradient of
//! `G`. The sphere uses `G(x, y) = −ln(sin(d/2)) / 2π`, whose rotated
//! gradient is `(x × y) / (4π (1 − x·y))`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geom::Vec3;

/// Separation (Euclidean on the plane, chordal on the sphere) below which
/// two points are treated as coincident.
pub const SINGULARITY_EPS: f64 = 1e-9;

const PLANE_NORMAL: Vec3 = Vec3::new(0.0, 0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("points are {separation:e} apart, closer than the singularity guard {SINGULARITY_EPS:e}")]
pub struct SingularityError {
    pub separation: f64,
}

/// A point of the plane, embedded in 3D as `(x, y, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn embed(&self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }

    /// Drops the z component.
    pub fn from_embedded(v: &Vec3) -> Self {
        Self { x: v.x, y: v.y }
    }
}

/// A point of the unit sphere, renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Returns `None` for the zero vector or non-finite input.
    pub fn new(v: Vec3) -> Option<Self> {
        let n = v.norm();
        (n > 0.0 && n.is_finite()).then(|| Self(v / n))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Option<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    pub fn vec(&self) -> &Vec3 {
        &self.0
    }
}

/// Geodesic distance on the unit sphere.
pub fn sphere_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    x.0.dot(&y.0).clamp(-1.0, 1.0).acos()
}

/// `ln|x − y| / 2π`.
pub fn green_plane(x: &PlanePoint, y: &PlanePoint) -> Result<f64, SingularityError> {
    green_plane_vec(&x.embed(), &y.embed())
}

/// `−ln(sin(d(x, y)/2)) / 2π`.
pub fn green_sphere(x: &SpherePoint, y: &SpherePoint) -> Result<f64, SingularityError> {
    green_sphere_vec(&x.0, &y.0)
}

/// `(1/2π) n × (x − y)/|x − y|²`, tangent to the plane.
pub fn sgrad_green_plane(x: &PlanePoint, y: &PlanePoint) -> Result<Vec3, SingularityError> {
    Ok(plane_interaction(&x.embed(), &y.embed())? / (2.0 * PI))
}

/// `(1/4π) (x × y)/(1 − x·y)`, tangent to the sphere at `x`.
pub fn sgrad_green_sphere(x: &SpherePoint, y: &SpherePoint) -> Result<Vec3, SingularityError> {
    Ok(sphere_interaction(&x.0, &y.0)? / (4.0 * PI))
}

// Embedded-vector forms used by the pairwise sums.

#[inline]
pub(crate) fn green_plane_vec(x: &Vec3, y: &Vec3) -> Result<f64, SingularityError> {
    let r = (x - y).norm();
    guard(r)?;
    Ok(r.ln() / (2.0 * PI))
}

#[inline]
pub(crate) fn green_sphere_vec(x: &Vec3, y: &Vec3) -> Result<f64, SingularityError> {
    // For unit vectors sin(d/2) is half the chord, which keeps full
    // precision for nearby points where arccos does not.
    let chord = (x - y).norm();
    guard(chord)?;
    let half_sin = (0.5 * chord).min(1.0);
    Ok(-half_sin.ln() / (2.0 * PI))
}

/// `n × (x − y)/|x − y|²` without the `1/2π` factor.
#[inline]
pub(crate) fn plane_interaction(x: &Vec3, y: &Vec3) -> Result<Vec3, SingularityError> {
    let d = x - y;
    let r2 = d.x * d.x + d.y * d.y;
    guard(r2.sqrt())?;
    Ok(PLANE_NORMAL.cross(&d) / r2)
}

/// `(x × y)/(1 − x·y)` without the `1/4π` factor.
#[inline]
pub(crate) fn sphere_interaction(x: &Vec3, y: &Vec3) -> Result<Vec3, SingularityError> {
    let d = x - y;
    let chord2 = d.norm_squared();
    guard(chord2.sqrt())?;
    // 1 − x·y = |x − y|²/2 for unit vectors; the chord form avoids
    // cancellation for close pairs.
    Ok(x.cross(y) / (0.5 * chord2))
}

#[inline]
fn guard(separation: f64) -> Result<(), SingularityError> {
    if separation < SINGULARITY_EPS || !separation.is_finite() {
        Err(SingularityError { separation })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(x: f64, y: f64, z: f64) -> SpherePoint {
        SpherePoint::from_xyz(x, y, z).unwrap()
    }

    #[test]
    fn sphere_distance_landmarks() {
        let x = sp(1.0, 0.0, 0.0);
        assert_eq!(sphere_distance(&x, &x), 0.0);
        assert_eq!(sphere_distance(&x, &sp(-1.0, 0.0, 0.0)), PI);
        assert!((sphere_distance(&x, &sp(0.0, 1.0, 0.0)) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_point_renormalizes() {
        let p = sp(3.0, 4.0, 0.0);
        assert!((p.vec().norm() - 1.0).abs() < 1e-15);
        assert!(SpherePoint::from_xyz(0.0, 0.0, 0.0).is_none());
    }

    #[test]
    fn green_plane_values() {
        let o = PlanePoint::new(0.0, 0.0);
        assert_eq!(green_plane(&PlanePoint::new(1.0, 0.0), &o).unwrap(), 0.0);
        let g = green_plane(&PlanePoint::new(2.0, 0.0), &o).unwrap();
        assert!((g - 0.1103178000763258).abs() < 1e-15, "{g}");
        assert!(green_plane(&o, &o).is_err());
    }

    #[test]
    fn green_sphere_values() {
        let x = sp(1.0, 0.0, 0.0);
        assert!(green_sphere(&x, &sp(-1.0, 0.0, 0.0)).unwrap().abs() < 1e-16);
        let g = green_sphere(&x, &sp(0.0, 1.0, 0.0)).unwrap();
        assert!((g - 2f64.ln() / (4.0 * PI)).abs() < 1e-15);
        assert!((g - 0.0551589000381629).abs() < 1e-13);
        assert!(green_sphere(&x, &x).is_err());
    }

    #[test]
    fn sgrad_landmarks() {
        let u = sgrad_green_plane(&PlanePoint::new(1.0, 0.0), &PlanePoint::new(-1.0, 0.0)).unwrap();
        assert!((u - Vec3::new(0.0, 1.0 / (4.0 * PI), 0.0)).norm() < 1e-16);
        let v = sgrad_green_sphere(&sp(1.0, 0.0, 0.0), &sp(0.0, 1.0, 0.0)).unwrap();
        assert!((v - Vec3::new(0.0, 0.0, 1.0 / (4.0 * PI))).norm() < 1e-16);
    }

    #[test]
    fn antipodal_sgrad_is_zero() {
        let v = sgrad_green_sphere(&sp(0.0, 0.0, 1.0), &sp(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn near_coincident_pairs_are_rejected() {
        let a = PlanePoint::new(0.0, 0.0);
        let b = PlanePoint::new(1e-10, 0.0);
        assert!(sgrad_green_plane(&a, &b).is_err());
        let p = sp(1.0, 0.0, 0.0);
        let q = sp(1.0, 1e-10, 0.0);
        assert!(sgrad_green_sphere(&p, &q).is_err());
    }

    fn unit() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
            let r = (1.0 - z * z).sqrt();
            sp(r * phi.cos(), r * phi.sin(), z)
        })
    }

    proptest! {
        #[test]
        fn green_functions_are_symmetric(
            ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0,
            x in unit(), y in unit(),
        ) {
            let (a, b) = (PlanePoint::new(ax, ay), PlanePoint::new(bx, by));
            if let Ok(g) = green_plane(&a, &b) {
                prop_assert_eq!(g, green_plane(&b, &a).unwrap());
            }
            if let Ok(g) = green_sphere(&x, &y) {
                prop_assert_eq!(g, green_sphere(&y, &x).unwrap());
            }
        }

        #[test]
        fn sgrad_is_tangent(x in unit(), y in unit(),
            ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0) {
            if let Ok(v) = sgrad_green_sphere(&x, &y) {
                prop_assert!((v.dot(x.vec())).abs() < 1e-12 * (1.0 + v.norm()));
                let w = sgrad_green_sphere(&y, &x).unwrap();
                // x × y = −(y × x) with the same scalar denominator.
                prop_assert!((v + w).norm() <= 1e-12 * v.norm().max(1.0));
            }
            let (a, b) = (PlanePoint::new(ax, ay), PlanePoint::new(bx, by));
            if let Ok(v) = sgrad_green_plane(&a, &b) {
                prop_assert_eq!(v.z, 0.0);
                prop_assert!(v.dot(&(a.embed() - b.embed())).abs() < 1e-12 * (1.0 + v.norm()));
            }
        }
    }
}
