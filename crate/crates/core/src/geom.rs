//! Small vector helpers and compensated accumulators shared by every module.

use nalgebra::Vector3;

/// Ambient 3-vector. Plane points are embedded as `(x, y, 0)`.
pub type Vec3 = Vector3<f64>;

/// Neumaier-compensated scalar sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Component-wise compensated sum of 3-vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedVecSum {
    parts: [CompensatedSum; 3],
}

impl CompensatedVecSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: &Vec3) {
        self.parts[0].add(v.x);
        self.parts[1].add(v.y);
        self.parts[2].add(v.z);
    }

    #[inline]
    pub fn value(&self) -> Vec3 {
        Vec3::new(
            self.parts[0].value(),
            self.parts[1].value(),
            self.parts[2].value(),
        )
    }
}

/// Compensated sum of a slice of scalars.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Removes the component of `v` along the unit vector `n`.
#[inline]
pub fn project_tangent(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * n.dot(v)
}

/// Rotates `p` by the rotation vector `axis_angle` (Rodrigues).
pub fn rotate(p: &Vec3, axis_angle: &Vec3) -> Vec3 {
    let angle = axis_angle.norm();
    if angle == 0.0 {
        return *p;
    }
    let k = axis_angle / angle;
    let (s, c) = angle.sin_cos();
    p * c + k.cross(p) * s + k * (k.dot(p) * (1.0 - c))
}
