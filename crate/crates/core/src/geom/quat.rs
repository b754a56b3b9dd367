use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest norm deviation accepted by [`rotate_point`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a quaternion from raw components and normalizes it.
    pub fn new_normalized(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Self { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::NonUnitQuaternion { norm: n });
        }
        Ok(q.scaled(1.0 / n))
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("zero rotation axis".into()));
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new_normalized(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            w: self.w * k,
            x: self.x * k,
            y: self.y * k,
            z: self.z * k,
        }
    }

    pub fn neg(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self ∘ rhs`: rotating by the result applies `rhs`
    /// first, then `self`. The result is renormalized.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        let q = Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        };
        q.scaled(1.0 / q.norm())
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let Self { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Geodesic angle between two rotations, respecting the double cover.
    pub fn angle_to(&self, other: &Self) -> f64 {
        2.0 * self.dot(other).abs().min(1.0).acos()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// Rotates `p` by the unit quaternion `q` (`q p q*`).
pub fn rotate_point(q: &Quaternion, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = q.norm();
    if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::NonUnitQuaternion { norm: n });
    }
    let u = Vector3::new(q.x, q.y, q.z);
    let t = 2.0 * u.cross(p);
    Ok(p + q.w * t + u.cross(&t))
}

/// Heading angle about the camera +y axis, kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct YawAngle(f64);

impl YawAngle {
    pub fn new(theta: f64) -> Self {
        Self(wrap_angle(theta))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn rotated_by(self, delta: f64) -> Self {
        Self::new(self.0 + delta)
    }

    /// Extracts the yaw of a rotation about +y. Other rotation components
    /// are ignored.
    pub fn from_quaternion(q: &Quaternion) -> Self {
        Self::new(2.0 * q.y.atan2(q.w))
    }

    pub fn to_quaternion(self) -> Quaternion {
        yaw_to_quaternion(self)
    }

    /// Rotation matrix about +y.
    pub fn to_matrix(self) -> Matrix3<f64> {
        let (s, c) = self.0.sin_cos();
        Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
    }

    /// Derivative of [`YawAngle::to_matrix`] with respect to the angle.
    pub fn to_matrix_derivative(self) -> Matrix3<f64> {
        let (s, c) = self.0.sin_cos();
        Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
    }

    /// Index of the 24-way yaw bin this angle falls in (half-open bins).
    pub fn bin(self, bins: usize) -> usize {
        let width = TAU / bins as f64;
        ((self.0 / width).floor() as usize).min(bins - 1)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Rotation about the camera-frame +y axis by the yaw angle.
pub fn yaw_to_quaternion(yaw: YawAngle) -> Quaternion {
    let (s, c) = (0.5 * yaw.radians()).sin_cos();
    Quaternion {
        w: c,
        x: 0.0,
        y: s,
        z: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
        (a - b).amax() < tol
    }

    fn random_quat(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new_normalized(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap()
    }

    #[test]
    fn yaw_quaternion_examples() {
        let q0 = yaw_to_quaternion(YawAngle::new(0.0));
        assert_eq!(q0.as_array(), [1.0, 0.0, 0.0, 0.0]);
        let qpi = yaw_to_quaternion(YawAngle::new(PI));
        assert!(qpi.w.abs() < 1e-15 && (qpi.y - 1.0).abs() < 1e-15);
        let q = yaw_to_quaternion(YawAngle::new(FRAC_PI_2));
        let p = rotate_point(&q, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(close(&p, &Vector3::new(0.0, 0.0, -1.0), 1e-12));
    }

    #[test]
    fn rotate_point_examples() {
        let p = Vector3::new(0.3, -2.0, 5.0);
        assert_eq!(rotate_point(&Quaternion::IDENTITY, &p).unwrap(), p);
        let half = Quaternion { w: 0.0, x: 0.0, y: 1.0, z: 0.0 };
        let r = rotate_point(&half, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(close(&r, &Vector3::new(-1.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn rotate_point_rejects_non_unit() {
        let q = Quaternion { w: 1.0, x: 0.1, y: 0.0, z: 0.0 };
        assert!(matches!(
            rotate_point(&q, &Vector3::zeros()),
            Err(Error::NonUnitQuaternion { .. })
        ));
    }

    /// Independent matrix built from the textbook formula in column form.
    fn matrix_oracle(q: &Quaternion) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        [
            [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (w * y + x * z)],
            [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (w * x + y * z), w * w - x * x - y * y + z * z],
        ]
    }

    #[test]
    fn rotate_point_matches_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = random_quat(&mut rng);
            let p = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let m = matrix_oracle(&q);
            let expected = Vector3::from_fn(|r, _| (0..3).map(|c| m[r][c] * p[c]).sum::<f64>());
            let got = rotate_point(&q, &p).unwrap();
            assert!(close(&got, &expected, 1e-12));
            assert!((got.norm() - p.norm()).abs() < 1e-9);
            assert!(close(&(q.to_matrix() * p), &expected, 1e-12));
        }
    }

    #[test]
    fn composition_matches_sequential_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let (q1, q2) = (random_quat(&mut rng), random_quat(&mut rng));
            let p = Vector3::new(1.0, -0.5, 2.0);
            let seq = rotate_point(&q2, &rotate_point(&q1, &p).unwrap()).unwrap();
            let q21 = q2.compose(&q1);
            assert!((q21.norm() - 1.0).abs() < 1e-9);
            assert!(close(&rotate_point(&q21, &p).unwrap(), &seq, 1e-12));
        }
    }

    #[test]
    fn double_cover_rotates_identically() {
        for k in 0..100 {
            let yaw = YawAngle::new(k as f64 * 0.37);
            let q = yaw_to_quaternion(yaw);
            let p = Vector3::new(0.4, 1.0, -3.0);
            let a = rotate_point(&q, &p).unwrap();
            let b = rotate_point(&q.neg(), &p).unwrap();
            assert!(close(&a, &b, 1e-9));
            assert!(q.angle_to(&q.neg()) < 1e-7);
        }
    }

    #[test]
    fn yaw_round_trip_and_wrap() {
        for k in 0..1000 {
            let theta = k as f64 * TAU / 1000.0;
            let yaw = YawAngle::new(theta);
            let back = YawAngle::from_quaternion(&yaw.to_quaternion());
            let diff = (back.radians() - yaw.radians()).abs();
            assert!(diff < 1e-9 || (TAU - diff) < 1e-9, "theta {theta}");
            let neg = YawAngle::from_quaternion(&yaw.to_quaternion().neg());
            let diff = (neg.radians() - yaw.radians()).abs();
            assert!(diff < 1e-9 || (TAU - diff) < 1e-9);
        }
        assert_eq!(YawAngle::new(-1e-20).radians(), 0.0);
        assert!((YawAngle::new(-FRAC_PI_2).radians() - 1.5 * PI).abs() < 1e-15);
        assert!((YawAngle::new(5.0 * PI).radians() - PI).abs() < 1e-12);
    }

    #[test]
    fn yaw_matrix_matches_quaternion() {
        let yaw = YawAngle::new(1.234);
        let m = yaw.to_matrix();
        let mq = yaw.to_quaternion().to_matrix();
        assert!((m - mq).amax() < 1e-12);
        let h = 1e-6;
        let fd = (YawAngle::new(1.234 + h).to_matrix() - YawAngle::new(1.234 - h).to_matrix()) / (2.0 * h);
        assert!((fd - yaw.to_matrix_derivative()).amax() < 1e-8);
    }

    #[test]
    fn bins_are_half_open() {
        assert_eq!(YawAngle::new(0.0).bin(24), 0);
        assert_eq!(YawAngle::new(TAU - 1e-6).bin(24), 23);
        assert_eq!(YawAngle::new(TAU / 24.0).bin(24), 1);
        assert_eq!(YawAngle::new(FRAC_PI_2).bin(24), 6);
    }
}
