//! Planar and spatial pose types shared across the pipeline.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wrap an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest rotation taking `from` to `to`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    normalize_angle(to - from)
}

/// A rigid motion in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 { x: 0.0, y: 0.0, yaw: 0.0 };

    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    /// `self ∘ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2 {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            yaw: normalize_angle(self.yaw + other.yaw),
        }
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2 {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            yaw: normalize_angle(-self.yaw),
        }
    }

    /// `other` expressed in the frame of `self` (`self⁻¹ ∘ other`).
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lift to 3D with the given height.
    pub fn to_pose6(&self, z: f64) -> Pose6 {
        Pose6 { x: self.x, y: self.y, z, roll: 0.0, pitch: 0.0, yaw: self.yaw }
    }
}

/// A 6-DoF pose stored as translation plus roll/pitch/yaw (`Rz(yaw)·Ry(pitch)·Rx(roll)`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose6 {
    pub const IDENTITY: Pose6 = Pose6 { x: 0.0, y: 0.0, z: 0.0, roll: 0.0, pitch: 0.0, yaw: 0.0 };

    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { x, y, z, roll, pitch, yaw }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, ..Self::IDENTITY }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.x, self.y, self.z),
            UnitQuaternion::from_euler_angles(self.roll, self.pitch, self.yaw),
        )
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let (roll, pitch, yaw) = iso.rotation.euler_angles();
        let t = iso.translation.vector;
        Self { x: t.x, y: t.y, z: t.z, roll, pitch, yaw }
    }

    pub fn compose(&self, other: &Pose6) -> Pose6 {
        Pose6::from_isometry(&(self.to_isometry() * other.to_isometry()))
    }

    pub fn inverse(&self) -> Pose6 {
        Pose6::from_isometry(&self.to_isometry().inverse())
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.to_isometry() * p
    }

    /// Planar part of the pose (drops z, roll and pitch).
    pub fn to_pose2(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }

    /// Camera pose (camera → world) at `eye` with its optical axis along `forward`, using the
    /// optical frame convention +z forward, +x right, +y down. `up` must not be parallel to
    /// `forward`.
    pub fn looking(eye: Point3<f64>, forward: Vector3<f64>, up: Vector3<f64>) -> Pose6 {
        let z = forward.normalize();
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let rot = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, z]));
        Pose6::from_isometry(&Isometry3::from_parts(
            Translation3::from(eye.coords),
            UnitQuaternion::from_rotation_matrix(&rot),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!(normalize_angle(0.0).abs() < 1e-15);
    }

    #[test]
    fn pose6_roundtrip_isometry() {
        let p = Pose6::new(1.0, -2.0, 0.5, 0.1, -0.2, 2.0);
        let q = Pose6::from_isometry(&p.to_isometry());
        assert!((p.x - q.x).abs() < 1e-12);
        assert!((p.roll - q.roll).abs() < 1e-12);
        assert!((p.pitch - q.pitch).abs() < 1e-12);
        assert!((p.yaw - q.yaw).abs() < 1e-12);
    }

    #[test]
    fn looking_camera_axes() {
        let cam = Pose6::looking(Point3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 0.0, 0.0), Vector3::z());
        let iso = cam.to_isometry();
        let fwd = iso.rotation * Vector3::z();
        let right = iso.rotation * Vector3::x();
        let down = iso.rotation * Vector3::y();
        assert!((fwd - Vector3::x()).norm() < 1e-12);
        assert!((right + Vector3::y()).norm() < 1e-12);
        assert!((down + Vector3::z()).norm() < 1e-12);
        assert!((cam.translation() - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn pose2_inverse_compose_identity(x in -50.0..50.0f64, y in -50.0..50.0f64, yaw in -4.0..4.0f64) {
            let p = Pose2::new(x, y, yaw);
            let id = p.compose(&p.inverse());
            prop_assert!(id.x.abs() < 1e-9 && id.y.abs() < 1e-9 && id.yaw.abs() < 1e-12);
            let q = Pose2::new(y, -x, yaw * 0.5);
            let r = p.relative(&p.compose(&q));
            prop_assert!((r.x - q.x).abs() < 1e-9 && (r.y - q.y).abs() < 1e-9);
            prop_assert!(angle_diff(r.yaw, q.yaw).abs() < 1e-12);
        }

        #[test]
        fn normalized_angle_in_half_open_range(a in -100.0..100.0f64) {
            let n = normalize_angle(a);
            prop_assert!(n > -PI && n <= PI);
            prop_assert!(((a - n) / (2.0 * PI)).fract().abs() < 1e-9 || (1.0 - ((a - n) / (2.0 * PI)).fract().abs()) < 1e-9);
        }
    }
}
