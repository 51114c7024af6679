use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Point3<f64>,
    /// Unit normal.
    pub normal: Vector3<f64>,
}

impl Plane {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>) -> Self {
        Self { point, normal: normal.normalize() }
    }
}

/// Pinhole camera in continuous image coordinates (pixel `(u, v)` spans `[u, u+1) × [v, v+1)`).
/// `pose` maps the optical frame (+z forward, +x right, +y down) to the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: Pose6,
}

impl CameraModel {
    /// High-resolution grayscale camera with the principal point at the image centre.
    pub fn grayscale(pose: Pose6) -> Self {
        Self { focal: 1250.0, cx: 800.0, cy: 500.0, width: 1600, height: 1000, pose }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("camera needs a positive focal length and size".into()));
        }
        Ok(())
    }

    /// Image coordinates of a world point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<[f64; 2]> {
        let q = self.pose.to_isometry().inverse_transform_point(p);
        (q.z > 1e-9).then(|| [self.focal * q.x / q.z + self.cx, self.focal * q.y / q.z + self.cy])
    }

    /// World-frame ray through image point `px`, scaled to unit optical depth.
    pub fn ray(&self, px: [f64; 2]) -> (Point3<f64>, Vector3<f64>) {
        let iso = self.pose.to_isometry();
        let d = Vector3::new((px[0] - self.cx) / self.focal, (px[1] - self.cy) / self.focal, 1.0);
        (Point3::from(iso.translation.vector), iso.rotation * d)
    }

    /// Optical depth at which the ray through `px` meets `plane`.
    pub fn plane_depth(&self, px: [f64; 2], plane: &Plane) -> Result<f64> {
        let (o, d) = self.ray(px);
        let denom = d.dot(&plane.normal);
        if denom.abs() < 1e-12 {
            return Err(Error::InvalidGeometry("camera ray parallel to the panel plane".into()));
        }
        let t = (plane.point - o).dot(&plane.normal) / denom;
        if t <= 0.0 {
            return Err(Error::InvalidGeometry("panel plane is behind the camera".into()));
        }
        Ok(t)
    }

    /// World point where the ray through `px` meets `plane`.
    pub fn intersect(&self, px: [f64; 2], plane: &Plane) -> Result<Point3<f64>> {
        let t = self.plane_depth(px, plane)?;
        let (o, d) = self.ray(px);
        Ok(o + d * t)
    }

    pub fn contains(&self, px: [f64; 2]) -> bool {
        px[0] >= 0.0 && px[1] >= 0.0 && px[0] < self.width as f64 && px[1] < self.height as f64
    }
}
