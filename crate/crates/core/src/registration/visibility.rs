use nalgebra::Point3;
use std::collections::HashMap;

use crate::geom::{normalize_angle, Pose6};

/// Azimuth/elevation z-buffer around a sensor. Each point is splatted over the bins its disc
/// of radius `point_radius` covers, so a sampled surface occludes as if it were continuous.
pub(crate) struct RangeImage {
    resolution: f64,
    point_radius: f64,
    bins: HashMap<(i64, i64), f64>,
}

pub(crate) struct Spherical {
    pub range: f64,
    pub az: f64,
    pub el: f64,
}

pub(crate) fn to_spherical(sensor_inv: &nalgebra::Isometry3<f64>, p: &Point3<f64>) -> Spherical {
    let q = sensor_inv * p;
    let range = q.coords.norm();
    Spherical { range, az: q.y.atan2(q.x), el: (q.z / range.max(1e-12)).clamp(-1.0, 1.0).asin() }
}

impl RangeImage {
    pub fn new(resolution: f64, point_radius: f64) -> Self {
        Self { resolution, point_radius, bins: HashMap::new() }
    }

    fn bin(&self, az: f64, el: f64) -> (i64, i64) {
        ((az / self.resolution).floor() as i64, (el / self.resolution).floor() as i64)
    }

    pub fn splat(&mut self, s: &Spherical) {
        if s.range <= 1e-9 {
            return;
        }
        let ang = (self.point_radius / s.range).atan();
        let cos_el = s.el.cos().max(1e-3);
        let (a0, e0) = self.bin(s.az - ang / cos_el, s.el - ang);
        let (a1, e1) = self.bin(s.az + ang / cos_el, s.el + ang);
        for a in a0..=a1 {
            for e in e0..=e1 {
                let slot = self.bins.entry((a, e)).or_insert(f64::INFINITY);
                if s.range < *slot {
                    *slot = s.range;
                }
            }
        }
    }

    pub fn is_visible(&self, s: &Spherical, depth_tolerance: f64) -> bool {
        let min = self.bins.get(&self.bin(s.az, s.el)).copied().unwrap_or(f64::INFINITY);
        s.range <= min + depth_tolerance
    }
}

/// Indices of `points` (world frame) visible from `sensor_pose`.
pub(crate) fn visible_indices(
    points: &[Point3<f64>],
    sensor_pose: &Pose6,
    resolution: f64,
    point_radius: f64,
    depth_tolerance: f64,
) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let inv = sensor_pose.to_isometry().inverse();
    let mut sph: Vec<Spherical> = points.iter().map(|p| to_spherical(&inv, p)).collect();
    // Measure azimuth from the cloud's centroid direction so compact objects never straddle
    // the ±π seam.
    let c = points.iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords) / points.len() as f64;
    let az_ref = to_spherical(&inv, &Point3::from(c)).az;
    for s in &mut sph {
        s.az = normalize_angle(s.az - az_ref);
    }
    let mut img = RangeImage::new(resolution, point_radius);
    for s in &sph {
        img.splat(s);
    }
    (0..points.len()).filter(|&i| img.is_visible(&sph[i], depth_tolerance)).collect()
}
