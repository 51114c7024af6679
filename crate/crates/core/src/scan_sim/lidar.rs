use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::scene::Scene;
use crate::geom::Pose6;
use crate::rng::rng_from_seed;

/// Spinning multi-ring LiDAR. Ring elevations are centred on the sensor's horizontal plane and
/// the whole head is pitched down by `mount_pitch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarModel {
    pub ring_count: usize,
    pub ring_elevation_spacing: f64,
    pub azimuth_step: f64,
    /// Positive values tilt the forward direction towards the ground.
    pub mount_pitch: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    pub revolution_rate: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            ring_count: 16,
            ring_elevation_spacing: 2f64.to_radians(),
            // 300 000 points/s at 10 Hz over 16 rings.
            azimuth_step: 0.2f64.to_radians(),
            mount_pitch: 10f64.to_radians(),
            max_range: 100.0,
            range_noise_sigma: 0.0,
            revolution_rate: 10.0,
        }
    }
}

impl LidarModel {
    pub fn samples_per_ring(&self) -> usize {
        (2.0 * PI / self.azimuth_step).round().max(1.0) as usize
    }

    pub fn ring_elevation(&self, ring: usize) -> f64 {
        (ring as f64 - 0.5 * (self.ring_count as f64 - 1.0)) * self.ring_elevation_spacing
    }

    /// Pose of the pitched sensor head for a given mount pose.
    pub fn head_pose(&self, sensor_pose: &Pose6) -> Pose6 {
        sensor_pose.compose(&Pose6::new(0.0, 0.0, 0.0, 0.0, self.mount_pitch, 0.0))
    }
}

/// One laser's measurements over a full revolution, ordered by azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRing {
    /// Metres; rays without return hold the scan's `max_range`.
    pub ranges: Vec<f32>,
    pub azimuths: Vec<f32>,
    pub elevation: f32,
}

impl ScanRing {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Angular step of a dense, uniform revolution.
    pub fn azimuth_step(&self) -> f64 {
        2.0 * PI / self.ranges.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub rings: Vec<ScanRing>,
    /// Pose of the (already pitched) sensor head in the world.
    pub sensor_pose: Pose6,
    pub timestamp: f64,
    pub max_range: f32,
}

impl Scan {
    pub fn is_return(&self, range: f32) -> bool {
        range < self.max_range && range > 0.0
    }

    /// Unit ray direction in the sensor frame.
    pub fn direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Vector3::new(ce * ca, ce * sa, se)
    }

    pub fn point_in_sensor(&self, ring: usize, idx: usize) -> Option<Point3<f64>> {
        let r = &self.rings[ring];
        let range = r.ranges[idx];
        self.is_return(range).then(|| {
            Point3::from(Self::direction(r.azimuths[idx] as f64, r.elevation as f64) * range as f64)
        })
    }

    /// World-frame point of a sample, `None` for no-return samples.
    pub fn point(&self, ring: usize, idx: usize) -> Option<Point3<f64>> {
        let iso = self.sensor_pose.to_isometry();
        self.point_in_sensor(ring, idx).map(|p| iso * p)
    }

    /// All returns as world-frame points, ring-major.
    pub fn points(&self) -> Vec<Point3<f64>> {
        let iso = self.sensor_pose.to_isometry();
        let mut out = Vec::new();
        for (k, ring) in self.rings.iter().enumerate() {
            for i in 0..ring.len() {
                if let Some(p) = self.point_in_sensor(k, i) {
                    out.push(iso * p);
                }
            }
        }
        out
    }

    /// Re-express the scan's points with a different sensor pose (e.g. an odometry estimate).
    pub fn with_sensor_pose(mut self, pose: Pose6) -> Self {
        self.sensor_pose = pose;
        self
    }
}

/// Cast every ring sample against the scene. Hits receive additive Gaussian range noise;
/// misses return the `max_range` sentinel. The noise stream depends only on `seed`.
pub fn raycast_scan(scene: &Scene, sensor_pose: &Pose6, model: &LidarModel, seed: u64) -> Scan {
    let head = model.head_pose(sensor_pose);
    let iso = head.to_isometry();
    let origin = Point3::from(iso.translation.vector);
    let n = model.samples_per_ring();
    let step = 2.0 * PI / n as f64;
    let mut rng = rng_from_seed(seed);
    let max_range = model.max_range as f32;

    let rings = (0..model.ring_count)
        .map(|k| {
            let elevation = model.ring_elevation(k);
            let mut ranges = Vec::with_capacity(n);
            let mut azimuths = Vec::with_capacity(n);
            for i in 0..n {
                let az = i as f64 * step;
                let dir = iso.rotation * Scan::direction(az, elevation);
                let noise: f64 = rng.sample(StandardNormal);
                let range = match scene.cast(&origin, &dir, model.max_range) {
                    Some(t) => {
                        let noisy = (t + model.range_noise_sigma * noise).clamp(1e-3, model.max_range);
                        noisy as f32
                    }
                    None => max_range,
                };
                ranges.push(range);
                azimuths.push(az as f32);
            }
            ScanRing { ranges, azimuths, elevation: elevation as f32 }
        })
        .collect();

    Scan { rings, sensor_pose: head, timestamp: 0.0, max_range }
}
