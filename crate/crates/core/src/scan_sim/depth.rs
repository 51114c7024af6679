use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::geom::Pose6;
use crate::rng::rng_from_seed;

/// Pinhole intrinsics. Pixel `(u, v)` covers `[u, u+1) × [v, v+1)` in continuous image
/// coordinates, so its centre is at `(u + 0.5, v + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Camera-frame ray through a pixel centre, scaled so that its z component is 1.
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new((u as f64 + 0.5 - self.cx) / self.focal, (v as f64 + 0.5 - self.cy) / self.focal, 1.0)
    }

    /// Continuous image coordinates of a camera-frame point in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<[f64; 2]> {
        (p.z > 0.0).then(|| [self.focal * p.x / p.z + self.cx, self.focal * p.y / p.z + self.cy])
    }

    /// Camera-frame point of a pixel centre at depth `z`.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> Point3<f64> {
        Point3::new((u + 0.5 - self.cx) * z / self.focal, (v + 0.5 - self.cy) * z / self.focal, z)
    }
}

/// Everything about a depth frame except its pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFrameSpec {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    /// Surfaces farther than this (along the optical axis) produce no measurement.
    pub max_range: f64,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl DepthFrameSpec {
    /// Time-of-flight camera similar in size and field of view to a pico flexx.
    pub fn tof_camera() -> Self {
        Self {
            width: 224,
            height: 171,
            intrinsics: Intrinsics { focal: 186.0, cx: 112.0, cy: 85.5 },
            max_range: 4.0,
            noise_sigma: 0.0,
        }
    }
}

/// Organized depth image; `depth` is row-major, z along the optical axis in metres, and
/// [`DepthFrame::MISSING`] marks pixels without measurement.
///
/// Camera frame convention: +z forward, +x right, +y down.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub intrinsics: Intrinsics,
    pub camera_pose: Pose6,
}

impl DepthFrame {
    pub const MISSING: f32 = 0.0;

    pub fn is_valid(d: f32) -> bool {
        d > 0.0 && d.is_finite()
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.depth[v * self.width + u]
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| Self::is_valid(**d)).count()
    }

    /// Camera-frame point of a valid pixel.
    pub fn point(&self, u: usize, v: usize) -> Option<Point3<f64>> {
        let d = self.at(u, v);
        Self::is_valid(d).then(|| self.intrinsics.back_project(u as f64, v as f64, d as f64))
    }
}

/// Z-buffer render of the scene through a pinhole camera at `camera_pose` (camera → world).
pub fn render_depth_frame(scene: &Scene, camera_pose: &Pose6, spec: &DepthFrameSpec, seed: u64) -> DepthFrame {
    let iso = camera_pose.to_isometry();
    let origin = Point3::from(iso.translation.vector);
    let mut rng = rng_from_seed(seed);
    let mut depth = Vec::with_capacity(spec.width * spec.height);
    for v in 0..spec.height {
        for u in 0..spec.width {
            // Unnormalised ray with unit z, so the ray parameter equals the optical depth.
            let dir = iso.rotation * spec.intrinsics.ray(u, v);
            let noise: f64 = rng.sample(StandardNormal);
            let d = match scene.cast(&origin, &dir, spec.max_range) {
                Some(z) => {
                    let z = z + spec.noise_sigma * noise;
                    if z > 0.0 {
                        z as f32
                    } else {
                        DepthFrame::MISSING
                    }
                }
                None => DepthFrame::MISSING,
            };
            depth.push(d);
        }
    }
    DepthFrame { width: spec.width, height: spec.height, depth, intrinsics: spec.intrinsics, camera_pose: *camera_pose }
}

/// Drop each valid pixel with probability `p_missing`, then add `N(0, sigma)` to survivors.
///
/// One uniform and one normal variate are drawn per pixel regardless of its state, so calls with
/// the same seed share their random numbers: the pixels dropped at a lower `p_missing` are a
/// subset of those dropped at a higher one.
pub fn perturb_depth(frame: &DepthFrame, p_missing: f64, sigma: f64, seed: u64) -> DepthFrame {
    let mut rng = rng_from_seed(seed);
    let depth = frame
        .depth
        .iter()
        .map(|&d| {
            let u: f64 = rng.random();
            let n: f64 = rng.sample(StandardNormal);
            if !DepthFrame::is_valid(d) {
                return d;
            }
            if u < p_missing {
                return DepthFrame::MISSING;
            }
            let z = d as f64 + sigma * n;
            if z > 0.0 {
                z as f32
            } else {
                DepthFrame::MISSING
            }
        })
        .collect();
    DepthFrame { depth, ..frame.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_sim::{BoxObject, Rect};
    use std::f64::consts::PI;

    /// Camera at height `h` looking straight down; image right is world +x, image down is
    /// world -y.
    fn down_camera(x: f64, y: f64, h: f64) -> Pose6 {
        Pose6::new(x, y, h, PI, 0.0, 0.0)
    }

    fn stem_scene(top: f64) -> Scene {
        let mut s = Scene::new(Rect::new(-1.0, -1.0, 1.0, 1.0));
        s.objects.push(BoxObject::new([0.0, 0.0, top - 0.025], [0.019, 0.05, 0.05], 0.0));
        s
    }

    fn spec() -> DepthFrameSpec {
        DepthFrameSpec {
            width: 320,
            height: 240,
            intrinsics: Intrinsics { focal: 420.0, cx: 160.0, cy: 120.0 },
            max_range: 4.0,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn empty_scene_all_missing() {
        let mut s = Scene::new(Rect::new(-1.0, -1.0, 1.0, 1.0));
        s.ground_plane = false;
        let f = render_depth_frame(&s, &down_camera(0.0, 0.0, 1.0), &spec(), 0);
        assert_eq!(f.valid_count(), 0);
        assert_eq!(f.depth.len(), 320 * 240);
    }

    #[test]
    fn down_camera_axes() {
        let iso = down_camera(0.0, 0.0, 1.0).to_isometry();
        let z = iso.rotation * Vector3::z();
        let x = iso.rotation * Vector3::x();
        let y = iso.rotation * Vector3::y();
        assert!((z - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((x - Vector3::x()).norm() < 1e-12);
        assert!((y - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stem_face_pixel_count_matches_projected_area() {
        let scene = stem_scene(0.85);
        let f = render_depth_frame(&scene, &down_camera(0.0, 0.0, 1.0), &spec(), 0);
        let near = f.depth.iter().filter(|d| DepthFrame::is_valid(**d) && **d < 0.3).count() as f64;
        let focal = 420.0;
        let oracle = (0.019 * focal / 0.15) * (0.05 * focal / 0.15);
        assert!((near - oracle).abs() <= 0.02 * oracle, "{near} vs {oracle}");
    }

    #[test]
    fn camera_shift_moves_centroid() {
        let scene = stem_scene(0.85);
        let centroid = |f: &DepthFrame| {
            let (mut su, mut n) = (0.0, 0.0);
            for v in 0..f.height {
                for u in 0..f.width {
                    let d = f.at(u, v);
                    if DepthFrame::is_valid(d) && d < 0.3 {
                        su += u as f64;
                        n += 1.0;
                    }
                }
            }
            su / n
        };
        let a = render_depth_frame(&scene, &down_camera(0.0, 0.0, 1.0), &spec(), 0);
        let b = render_depth_frame(&scene, &down_camera(0.01, 0.0, 1.0), &spec(), 0);
        let shift = centroid(&b) - centroid(&a);
        let expected = -420.0 * 0.01 / 0.15;
        assert!((shift - expected).abs() <= 1.0, "{shift} vs {expected}");
    }

    fn textured_frame() -> DepthFrame {
        let depth = (0..10_000).map(|i| if i % 7 == 0 { DepthFrame::MISSING } else { 0.5 + (i % 13) as f32 * 0.01 }).collect();
        DepthFrame {
            width: 100,
            height: 100,
            depth,
            intrinsics: Intrinsics { focal: 100.0, cx: 50.0, cy: 50.0 },
            camera_pose: Pose6::IDENTITY,
        }
    }

    #[test]
    fn perturb_identity_and_full_drop() {
        let f = textured_frame();
        assert_eq!(perturb_depth(&f, 0.0, 0.0, 9), f);
        assert_eq!(perturb_depth(&f, 1.0, 0.0, 9).valid_count(), 0);
    }

    #[test]
    fn perturb_half_dropout_is_binomial() {
        let f = DepthFrame { depth: vec![1.0; 10_000], ..textured_frame() };
        let n = perturb_depth(&f, 0.5, 0.0, 1234).valid_count() as f64;
        assert!((n - 5000.0).abs() <= 150.0, "{n}");
    }

    #[test]
    fn perturb_never_revives_missing() {
        let f = textured_frame();
        for seed in 0..5 {
            let g = perturb_depth(&f, 0.3, 0.05, seed);
            for (a, b) in f.depth.iter().zip(&g.depth) {
                if !DepthFrame::is_valid(*a) {
                    assert!(!DepthFrame::is_valid(*b));
                }
            }
        }
    }

    #[test]
    fn dropout_is_nested_for_shared_seed() {
        let f = textured_frame();
        let lo = perturb_depth(&f, 0.2, 0.0, 77);
        let hi = perturb_depth(&f, 0.6, 0.0, 77);
        for (a, b) in lo.depth.iter().zip(&hi.depth) {
            if !DepthFrame::is_valid(*a) {
                assert!(!DepthFrame::is_valid(*b));
            }
        }
    }
}
