use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{wrench_plane, CameraModel, Capture, Detection, DetectionClass, IntensityImage};
use crate::error::Result;
use crate::registration::PanelPose;
use crate::rng::rng_from_seed;

/// One hanging wrench: head-centre to mouth-end length and lateral position along the panel
/// face (panel +y), both in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchSpec {
    pub length: f64,
    pub lateral: f64,
}

/// Wrench rack on the panel front. All wrenches hang vertically from one head height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackGeometry {
    pub wrenches: Vec<WrenchSpec>,
    pub head_height: f64,
    /// Distance of the wrench plane from the panel centre along the front normal (m).
    pub plane_offset: f64,
    pub shaft_width: f64,
    pub head_radius: f64,
    pub mouth_width: f64,
    pub mouth_height: f64,
}

impl Default for RackGeometry {
    fn default() -> Self {
        let lengths = [0.20, 0.16, 0.25, 0.18, 0.30, 0.22];
        Self {
            wrenches: lengths
                .iter()
                .enumerate()
                .map(|(i, &length)| WrenchSpec { length, lateral: -0.3 + 0.12 * i as f64 })
                .collect(),
            head_height: 1.1,
            plane_offset: 0.40,
            shaft_width: 0.015,
            head_radius: 0.02,
            mouth_width: 0.04,
            mouth_height: 0.03,
        }
    }
}

impl RackGeometry {
    fn axes(&self, panel: &PanelPose) -> (Point3<f64>, Vector3<f64>) {
        let plane = wrench_plane(panel, self.plane_offset);
        let (s, c) = panel.yaw.sin_cos();
        (plane.point, Vector3::new(-s, c, 0.0))
    }

    /// World position of plane coordinates `(lateral, height)`.
    pub fn point(&self, panel: &PanelPose, lateral: f64, height: f64) -> Point3<f64> {
        let (o, t) = self.axes(panel);
        o + t * lateral + Vector3::z() * height
    }

    pub fn head_point(&self, panel: &PanelPose, w: &WrenchSpec) -> Point3<f64> {
        self.point(panel, w.lateral, self.head_height)
    }

    pub fn mouth_point(&self, panel: &PanelPose, w: &WrenchSpec) -> Point3<f64> {
        self.point(panel, w.lateral, self.head_height - w.length)
    }

    fn covers(&self, w: &WrenchSpec, s: f64, z: f64) -> bool {
        let (ds, zm, zh) = ((s - w.lateral).abs(), self.head_height - w.length, self.head_height);
        let shaft = ds <= 0.5 * self.shaft_width && (zm..=zh).contains(&z);
        let head = ds * ds + (z - zh).powi(2) <= self.head_radius * self.head_radius;
        let mouth = ds <= 0.5 * self.mouth_width && (zm..=zm + self.mouth_height).contains(&z);
        shaft || head || mouth
    }
}

/// Render the rack white-on-black with 4×4 supersampling per pixel.
fn render(rack: &RackGeometry, panel: &PanelPose, cam: &CameraModel) -> IntensityImage {
    const SS: usize = 4;
    let mut img = IntensityImage::new(cam.width, cam.height);
    let (origin, t_axis) = rack.axes(panel);
    let plane = wrench_plane(panel, rack.plane_offset);
    for w in &rack.wrenches {
        let half = 0.5 * rack.mouth_width.max(2.0 * rack.head_radius);
        let corners = [
            (w.lateral - half, rack.head_height - w.length),
            (w.lateral + half, rack.head_height - w.length),
            (w.lateral - half, rack.head_height + rack.head_radius),
            (w.lateral + half, rack.head_height + rack.head_radius),
        ];
        let px: Vec<[f64; 2]> = corners.iter().filter_map(|&(s, z)| cam.project(&rack.point(panel, s, z))).collect();
        if px.len() < 4 {
            continue;
        }
        let u0 = (px.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - 2.0).max(0.0) as usize;
        let v0 = (px.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - 2.0).max(0.0) as usize;
        let u1 = ((px.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + 2.0).max(0.0) as usize).min(cam.width);
        let v1 = ((px.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + 2.0).max(0.0) as usize).min(cam.height);
        let iso = cam.pose.to_isometry();
        let eye = Point3::from(iso.translation.vector);
        let n = plane.normal;
        let plane_d = (plane.point - eye).dot(&n);
        for v in v0..v1 {
            for u in u0..u1 {
                let mut hits = 0;
                for a in 0..SS {
                    for b in 0..SS {
                        let sx = u as f64 + (a as f64 + 0.5) / SS as f64;
                        let sy = v as f64 + (b as f64 + 0.5) / SS as f64;
                        let d = iso.rotation * Vector3::new((sx - cam.cx) / cam.focal, (sy - cam.cy) / cam.focal, 1.0);
                        let denom = d.dot(&n);
                        if denom.abs() < 1e-12 {
                            continue;
                        }
                        let t = plane_d / denom;
                        if t <= 0.0 {
                            continue;
                        }
                        let rel = eye + d * t - origin;
                        if rack.covers(w, rel.dot(&t_axis), rel.z) {
                            hits += 1;
                        }
                    }
                }
                let c = hits as f32 / (SS * SS) as f32;
                let slot = &mut img.values[v * cam.width + u];
                *slot = slot.max(c);
            }
        }
    }
    img
}

/// Synthetic stand-in for the learned detector: projects each wrench's head centre and mouth
/// end through `cam`, adds Gaussian pixel jitter of `sigma` and renders the matching image.
/// Detections whose centre leaves the image are dropped.
pub fn synth_detections(rack: &RackGeometry, panel: &PanelPose, cam: &CameraModel, sigma: f64, seed: u64) -> Result<Capture> {
    cam.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut heads = Vec::new();
    let mut mouths = Vec::new();
    let scale = |p: &Point3<f64>| {
        let q = cam.pose.to_isometry().inverse_transform_point(p);
        cam.focal / q.z.max(1e-9)
    };
    for w in &rack.wrenches {
        let jitter: [f64; 4] = std::array::from_fn(|_| sigma * rng.sample::<f64, _>(StandardNormal));
        let conf: [f64; 2] = std::array::from_fn(|_| rng.random_range(0.8..1.0));
        let (hp, mp) = (rack.head_point(panel, w), rack.mouth_point(panel, w));
        if let Some(c) = cam.project(&hp) {
            let c = [c[0] + jitter[0], c[1] + jitter[1]];
            let k = scale(&hp);
            if cam.contains(c) {
                let d = 2.0 * rack.head_radius * k;
                heads.push(Detection::new(DetectionClass::Head, c, [d, d], conf[0]));
            }
        }
        if let Some(c) = cam.project(&mp) {
            let c = [c[0] + jitter[2], c[1] + jitter[3]];
            let k = scale(&mp);
            if cam.contains(c) {
                mouths.push(Detection::new(DetectionClass::Mouth, c, [rack.mouth_width * k, rack.mouth_height * k], conf[1]));
            }
        }
    }
    Ok(Capture { heads, mouths, image: Some(render(rack, panel, cam)) })
}
