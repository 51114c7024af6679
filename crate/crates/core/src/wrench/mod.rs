//! Wrench selection from head and mouth detections.
//!
//! Head detections are straightened with a line fit (all wrenches hang at one height), mouth
//! detections are snapped to the nearest strong vertical edge, and heads and mouths are paired
//! greedily by horizontal offset. Pixel lengths become metric through the depth of the
//! registered panel plane, and the pair closest to the requested nominal length is selected.

mod camera;
mod provider;
mod synth;

pub use camera::{CameraModel, Plane};
pub use provider::{Capture, DetectionProvider, FileProvider, SyntheticProvider};
pub use synth::{synth_detections, RackGeometry, WrenchSpec};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::PanelPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    Head,
    Mouth,
}

/// Bounding box detection in continuous image coordinates (px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: DetectionClass,
    pub center: [f64; 2],
    /// Box width and height (px).
    pub size: [f64; 2],
    pub confidence: f64,
}

impl Detection {
    pub fn new(class: DetectionClass, center: [f64; 2], size: [f64; 2], confidence: f64) -> Self {
        Self { class, center, size, confidence }
    }
}

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.width * self.height {
            return Err(Error::InvalidInput("image buffer does not match its size".into()));
        }
        Ok(())
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchHypothesis {
    pub head: Detection,
    pub mouth: Detection,
    pub pixel_length: f64,
    /// Zero until [`estimate_lengths`] runs (m).
    pub metric_length: f64,
    /// Horizontal head/mouth offset used for matching (px).
    pub match_cost: f64,
}

/// Wrench perception settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchConfig {
    /// Nominal wrench lengths, ascending (m).
    pub expected_lengths: Vec<f64>,
    /// Index into `expected_lengths` of the wrench to fetch.
    pub target_index: usize,
    /// Distance of the plane the wrenches hang in from the panel centre, along its front normal (m).
    pub plane_offset: f64,
    pub snap_radius: f64,
    pub stereo_tolerance: f64,
}

impl Default for WrenchConfig {
    fn default() -> Self {
        Self {
            expected_lengths: vec![0.16, 0.18, 0.20, 0.22, 0.25, 0.30],
            target_index: 3,
            plane_offset: 0.40,
            snap_radius: 10.0,
            stereo_tolerance: 0.025,
        }
    }
}

impl WrenchConfig {
    pub fn validate(&self) -> Result<()> {
        let l = &self.expected_lengths;
        if l.is_empty() || l.iter().any(|x| !(*x > 0.0)) || l.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("expected lengths must be positive and ascending".into()));
        }
        if self.target_index >= l.len() {
            return Err(Error::InvalidInput(format!("target index {} out of range", self.target_index)));
        }
        Ok(())
    }
}

/// Fit `y = a + b·x` through the head centres and move every head onto the line, keeping x.
pub fn refine_heads(heads: &[Detection]) -> Result<Vec<Detection>> {
    if heads.len() < 2 {
        return Err(Error::InsufficientDetections { needed: 2, got: heads.len() });
    }
    let n = heads.len() as f64;
    let mx = heads.iter().map(|h| h.center[0]).sum::<f64>() / n;
    let my = heads.iter().map(|h| h.center[1]).sum::<f64>() / n;
    let sxx: f64 = heads.iter().map(|h| (h.center[0] - mx).powi(2)).sum();
    let sxy: f64 = heads.iter().map(|h| (h.center[0] - mx) * (h.center[1] - my)).sum();
    if sxx < 1e-12 {
        return Err(Error::InvalidGeometry("head detections share one column".into()));
    }
    let b = sxy / sxx;
    Ok(heads
        .iter()
        .map(|h| Detection { center: [h.center[0], my + b * (h.center[0] - mx)], ..*h })
        .collect())
}

/// Vertical gradient magnitudes at the row boundaries of a column strip. Entry `k` belongs to
/// the boundary between rows `v0 + k - 1` and `v0 + k`, which lies at image y = `v0 + k`.
fn column_gradient(image: &IntensityImage, x: f64, v0: usize, v1: usize, half_width: usize) -> Vec<f64> {
    let u = (x.floor().max(0.0) as usize).min(image.width - 1);
    let (u0, u1) = (u.saturating_sub(half_width), (u + half_width).min(image.width - 1));
    let row_mean = |v: usize| (u0..=u1).map(|c| image.at(c, v) as f64).sum::<f64>() / (u1 - u0 + 1) as f64;
    (v0..=v1).map(|v| if v == 0 { 0.0 } else { (row_mean(v) - row_mean(v - 1)).abs() }).collect()
}

/// Move each mouth vertically to the strongest vertical intensity edge within `search_radius`
/// in its column strip. The edge position is refined to sub-pixel accuracy by the
/// gradient-weighted mean over the peak and its neighbours.
pub fn snap_mouths(mouths: &[Detection], image: &IntensityImage, search_radius: f64) -> Result<Vec<Detection>> {
    image.validate()?;
    const FLOOR: f64 = 0.05;
    if image.width == 0 || image.height < 2 {
        return Ok(mouths.to_vec());
    }
    Ok(mouths
        .iter()
        .map(|m| {
            let y = m.center[1];
            let lo = (y - search_radius).ceil().max(1.0) as usize;
            let hi = ((y + search_radius).floor().max(0.0) as usize).min(image.height - 1);
            if lo > hi {
                return *m;
            }
            // One boundary of margin on each side for the sub-pixel refinement.
            let (g0, g1) = (lo - 1, (hi + 1).min(image.height - 1));
            let g = column_gradient(image, m.center[0], g0, g1, 2);
            let (best, mag) = (lo..=hi).map(|b| (b, g[b - g0])).fold((lo, 0.0), |a, c| if c.1 > a.1 { c } else { a });
            if mag < FLOOR {
                return *m;
            }
            let (mut w, mut s) = (0.0, 0.0);
            for b in best.saturating_sub(1).max(g0)..=(best + 1).min(g1) {
                w += g[b - g0];
                s += g[b - g0] * b as f64;
            }
            let snapped = (s / w).clamp(y - search_radius, y + search_radius);
            Detection { center: [m.center[0], snapped], ..*m }
        })
        .collect())
}

/// Greedy one-to-one pairing by horizontal offset, cheapest pair first.
pub fn match_wrenches(heads: &[Detection], mouths: &[Detection]) -> Vec<WrenchHypothesis> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(heads.len() * mouths.len());
    for (i, h) in heads.iter().enumerate() {
        for (j, m) in mouths.iter().enumerate() {
            cand.push(((h.center[0] - m.center[0]).abs(), i, j));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_h, mut used_m) = (vec![false; heads.len()], vec![false; mouths.len()]);
    let mut out = Vec::new();
    for (cost, i, j) in cand {
        if used_h[i] || used_m[j] {
            continue;
        }
        used_h[i] = true;
        used_m[j] = true;
        let (h, m) = (heads[i], mouths[j]);
        out.push(WrenchHypothesis {
            head: h,
            mouth: m,
            pixel_length: (h.center[0] - m.center[0]).hypot(h.center[1] - m.center[1]),
            metric_length: 0.0,
            match_cost: cost,
        });
    }
    out
}

/// Plane the wrenches hang in for a registered panel pose. The plane is vertical, so the
/// panel's planar pose is enough.
pub fn wrench_plane(panel: &PanelPose, plane_offset: f64) -> Plane {
    let (s, c) = panel.yaw.sin_cos();
    Plane::new(Point3::new(panel.x + plane_offset * c, panel.y + plane_offset * s, 0.0), nalgebra::Vector3::new(c, s, 0.0))
}

/// Two grayscale cameras `baseline` apart at `height`, looking straight at the wrench plane
/// from `distance` in front of it.
pub fn stereo_rig(panel: &PanelPose, plane_offset: f64, distance: f64, height: f64, baseline: f64) -> [CameraModel; 2] {
    let plane = wrench_plane(panel, plane_offset);
    let (s, c) = panel.yaw.sin_cos();
    let lateral = nalgebra::Vector3::new(-s, c, 0.0);
    [-0.5, 0.5].map(|k| {
        let mut eye = plane.point + plane.normal * distance + lateral * (k * baseline);
        eye.z = height;
        CameraModel::grayscale(crate::geom::Pose6::looking(eye, -plane.normal, nalgebra::Vector3::z()))
    })
}

/// Metric length of each pair: `pixel_length · depth / focal`, with the depth of the pair's
/// midpoint ray where it meets the wrench plane.
pub fn estimate_lengths(pairs: &[WrenchHypothesis], plane: &Plane, cam: &CameraModel) -> Result<Vec<WrenchHypothesis>> {
    pairs
        .iter()
        .map(|p| {
            let mid = [0.5 * (p.head.center[0] + p.mouth.center[0]), 0.5 * (p.head.center[1] + p.mouth.center[1])];
            let depth = cam.plane_depth(mid, plane)?;
            Ok(WrenchHypothesis { metric_length: p.pixel_length * depth / cam.focal, ..p.clone() })
        })
        .collect()
}

/// Index of the expected length nearest to `length` (first on ties).
pub fn nearest_expected(length: f64, expected: &[f64]) -> Option<usize> {
    expected
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - length).abs().total_cmp(&(b.1 - length).abs()))
        .map(|(i, _)| i)
}

/// The pair whose nearest expected length is the target, choosing the smallest error when
/// several map to it.
pub fn select_wrench(pairs: &[WrenchHypothesis], expected_lengths: &[f64], target_index: usize) -> Result<WrenchHypothesis> {
    if pairs.is_empty() {
        return Err(Error::InsufficientDetections { needed: 1, got: 0 });
    }
    if target_index >= expected_lengths.len() {
        return Err(Error::InvalidInput(format!("target index {target_index} out of range")));
    }
    let target = expected_lengths[target_index];
    pairs
        .iter()
        .filter(|p| nearest_expected(p.metric_length, expected_lengths) == Some(target_index))
        .min_by(|a, b| (a.metric_length - target).abs().total_cmp(&(b.metric_length - target).abs()))
        .cloned()
        .ok_or(Error::SelectionFailed(target_index))
}

/// Mean of two estimates when they agree within `tol`, otherwise `None` (capture again).
pub fn stereo_agree(a: &Point3<f64>, b: &Point3<f64>, tol: f64) -> Option<Point3<f64>> {
    ((a - b).norm() <= tol).then(|| nalgebra::center(a, b))
}

/// Result of one camera's wrench perception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchObservation {
    pub selected: WrenchHypothesis,
    /// Head centre on the wrench plane, world frame (m).
    pub grasp_point: Point3<f64>,
    pub pairs: Vec<WrenchHypothesis>,
}

/// Full single-camera pipeline: refine, snap (when an image is available), match, measure and
/// select, then locate the selected head on the wrench plane.
pub fn perceive_wrench(capture: &Capture, panel: &PanelPose, cam: &CameraModel, config: &WrenchConfig) -> Result<WrenchObservation> {
    config.validate()?;
    let heads = refine_heads(&capture.heads)?;
    let mouths = match &capture.image {
        Some(img) => snap_mouths(&capture.mouths, img, config.snap_radius)?,
        None => capture.mouths.clone(),
    };
    let plane = wrench_plane(panel, config.plane_offset);
    let pairs = estimate_lengths(&match_wrenches(&heads, &mouths), &plane, cam)?;
    let selected = select_wrench(&pairs, &config.expected_lengths, config.target_index)?;
    let grasp_point = cam.intersect(selected.head.center, &plane)?;
    Ok(WrenchObservation { selected, grasp_point, pairs })
}
