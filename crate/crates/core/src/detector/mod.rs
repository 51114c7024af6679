//! Width-matched object detection in LiDAR scan rings.
//!
//! Each ring is filtered with two circular median windows whose sizes follow the angular width
//! an object of `object_width` would cover at the sample's own range. Samples where the small
//! window already sees the object but the large window still sees the background are kept.

mod cluster;

pub use cluster::{cluster_detections, extend_to_objects, filter_clusters, track_clusters, Cluster, Tracker};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan_sim::{Rect, Scan, ScanRing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Expected object width (m).
    pub object_width: f64,
    /// Minimum median response difference κ (m).
    pub response_threshold: f64,
    pub background_factor: f64,
    pub cluster_tolerance: f64,
    pub min_cluster_points: usize,
    /// Largest accepted cluster bounding box (m).
    pub panel_max_dims: [f64; 3],
    pub arena_bounds: Rect,
    /// Minimum mean cluster height above the ground plane (m).
    pub min_mean_height: f64,
    /// Minimum of the larger horizontal bounding box side (m). Rejects narrow objects that
    /// respond only because their median windows straddle a curved ground profile.
    #[serde(default)]
    pub min_planar_extent: f64,
    /// Returns below this height count as ground when measuring object extents (m).
    #[serde(default = "default_ground_clearance")]
    pub ground_clearance: f64,
    /// Ranges at or beyond this value are no-return sentinels.
    pub sentinel_range: f64,
}

fn default_ground_clearance() -> f64 {
    0.15
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            object_width: 0.5,
            response_threshold: 0.61,
            background_factor: 1.5,
            cluster_tolerance: 0.5,
            min_cluster_points: 3,
            panel_max_dims: [1.6, 1.6, 1.6],
            arena_bounds: Rect::new(-100.0, -100.0, 100.0, 100.0),
            min_mean_height: 0.2,
            min_planar_extent: 0.0,
            ground_clearance: default_ground_clearance(),
            sentinel_range: 100.0,
        }
    }
}

impl DetectorParams {
    /// Settings for the default 1.0 m × 0.76 m panel. The kernel band accepts runs between
    /// roughly 1.1 and 1.5 object widths, so the nominal width sits a little below the face.
    pub fn panel() -> Self {
        Self { object_width: 0.8, min_planar_extent: 0.5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.object_width > 0.0 && self.response_threshold > 0.0 && self.background_factor > 1.0) {
            return Err(Error::InvalidInput(
                "object width and threshold must be positive, background factor above 1".into(),
            ));
        }
        if self.cluster_tolerance <= 0.0 {
            return Err(Error::InvalidInput("cluster tolerance must be positive".into()));
        }
        Ok(())
    }
}

fn next_odd_at_least(x: f64) -> usize {
    let k = (x - 1e-9).ceil().max(1.0) as usize;
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

/// Noise and background median kernel sizes for an object of width `w` seen at `distance`.
pub fn kernel_sizes(w: f64, distance: f64, azimuth_step: f64) -> Result<(usize, usize)> {
    kernel_sizes_with_factor(w, distance, azimuth_step, 1.5)
}

pub fn kernel_sizes_with_factor(w: f64, distance: f64, azimuth_step: f64, background_factor: f64) -> Result<(usize, usize)> {
    if !(distance > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {distance}")));
    }
    if !(azimuth_step > 0.0) || w < 0.0 || !(background_factor > 1.0) {
        return Err(Error::InvalidInput("width, azimuth step and background factor out of range".into()));
    }
    let beta = (0.5 * w / distance).atan();
    let n = (2.0 * beta / azimuth_step).round() as usize;
    let noise = next_odd_at_least((2 * n) as f64).max(3);
    let mut background = next_odd_at_least(background_factor * noise as f64);
    if background <= noise {
        background = noise + 2;
    }
    Ok((noise, background))
}

fn circular_median(ranges: &[f32], center: usize, k: usize, buf: &mut Vec<f32>) -> f32 {
    let n = ranges.len();
    let half = k / 2;
    buf.clear();
    for o in 0..k {
        buf.push(ranges[(center + n - half % n + o) % n]);
    }
    let mid = buf.len() / 2;
    *buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Largest odd number not above `n` (at least 1).
fn clamp_odd(k: usize, n: usize) -> usize {
    let m = if n % 2 == 1 { n } else { n.saturating_sub(1) };
    k.min(m.max(1))
}

/// Indices of ring samples whose median response difference exceeds the threshold.
pub fn detect_ring(ring: &ScanRing, params: &DetectorParams) -> Vec<usize> {
    let n = ring.len();
    if n == 0 {
        return Vec::new();
    }
    let step = ring.azimuth_step();
    let sentinel = params.sentinel_range as f32;
    let mut buf = Vec::new();
    let mut out = Vec::new();
    for i in 0..n {
        let r = ring.ranges[i];
        if !(r > 0.0 && r < sentinel) {
            continue;
        }
        let Ok((nk, bk)) = kernel_sizes_with_factor(params.object_width, r as f64, step, params.background_factor)
        else {
            continue;
        };
        let (nk, bk) = (clamp_odd(nk, n), clamp_odd(bk, n));
        if bk <= nk {
            continue;
        }
        let m_noise = circular_median(&ring.ranges, i, nk, &mut buf);
        let m_bg = circular_median(&ring.ranges, i, bk, &mut buf);
        if m_noise < m_bg && (m_bg - m_noise) as f64 > params.response_threshold {
            out.push(i);
        }
    }
    out
}

/// World-frame points of every detected sample in the scan.
pub fn detect_scan(scan: &Scan, params: &DetectorParams) -> Vec<Point3<f64>> {
    let mut pts = Vec::new();
    for (k, ring) in scan.rings.iter().enumerate() {
        for i in detect_ring(ring, params) {
            if let Some(p) = scan.point(k, i) {
                pts.push(p);
            }
        }
    }
    pts
}

/// Ring detection, clustering, object extent and filtering for one scan.
pub fn detect_panels(scan: &Scan, params: &DetectorParams) -> Vec<Cluster> {
    let mut clusters = cluster_detections(&detect_scan(scan, params), params);
    if !clusters.is_empty() {
        extend_to_objects(&mut clusters, &scan.points(), params);
    }
    for c in &mut clusters {
        c.first_seen = scan.timestamp;
        c.last_seen = scan.timestamp;
    }
    filter_clusters(clusters, params)
}
