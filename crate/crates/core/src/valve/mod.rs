mod calipers;
mod synth;

pub use calipers::{area_at_angle, convex_hull, min_area_rect, RotatedBox};
pub use synth::ValveScene;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Region, Result};
use crate::geom::Pose6;
use crate::rng::derive_seed;
use crate::scan_sim::{perturb_depth, DepthFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValvePerceptParams {
    /// Pixels closer than this (m) are foreground.
    pub fg_threshold: f64,
    /// Pixels at Chebyshev distance up to this many pixels are connected (1 = 8-connectivity).
    pub cluster_tolerance: usize,
    /// Components smaller than this are ignored.
    pub min_cluster_px: usize,
    /// Stem pixels within this depth of the nearest face depth form the front face (m).
    pub face_band: f64,
    /// Success radius of a stem estimate (m).
    pub success_tol: f64,
}

impl Default for ValvePerceptParams {
    fn default() -> Self {
        Self { fg_threshold: 0.3, cluster_tolerance: 1, min_cluster_px: 20, face_band: 0.02, success_tol: 0.01 }
    }
}

impl ValvePerceptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fg_threshold > 0.0) || self.cluster_tolerance == 0 || self.min_cluster_px == 0 || !(self.face_band > 0.0) || !(self.success_tol > 0.0) {
            return Err(Error::InvalidInput("valve thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Per-pixel boolean image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Pixel coordinates `[u, v]` of one connected component.
pub type Cluster = Vec<[usize; 2]>;

/// Stem face pose in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StemPose {
    /// Front-face centre (m).
    pub position: Point3<f64>,
    /// Roll of the face about the optical axis, in `[0, π/2)`.
    pub angle: f64,
    /// Face normal, pointing back at the camera.
    pub normal: Vector3<f64>,
    /// Short side of the face (m).
    pub width: f64,
    /// Long side of the face (m).
    pub length: f64,
}

impl StemPose {
    /// Camera-frame pose: origin at the face centre, rolled by `angle` about the optical axis.
    pub fn to_pose6(&self) -> Pose6 {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), self.angle);
        let (roll, pitch, yaw) = r.euler_angles();
        Pose6::new(self.position.x, self.position.y, self.position.z, roll, pitch, yaw)
    }
}

/// Stem and wrench-mouth geometry of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValvePerception {
    pub stem: StemPose,
    pub tips: [Point3<f64>; 2],
}

/// Valid pixels closer than `fg_threshold`.
pub fn extract_foreground(frame: &DepthFrame, fg_threshold: f64) -> Mask {
    let bits = frame.depth.iter().map(|&d| DepthFrame::is_valid(d) && (d as f64) < fg_threshold).collect();
    Mask { width: frame.width, height: frame.height, bits }
}

/// Connected components of `mask`, largest first (ties by first pixel in scan order).
pub fn connected_components(mask: &Mask, tolerance: usize) -> Vec<Cluster> {
    let (w, h) = (mask.width, mask.height);
    let r = tolerance as isize;
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cluster = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            cluster.push([u as usize, v as usize]);
            for dv in -r..=r {
                for du in -r..=r {
                    let (nu, nv) = (u + du, v + dv);
                    if nu < 0 || nv < 0 || nu >= w as isize || nv >= h as isize {
                        continue;
                    }
                    let j = nv as usize * w + nu as usize;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(cluster);
    }
    out.sort_by_key(|c| std::cmp::Reverse(c.len()));
    out
}

fn centroid_row(c: &Cluster) -> f64 {
    c.iter().map(|p| p[1] as f64 + 0.5).sum::<f64>() / c.len() as f64
}

/// Largest component in the upper half (wrench mouth) and in the lower half (stem face).
pub fn split_regions(mask: &Mask, params: &ValvePerceptParams) -> Result<(Cluster, Cluster)> {
    let half = 0.5 * mask.height as f64;
    let mut mouth = None;
    let mut stem = None;
    for c in connected_components(mask, params.cluster_tolerance) {
        if c.len() < params.min_cluster_px {
            break;
        }
        let slot = if centroid_row(&c) < half { &mut mouth } else { &mut stem };
        if slot.is_none() {
            *slot = Some(c);
        }
    }
    let mouth = mouth.ok_or(Error::RegionMissing(Region::Mouth))?;
    let stem = stem.ok_or(Error::RegionMissing(Region::Stem))?;
    Ok((mouth, stem))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn cluster_depths(cluster: &Cluster, frame: &DepthFrame) -> Vec<f64> {
    cluster.iter().map(|p| frame.at(p[0], p[1])).filter(|d| DepthFrame::is_valid(*d)).map(|d| d as f64).collect()
}

/// The two prong ends of the wrench mouth: the lowest local extrema of the cluster's lower
/// boundary in the image, back-projected at the median mouth depth.
pub fn wrench_tips(mouth: &Cluster, frame: &DepthFrame) -> Result<[Point3<f64>; 2]> {
    let Some(u0) = mouth.iter().map(|p| p[0]).min() else { return Err(Error::TipsNotFound) };
    let u1 = mouth.iter().map(|p| p[0]).max().unwrap();
    if u1 == u0 {
        return Err(Error::TipsNotFound);
    }
    let mut bottom: Vec<Option<usize>> = vec![None; u1 - u0 + 1];
    for p in mouth {
        let b = &mut bottom[p[0] - u0];
        *b = Some(b.map_or(p[1], |v| v.max(p[1])));
    }
    // Plateaus of the boundary profile that are lower in the image than both neighbours.
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    let mut i = 0;
    while i < bottom.len() {
        let Some(v) = bottom[i] else {
            i += 1;
            continue;
        };
        let mut j = i;
        while j + 1 < bottom.len() && bottom[j + 1] == Some(v) {
            j += 1;
        }
        let left_lower = i == 0 || bottom[i - 1].is_none_or(|b| b < v);
        let right_lower = j + 1 == bottom.len() || bottom[j + 1].is_none_or(|b| b < v);
        if left_lower && right_lower {
            peaks.push((v, u0 as f64 + 0.5 * (i + j) as f64));
        }
        i = j + 1;
    }
    if peaks.len() < 2 {
        return Err(Error::TipsNotFound);
    }
    // Lowest two; among equally low candidates prefer the widest separation.
    peaks.sort_by(|a, b| b.0.cmp(&a.0));
    let second = peaks[1].0;
    let tied: Vec<f64> = peaks.iter().filter(|p| p.0 >= second).map(|p| p.1).collect();
    let (mut a, mut b) = (peaks[0], peaks[1]);
    if tied.len() > 2 {
        let lo = tied.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v_of = |u: f64| peaks.iter().find(|p| p.1 == u).unwrap().0;
        a = (v_of(lo), lo);
        b = (v_of(hi), hi);
    }
    if a.1 > b.1 {
        std::mem::swap(&mut a, &mut b);
    }
    let z = median(cluster_depths(mouth, frame)).ok_or(Error::TipsNotFound)?;
    let k = &frame.intrinsics;
    Ok([k.back_project(a.1, a.0 as f64, z), k.back_project(b.1, b.0 as f64, z)])
}

/// Stem face pose. Cluster points within `face_band` of the near face depth (10th depth
/// percentile) form the front face; the minimum-area rectangle of the face points projected
/// onto the camera plane gives roll and size, its centre at the median face depth gives position.
pub fn stem_pose(stem: &Cluster, frame: &DepthFrame, face_band: f64) -> Result<StemPose> {
    let all: Vec<Point3<f64>> = stem.iter().filter_map(|p| frame.point(p[0], p[1])).collect();
    let mut depths: Vec<f64> = all.iter().map(|p| p.z).collect();
    depths.sort_by(f64::total_cmp);
    let Some(&front) = depths.get(depths.len() / 10) else {
        return Err(Error::DegenerateGeometry("stem has no valid depth".into()));
    };
    let pts: Vec<Point3<f64>> = all.into_iter().filter(|p| p.z <= front + face_band).collect();
    let z = median(pts.iter().map(|p| p.z).collect()).unwrap();
    let rect = min_area_rect(&pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>())?;
    // Rectangle spans pixel centres; widen by one pixel footprint.
    let pitch = z / frame.intrinsics.focal;
    Ok(StemPose {
        position: Point3::new(rect.center[0], rect.center[1], z),
        angle: rect.angle,
        normal: -Vector3::z(),
        width: rect.extents[0] + pitch,
        length: rect.extents[1] + pitch,
    })
}

/// Full stem pipeline on one frame.
pub fn estimate_stem(frame: &DepthFrame, params: &ValvePerceptParams) -> Result<StemPose> {
    let mask = extract_foreground(frame, params.fg_threshold);
    let (_, stem) = split_regions(&mask, params)?;
    stem_pose(&stem, frame, params.face_band)
}

/// Stem pose and wrench tips of one frame.
pub fn perceive_valve(frame: &DepthFrame, params: &ValvePerceptParams) -> Result<ValvePerception> {
    params.validate()?;
    let mask = extract_foreground(frame, params.fg_threshold);
    let (mouth, stem) = split_regions(&mask, params)?;
    Ok(ValvePerception { stem: stem_pose(&stem, frame, params.face_band)?, tips: wrench_tips(&mouth, frame)? })
}

/// Fraction of perturbed frames whose estimated stem centre lies within `success_tol` of the
/// truth. Trial `(frame f, repeat r)` uses a seed derived from `seed` and `f·repeats + r`, so
/// calls with the same seed share their perturbation draws.
pub fn robustness_trial(
    frames: &[DepthFrame],
    truth: &[StemPose],
    p_missing: f64,
    sigma: f64,
    repeats: usize,
    params: &ValvePerceptParams,
    seed: u64,
) -> Result<f64> {
    params.validate()?;
    if repeats == 0 || frames.is_empty() || frames.len() != truth.len() {
        return Err(Error::InvalidInput("need matching non-empty frames and truth and at least one repeat".into()));
    }
    if !(0.0..=1.0).contains(&p_missing) || !(sigma >= 0.0) {
        return Err(Error::InvalidInput("p_missing must lie in [0, 1] and sigma must be non-negative".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..frames.len()).flat_map(|f| (0..repeats).map(move |r| (f, r))).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let chunk = jobs.len().div_ceil(threads);
    let successes: usize = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .filter(|&&(f, r)| {
                            let noisy = perturb_depth(&frames[f], p_missing, sigma, derive_seed(seed, (f * repeats + r) as u64));
                            estimate_stem(&noisy, params).is_ok_and(|est| (est.position - truth[f].position).norm() <= params.success_tol)
                        })
                        .count()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial worker panicked")).sum()
    });
    Ok(successes as f64 / jobs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_sim::Intrinsics;

    fn frame_from(rows: &[&str]) -> DepthFrame {
        let width = rows[0].len();
        let depth = rows.iter().flat_map(|r| r.chars().map(|c| if c == '#' { 0.15 } else { 1.0 })).collect();
        DepthFrame {
            width,
            height: rows.len(),
            depth,
            intrinsics: Intrinsics { focal: 100.0, cx: width as f64 / 2.0, cy: rows.len() as f64 / 2.0 },
            camera_pose: Pose6::IDENTITY,
        }
    }

    #[test]
    fn foreground_ignores_missing_and_far() {
        let mut f = frame_from(&["#..", "..."]);
        f.depth[1] = DepthFrame::MISSING;
        let m = extract_foreground(&f, 0.3);
        assert_eq!(m.bits, vec![true, false, false, false, false, false]);
        assert_eq!(extract_foreground(&f, 0.1).count(), 0);
    }

    #[test]
    fn diagonal_pixels_connect() {
        let f = frame_from(&["#...", ".#..", "...#"]);
        let cs = connected_components(&extract_foreground(&f, 0.3), 1);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].len(), 2);
    }

    #[test]
    fn largest_lower_blob_is_stem() {
        let p = ValvePerceptParams { min_cluster_px: 1, ..Default::default() };
        let f = frame_from(&["..##....", "........", "........", "###..#..", "###....."]);
        let (mouth, stem) = split_regions(&extract_foreground(&f, 0.3), &p).unwrap();
        assert_eq!(mouth.len(), 2);
        assert_eq!(stem.len(), 6);
    }

    #[test]
    fn missing_halves_are_named() {
        let p = ValvePerceptParams { min_cluster_px: 1, ..Default::default() };
        let lower = frame_from(&["....", "....", "##..", "##.."]);
        assert!(matches!(split_regions(&extract_foreground(&lower, 0.3), &p), Err(Error::RegionMissing(Region::Mouth))));
        let upper = frame_from(&["##..", "##..", "....", "...."]);
        assert!(matches!(split_regions(&extract_foreground(&upper, 0.3), &p), Err(Error::RegionMissing(Region::Stem))));
    }

    #[test]
    fn tips_of_u_shape() {
        let f = frame_from(&["#######", "#.....#", "#.....#", ".......", "......."]);
        let m = extract_foreground(&f, 0.3);
        let c = connected_components(&m, 1).remove(0);
        let tips = wrench_tips(&c, &f).unwrap();
        let px: Vec<_> = tips.iter().map(|p| f.intrinsics.project(p).unwrap()).collect();
        assert!((px[0][0] - 0.5).abs() < 1e-9 && (px[0][1] - 2.5).abs() < 1e-9);
        assert!((px[1][0] - 6.5).abs() < 1e-9 && (px[1][1] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn single_column_has_no_tips() {
        let f = frame_from(&[".#.", ".#.", ".#."]);
        let c = connected_components(&extract_foreground(&f, 0.3), 1).remove(0);
        assert!(matches!(wrench_tips(&c, &f), Err(Error::TipsNotFound)));
    }
}
