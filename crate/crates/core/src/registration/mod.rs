//! Planar panel registration: SE(2) ICP from several yaw seeds, ranked by a score that combines
//! model-to-cluster distances over the visible model surface with ground-weighted
//! cluster-to-model distances.

mod model;
mod visibility;

pub use model::PanelModel;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{angle_diff, normalize_angle, Pose2, Pose6};
use crate::spatial::KdTree3;

/// Ground-plane pose of the panel frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PanelPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Registration score, lower is better.
    pub score: f64,
    pub timestamp: f64,
}

impl PanelPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: normalize_angle(yaw), score: 0.0, timestamp: 0.0 }
    }

    pub fn from_pose2(p: &Pose2) -> Self {
        Self::new(p.x, p.y, p.yaw)
    }

    pub fn pose2(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }

    pub fn transform(&self, p: &Point3<f64>) -> Point3<f64> {
        let q = self.pose2().transform_point([p.x, p.y]);
        Point3::new(q[0], q[1], p.z)
    }

    pub fn inverse_transform(&self, p: &Point3<f64>) -> Point3<f64> {
        let q = self.pose2().inverse_transform_point([p.x, p.y]);
        Point3::new(q[0], q[1], p.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationParams {
    pub seed_yaw_step: f64,
    pub max_iterations: usize,
    /// Stop once the pose moves less than this (m, and rad for yaw).
    pub convergence_eps: f64,
    pub correspondence_cutoff: f64,
    /// Slope of the ground weight `1 + s·max(0, z_ref − z)` (1/m).
    pub ground_weight_scale: f64,
    pub ground_reference_height: f64,
    pub model_term_weight: f64,
    pub cluster_term_weight: f64,
    /// Angular bin size of the visibility range image (rad).
    pub visibility_resolution: f64,
    pub visibility_depth_tolerance: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            seed_yaw_step: 30f64.to_radians(),
            max_iterations: 60,
            convergence_eps: 1e-5,
            correspondence_cutoff: 1.0,
            ground_weight_scale: 4.0,
            ground_reference_height: 0.5,
            model_term_weight: 1.0,
            cluster_term_weight: 1.0,
            visibility_resolution: 0.2f64.to_radians(),
            visibility_depth_tolerance: 0.05,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let seeds = 2.0 * PI / self.seed_yaw_step;
        if !(self.seed_yaw_step > 0.0) || (seeds - seeds.round()).abs() > 1e-6 {
            return Err(Error::InvalidInput("seed yaw step must divide a full turn".into()));
        }
        if self.model_term_weight < 0.0 || self.cluster_term_weight < 0.0 || self.ground_weight_scale < 0.0 {
            return Err(Error::InvalidInput("score weights must be non-negative".into()));
        }
        if self.max_iterations == 0 || !(self.correspondence_cutoff > 0.0) {
            return Err(Error::InvalidInput("iterations and correspondence cutoff must be positive".into()));
        }
        Ok(())
    }

    pub fn seed_count(&self) -> usize {
        (2.0 * PI / self.seed_yaw_step).round() as usize
    }
}

/// Outcome of one ICP run.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub pose: PanelPose,
    /// RMS nearest-model distance at `pose`, each point's distance capped at the
    /// correspondence cutoff (m).
    pub residual: f64,
    /// Residual after every accepted iteration, starting with the initial pose.
    pub history: Vec<f64>,
}

struct Correspondences {
    model: Vec<[f64; 2]>,
    cluster: Vec<[f64; 2]>,
    /// Truncated RMS over all cluster points: points without a partner count at the cutoff.
    rms: f64,
}

fn correspond(model: &PanelModel, cluster: &[Point3<f64>], pose: &PanelPose, cutoff: f64) -> Option<Correspondences> {
    let mut c = Correspondences { model: Vec::new(), cluster: Vec::new(), rms: 0.0 };
    let mut sq = 0.0;
    for q in cluster {
        let local = pose.inverse_transform(q);
        let m = model.closest_surface_point(&local);
        let d = (local - m).norm();
        if d <= cutoff {
            c.model.push([m.x, m.y]);
            c.cluster.push([q.x, q.y]);
            sq += d * d;
        } else {
            sq += cutoff * cutoff;
        }
    }
    if c.model.is_empty() {
        return None;
    }
    c.rms = (sq / cluster.len() as f64).sqrt();
    Some(c)
}

/// Closed-form least-squares rotation about z plus planar translation mapping model points
/// onto their cluster partners.
fn solve_se2(c: &Correspondences) -> PanelPose {
    let n = c.model.len() as f64;
    let mean = |v: &[[f64; 2]]| {
        let s = v.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    };
    let (mm, mc) = (mean(&c.model), mean(&c.cluster));
    let (mut dot, mut cross) = (0.0, 0.0);
    for (m, q) in c.model.iter().zip(&c.cluster) {
        let (ax, ay) = (m[0] - mm[0], m[1] - mm[1]);
        let (bx, by) = (q[0] - mc[0], q[1] - mc[1]);
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
    }
    let yaw = cross.atan2(dot);
    let (s, co) = yaw.sin_cos();
    PanelPose::new(mc[0] - (co * mm[0] - s * mm[1]), mc[1] - (s * mm[0] + co * mm[1]), yaw)
}

/// Point-to-point ICP restricted to ground-plane translation and yaw. The capped residual cannot
/// rise under an exact update; a step that would raise it through rounding ends the iteration.
pub fn icp_se2_detailed(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    init: &PanelPose,
    params: &RegistrationParams,
) -> Result<IcpResult> {
    if cluster.is_empty() {
        return Err(Error::InvalidInput("cluster is empty".into()));
    }
    let cutoff = params.correspondence_cutoff;
    let mut pose = PanelPose { score: 0.0, ..*init };
    let mut corr = correspond(model, cluster, &pose, cutoff).ok_or(Error::DegenerateRegistration)?;
    let mut history = vec![corr.rms];
    for _ in 0..params.max_iterations {
        let next = solve_se2(&corr);
        let Some(next_corr) = correspond(model, cluster, &next, cutoff) else { break };
        if next_corr.rms > corr.rms {
            break;
        }
        let moved = (next.x - pose.x).hypot(next.y - pose.y);
        let turned = angle_diff(next.yaw, pose.yaw).abs();
        pose = PanelPose { timestamp: init.timestamp, ..next };
        corr = next_corr;
        history.push(corr.rms);
        if moved < params.convergence_eps && turned < params.convergence_eps {
            break;
        }
    }
    Ok(IcpResult { pose, residual: corr.rms, history })
}

pub fn icp_se2(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    init: &PanelPose,
    params: &RegistrationParams,
) -> Result<(PanelPose, f64)> {
    icp_se2_detailed(model, cluster, init, params).map(|r| (r.pose, r.residual))
}

/// Model points (world frame) at `pose` that the sensor can see.
pub fn visible_subset(
    model: &PanelModel,
    pose: &PanelPose,
    sensor_pose: &Pose6,
    params: &RegistrationParams,
) -> Vec<Point3<f64>> {
    let world: Vec<Point3<f64>> = model.points().iter().map(|p| pose.transform(p)).collect();
    let idx = visibility::visible_indices(
        &world,
        sensor_pose,
        params.visibility_resolution,
        0.75 * model.spacing,
        params.visibility_depth_tolerance,
    );
    idx.into_iter().map(|i| world[i]).collect()
}

/// Registration quality of `pose`, lower is better. The first term averages, over the visible
/// model points, the distance to the nearest cluster point; the second averages the
/// ground-weighted distance from every cluster point to the model.
pub fn score_pose(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    pose: &PanelPose,
    sensor_pose: &Pose6,
    params: &RegistrationParams,
) -> f64 {
    if cluster.is_empty() {
        return f64::INFINITY;
    }
    let tree = KdTree3::new(cluster);
    score_with_tree(model, cluster, &tree, pose, sensor_pose, params)
}

fn score_with_tree(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    tree: &KdTree3,
    pose: &PanelPose,
    sensor_pose: &Pose6,
    params: &RegistrationParams,
) -> f64 {
    let visible = visible_subset(model, pose, sensor_pose, params);
    let model_term = if visible.is_empty() {
        0.0
    } else {
        visible.iter().map(|p| tree.nearest(p).map_or(0.0, |(_, d2)| d2.sqrt())).sum::<f64>() / visible.len() as f64
    };
    let z_ref = params.ground_reference_height;
    let cluster_term = cluster
        .iter()
        .map(|q| {
            let w = 1.0 + params.ground_weight_scale * (z_ref - q.z).max(0.0);
            let local = pose.inverse_transform(q);
            w * (local - model.closest_surface_point(&local)).norm()
        })
        .sum::<f64>()
        / cluster.len() as f64;
    params.model_term_weight * model_term + params.cluster_term_weight * cluster_term
}

/// Every converged seed with its score, in seed order.
pub fn register_candidates(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    sensor_pose: &Pose6,
    params: &RegistrationParams,
) -> Result<Vec<PanelPose>> {
    if cluster.is_empty() {
        return Err(Error::InvalidInput("cluster is empty".into()));
    }
    let tree = KdTree3::new(cluster);
    let n = cluster.len() as f64;
    let cc = cluster.iter().fold([0.0, 0.0], |a, p| [a[0] + p.x / n, a[1] + p.y / n]);
    let mc = model.centroid();
    let mut out = Vec::new();
    for k in 0..params.seed_count() {
        let yaw = normalize_angle(k as f64 * params.seed_yaw_step);
        let (s, c) = yaw.sin_cos();
        let mut init = PanelPose::new(cc[0] - (c * mc.x - s * mc.y), cc[1] - (s * mc.x + c * mc.y), yaw);
        // The cluster only covers the faces turned towards the sensor, so align those.
        for _ in 0..2 {
            let vis = visible_subset(model, &init, sensor_pose, params);
            if vis.is_empty() {
                break;
            }
            let m = vis.len() as f64;
            let vc = vis.iter().fold([0.0, 0.0], |a, p| [a[0] + p.x / m, a[1] + p.y / m]);
            init.x += cc[0] - vc[0];
            init.y += cc[1] - vc[1];
        }
        let Ok(r) = icp_se2_detailed(model, cluster, &init, params) else { continue };
        let score = score_with_tree(model, cluster, &tree, &r.pose, sensor_pose, params);
        out.push(PanelPose { score, ..r.pose });
    }
    Ok(out)
}

/// Best-scoring ICP result over all yaw seeds.
pub fn register_panel(
    model: &PanelModel,
    cluster: &[Point3<f64>],
    sensor_pose: &Pose6,
    params: &RegistrationParams,
) -> Result<PanelPose> {
    register_candidates(model, cluster, sensor_pose, params)?
        .into_iter()
        .filter(|p| p.score.is_finite())
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .ok_or(Error::RegistrationFailed)
}

/// Blend factor shrinks as the robot turns faster: `λ = λ0 / (1 + k·|ω|)`.
pub fn lowpass_pose(prev: &PanelPose, new: &PanelPose, robot_yaw_rate: f64, lambda0: f64, k: f64) -> PanelPose {
    let lambda = lambda0 / (1.0 + k * robot_yaw_rate.abs());
    PanelPose {
        x: prev.x + lambda * (new.x - prev.x),
        y: prev.y + lambda * (new.y - prev.y),
        yaw: normalize_angle(prev.yaw + lambda * angle_diff(new.yaw, prev.yaw)),
        score: new.score,
        timestamp: new.timestamp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_sim::PanelGeometry;
    use proptest::prelude::*;

    fn model() -> PanelModel {
        PanelModel::from_geometry(&PanelGeometry::default(), 0.05).unwrap()
    }

    #[test]
    fn identity_cluster_gives_identity() {
        let m = model();
        let (p, res) = icp_se2(&m, m.points(), &PanelPose::default(), &RegistrationParams::default()).unwrap();
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9 && p.yaw.abs() < 1e-9);
        assert!(res < 1e-6);
    }

    #[test]
    fn recovers_known_transform() {
        let m = model();
        let truth = PanelPose::new(1.0, 0.5, 40f64.to_radians());
        let cluster: Vec<Point3<f64>> = m.points().iter().map(|p| truth.transform(p)).collect();
        let init = PanelPose::new(0.3, -0.2, 28f64.to_radians());
        let params = RegistrationParams { max_iterations: 200, convergence_eps: 1e-9, ..RegistrationParams::default() };
        let r = icp_se2_detailed(&m, &cluster, &init, &params).unwrap();
        assert!((r.pose.x - 1.0).abs() < 1e-3 && (r.pose.y - 0.5).abs() < 1e-3, "{:?} {} {:?}", r.pose, r.history.len(), &r.history[r.history.len().saturating_sub(5)..]);
        assert!(angle_diff(r.pose.yaw, truth.yaw).abs() < 1e-3);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn far_cluster_is_degenerate() {
        let m = model();
        let cluster = vec![Point3::new(50.0, 50.0, 50.0)];
        assert!(matches!(
            icp_se2(&m, &cluster, &PanelPose::default(), &RegistrationParams::default()),
            Err(Error::DegenerateRegistration)
        ));
        assert!(matches!(
            register_panel(&m, &cluster, &Pose6::IDENTITY, &RegistrationParams { correspondence_cutoff: 0.01, ..Default::default() }),
            Err(Error::RegistrationFailed)
        ));
    }

    #[test]
    fn perfect_overlap_scores_zero() {
        let m = model();
        let sensor = Pose6::from_translation(4.0, 0.0, 1.0);
        let s = score_pose(&m, m.points(), &PanelPose::default(), &sensor, &RegistrationParams::default());
        assert!(s < 1e-6, "{s}");
    }

    #[test]
    fn shifted_pose_scores_worse() {
        let m = model();
        let sensor = Pose6::from_translation(4.0, 0.0, 1.0);
        let params = RegistrationParams::default();
        let truth = score_pose(&m, m.points(), &PanelPose::default(), &sensor, &params);
        let off = score_pose(&m, m.points(), &PanelPose::new(1.0, 0.0, 0.0), &sensor, &params);
        assert!(off > truth);
    }

    #[test]
    fn visible_subset_of_plane_and_occluded_plane() {
        let plane: Vec<Point3<f64>> = (0..20)
            .flat_map(|i| (0..20).map(move |j| Point3::new(0.0, -0.5 + i as f64 * 0.05, 0.2 + j as f64 * 0.05)))
            .collect();
        let m = PanelModel::from_points(plane.clone(), 1.0, 0.05).unwrap();
        let sensor = Pose6::from_translation(-5.0, 0.0, 0.7);
        let params = RegistrationParams::default();
        assert_eq!(visible_subset(&m, &PanelPose::default(), &sensor, &params).len(), plane.len());

        let mut two = plane.clone();
        two.extend(plane.iter().map(|p| Point3::new(0.5, p.y * 0.9, 0.2 + (p.z - 0.2) * 0.9 + 0.05)));
        let m2 = PanelModel::from_points(two, 1.0, 0.05).unwrap();
        let vis = visible_subset(&m2, &PanelPose::default(), &sensor, &params);
        assert_eq!(vis.len(), plane.len());
        assert!(vis.iter().all(|p| p.x.abs() < 1e-12));
    }

    #[test]
    fn lowpass_examples() {
        let prev = PanelPose::new(1.0, 2.0, 0.0);
        assert_eq!(lowpass_pose(&prev, &prev, 0.3, 0.5, 2.0), prev);
        let new = PanelPose::new(3.0, -1.0, 90f64.to_radians());
        let out = lowpass_pose(&prev, &new, 0.7, 1.0, 0.0);
        assert!((out.x - 3.0).abs() < 1e-12 && (out.y + 1.0).abs() < 1e-12 && (out.yaw - new.yaw).abs() < 1e-12);
        let half = lowpass_pose(&prev, &new, 0.0, 0.5, 1.0);
        assert!((half.yaw - 45f64.to_radians()).abs() < 1e-12);
        let slow = lowpass_pose(&prev, &new, 1.0, 0.5, 1.0);
        assert!((slow.yaw - 22.5f64.to_radians()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lowpass_yaw_stays_on_short_arc(a in -3.1..3.1f64, b in -3.1..3.1f64, w in -2.0..2.0f64, l0 in 0.01..1.0f64, k in 0.0..3.0f64) {
            let prev = PanelPose::new(0.0, 0.0, a);
            let new = PanelPose::new(0.0, 0.0, b);
            let out = lowpass_pose(&prev, &new, w, l0, k);
            let full = angle_diff(b, a);
            let part = angle_diff(out.yaw, a);
            prop_assert!(part * full >= -1e-12);
            prop_assert!(part.abs() <= full.abs() + 1e-12);
        }

        #[test]
        fn icp_residual_never_increases(x in -0.5..0.5f64, y in -0.5..0.5f64, yaw in -0.4..0.4f64, seed in 0u64..1000) {
            let m = model();
            let truth = PanelPose::new(x, y, yaw);
            let mut rng = crate::rng::rng_from_seed(seed);
            use rand::Rng;
            let cluster: Vec<Point3<f64>> = m.points().iter().step_by(3)
                .map(|p| truth.transform(p) + nalgebra::Vector3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.0))
                .collect();
            let r = icp_se2_detailed(&m, &cluster, &PanelPose::default(), &RegistrationParams::default()).unwrap();
            prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
