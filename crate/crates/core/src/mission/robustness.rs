use rand::Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::registration::PanelPose;
use crate::rng::{derive_seed, rng_from_seed};
use crate::scan_sim::DepthFrameSpec;
use crate::valve::{robustness_trial, ValvePerceptParams, ValveScene};
use crate::wrench::{perceive_wrench, stereo_agree, stereo_rig, synth_detections};

use super::WrenchSetup;

/// Perturbation swept by [`run_robustness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobustnessKind {
    /// Fraction of depth pixels dropped.
    ValveDropout,
    /// Gaussian depth noise (m).
    ValveNoise,
    /// Detection jitter bound (3σ) expressed as its size on the wrench plane (m).
    WrenchJitter,
}

impl RobustnessKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RobustnessKind::ValveDropout => "valve-dropout",
            RobustnessKind::ValveNoise => "valve-noise",
            RobustnessKind::WrenchJitter => "wrench-jitter",
        }
    }
}

impl FromStr for RobustnessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valve-dropout" => Ok(RobustnessKind::ValveDropout),
            "valve-noise" => Ok(RobustnessKind::ValveNoise),
            "wrench-jitter" => Ok(RobustnessKind::WrenchJitter),
            _ => Err(Error::Usage(format!("unknown robustness kind `{s}` (valve-dropout, valve-noise, wrench-jitter)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub param: f64,
    pub success_rate: f64,
}

/// Success rate at every grid value. All grid points share `seed`, so differences between them
/// come from the perturbation size alone.
pub fn run_robustness(kind: RobustnessKind, grid: &[f64], repeats: usize, seed: u64) -> Result<Vec<RobustnessRow>> {
    if grid.is_empty() {
        return Err(Error::Usage("robustness grid is empty".into()));
    }
    if repeats == 0 {
        return Err(Error::Usage("repeats must be at least 1".into()));
    }
    let scenes = ValveScene::robustness_set();
    let spec = DepthFrameSpec::tof_camera();
    let frames: Vec<_> = scenes.iter().map(|s| s.render(&spec, 0)).collect();
    let truth: Vec<_> = scenes.iter().map(|s| s.truth()).collect();
    let params = ValvePerceptParams::default();
    let wrench = WrenchSetup::default();
    let rates: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&v| {
                let (frames, truth, params, wrench) = (&frames, &truth, &params, &wrench);
                s.spawn(move || match kind {
                    RobustnessKind::ValveDropout => robustness_trial(frames, truth, v, 0.0, repeats, params, seed),
                    RobustnessKind::ValveNoise => robustness_trial(frames, truth, 0.0, v, repeats, params, seed),
                    RobustnessKind::WrenchJitter => wrench_trial(wrench, v, repeats, seed),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("robustness worker panicked")).collect()
    });
    grid.iter().zip(rates).map(|(&param, r)| Ok(RobustnessRow { param, success_rate: r? })).collect()
}

/// Valve success rate over the cross product of dropout fractions and depth noise levels, as
/// `(p_missing, sigma, rate)` rows in `p`-major order.
pub fn valve_robustness_grid(p_missing: &[f64], sigma: &[f64], repeats: usize, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    if p_missing.is_empty() || sigma.is_empty() {
        return Err(Error::Usage("robustness grid is empty".into()));
    }
    if repeats == 0 {
        return Err(Error::Usage("repeats must be at least 1".into()));
    }
    let scenes = ValveScene::robustness_set();
    let spec = DepthFrameSpec::tof_camera();
    let frames: Vec<_> = scenes.iter().map(|s| s.render(&spec, 0)).collect();
    let truth: Vec<_> = scenes.iter().map(|s| s.truth()).collect();
    let params = ValvePerceptParams::default();
    let cells: Vec<(f64, f64)> = p_missing.iter().flat_map(|&p| sigma.iter().map(move |&s| (p, s))).collect();
    let rates: Vec<Result<f64>> = std::thread::scope(|sc| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(p, s)| {
                let (frames, truth, params) = (&frames, &truth, &params);
                sc.spawn(move || robustness_trial(frames, truth, p, s, repeats, params, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("robustness worker panicked")).collect()
    });
    cells.into_iter().zip(rates).map(|((p, s), r)| Ok((p, s, r?))).collect()
}

/// Fraction of random panel poses for which stereo wrench perception picks the target wrench
/// and places the grasp point within 1 cm. `jitter` bounds the detection noise at 3σ, in metres
/// on the wrench plane, and is converted to pixels at the camera distance.
pub fn wrench_trial(setup: &WrenchSetup, jitter: f64, repeats: usize, seed: u64) -> Result<f64> {
    if !(jitter >= 0.0) || repeats == 0 {
        return Err(Error::InvalidInput("jitter must be non-negative and repeats positive".into()));
    }
    let config = &setup.config;
    let want = *config
        .expected_lengths
        .get(config.target_index)
        .ok_or_else(|| Error::InvalidInput("target index outside expected lengths".into()))?;
    let spec = setup
        .rack
        .wrenches
        .iter()
        .find(|w| (w.length - want).abs() < 1e-9)
        .ok_or_else(|| Error::InvalidInput("target wrench is not on the rack".into()))?;
    let mut hits = 0;
    for r in 0..repeats as u64 {
        let mut rng = rng_from_seed(derive_seed(seed, r));
        let panel = PanelPose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-3.1..3.1));
        let cams = stereo_rig(&panel, config.plane_offset, setup.camera_distance, setup.camera_height, setup.baseline);
        let sigma_px = jitter / 3.0 * cams[0].focal / setup.camera_distance;
        let grasp: Option<_> = (|| {
            let mut points = Vec::new();
            for (k, cam) in cams.iter().enumerate() {
                let capture = synth_detections(&setup.rack, &panel, cam, sigma_px, derive_seed(derive_seed(seed, r), k as u64 + 1)).ok()?;
                let obs = perceive_wrench(&capture, &panel, cam, config).ok()?;
                if (obs.selected.metric_length - want).abs() > 0.5 * min_gap(&config.expected_lengths) {
                    return None;
                }
                points.push(obs.grasp_point);
            }
            stereo_agree(&points[0], &points[1], config.stereo_tolerance)
        })();
        if grasp.is_some_and(|g| (g - setup.rack.head_point(&panel, spec)).norm() <= 0.01) {
            hits += 1;
        }
    }
    Ok(hits as f64 / repeats as f64)
}

fn min_gap(lengths: &[f64]) -> f64 {
    let mut v = lengths.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// CSV with header `param,success_rate`.
pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = String::from("param,success_rate\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.param, r.success_rate));
    }
    out
}
