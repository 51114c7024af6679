use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::approach::ControllerParams;
use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::geom::Pose2;
use crate::registration::RegistrationParams;
use crate::scan_sim::io::read_scene;
use crate::scan_sim::{BoxObject, LidarModel, PanelGeometry, Rect, Scene};
use crate::valve::{ValvePerceptParams, ValveScene};
use crate::wrench::{RackGeometry, WrenchConfig};

/// Fixed durations and rates of the modelled, non-simulated parts of the mission (s, rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    /// Base control step.
    pub dt: f64,
    /// Interval between LiDAR perception updates.
    pub perception_period: f64,
    /// Give up the approach after this long.
    pub max_approach_time: f64,
    /// Camera settle and capture time after an arm motion.
    pub capture_time: f64,
    /// Modelled detector and selection latency for the wrench images.
    pub select_wrench: f64,
    pub grasp_wrench: f64,
    /// Modelled depth processing latency.
    pub detect_valve: f64,
    pub contact_valve: f64,
    /// Wrist speed while rotating the loose wrench over the stem.
    pub sweep_speed: f64,
    /// Wrist speed while aligning to the approach angle and turning the valve.
    pub turn_speed: f64,
    pub gripper_time: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            perception_period: 0.2,
            max_approach_time: 90.0,
            capture_time: 0.5,
            select_wrench: 3.3,
            grasp_wrench: 11.6,
            detect_valve: 0.8,
            contact_valve: 5.6,
            sweep_speed: 0.3,
            turn_speed: 2.0,
            gripper_time: 1.0,
        }
    }
}

/// Tracking and pose filtering between LiDAR perception updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingParams {
    pub gate: f64,
    pub timeout: f64,
    pub min_observations: u32,
    /// Returns within this planar radius of a track feed registration (m).
    pub registration_radius: f64,
    /// Only register tracks closer than this (m).
    pub registration_range: f64,
    /// Registrations scoring worse than this are discarded.
    pub max_registration_score: f64,
    /// Within this distance of the estimate, perception switches to single-seed ICP tracking (m).
    pub track_range: f64,
    /// Larger clusters are thinned by a fixed stride before registration.
    pub max_registration_points: usize,
    /// Tracking updates with a larger ICP residual are discarded (m).
    pub max_track_residual: f64,
    pub lowpass_lambda: f64,
    pub lowpass_k: f64,
    pub sensor_height: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self {
            gate: 1.5,
            timeout: 2.0,
            min_observations: 2,
            registration_radius: 1.2,
            registration_range: 15.0,
            max_registration_score: 0.5,
            track_range: 6.0,
            max_registration_points: 250,
            max_track_residual: 0.1,
            lowpass_lambda: 0.5,
            lowpass_k: 1.0,
            sensor_height: 1.0,
        }
    }
}

/// Wrench stereo capture from the arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrenchSetup {
    pub config: WrenchConfig,
    pub rack: RackGeometry,
    /// Detection jitter (px).
    pub sigma_px: f64,
    /// Camera distance from the wrench plane, camera height and stereo baseline (m).
    pub camera_distance: f64,
    pub camera_height: f64,
    pub baseline: f64,
}

impl Default for WrenchSetup {
    fn default() -> Self {
        Self { config: WrenchConfig::default(), rack: RackGeometry::default(), sigma_px: 1.0, camera_distance: 1.0, camera_height: 1.1, baseline: 0.1 }
    }
}

/// Close-range valve view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValveSetup {
    pub params: ValvePerceptParams,
    pub scene: ValveScene,
    /// Depth noise of the time-of-flight camera (m).
    pub depth_noise: f64,
}

impl Default for ValveSetup {
    fn default() -> Self {
        Self { params: ValvePerceptParams::default(), scene: ValveScene { roll: 25f64.to_radians(), ..Default::default() }, depth_noise: 0.002 }
    }
}

/// Everything one mission run depends on. Either `scene` or `scene_file` supplies the static
/// world; the panel, when present, is added at `panel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
    pub panel: Option<Pose2>,
    #[serde(default)]
    pub panel_geometry: PanelGeometry,
    pub start: Pose2,
    pub waypoints: Vec<Pose2>,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default = "DetectorParams::panel")]
    pub detector: DetectorParams,
    #[serde(default)]
    pub registration: RegistrationParams,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub tracking: TrackingParams,
    #[serde(default)]
    pub wrench: WrenchSetup,
    #[serde(default)]
    pub valve: ValveSetup,
    #[serde(default)]
    pub timing: TimingParams,
    pub seed: u64,
}

impl Scenario {
    /// Panel in the middle of a 120 m arena, robot starting 50 m behind it, with a thin pole
    /// and a wide wall as clutter.
    pub fn default_50m() -> Self {
        let mut scene = Scene::new(Rect::new(-60.0, -60.0, 60.0, 60.0));
        scene.objects.push(BoxObject::new([-30.0, 12.0, 0.75], [0.3, 0.3, 1.5], 0.3).with_label("pole"));
        scene.objects.push(BoxObject::new([-12.0, -18.0, 1.0], [0.3, 4.0, 2.0], 1.1).with_label("wall"));
        Self {
            name: "default-50m".into(),
            scene_file: None,
            scene: Some(scene),
            panel: Some(Pose2::new(0.0, 0.0, 0.0)),
            panel_geometry: PanelGeometry::default(),
            start: Pose2::new(-50.0, 0.0, 0.0),
            waypoints: vec![Pose2::new(-25.0, 0.0, 0.0), Pose2::new(0.0, 0.0, 0.0), Pose2::new(25.0, 0.0, 0.0)],
            lidar: LidarModel { range_noise_sigma: 0.01, ..LidarModel::default() },
            detector: DetectorParams::panel(),
            registration: RegistrationParams::default(),
            controller: ControllerParams::default(),
            tracking: TrackingParams::default(),
            wrench: WrenchSetup::default(),
            valve: ValveSetup::default(),
            timing: TimingParams::default(),
            seed: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Load a scenario file; a relative `scene_file` is resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut s = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let (Some(f), Some(dir)) = (&s.scene_file, path.parent()) {
            if f.is_relative() {
                s.scene_file = Some(dir.join(f));
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scene, &self.scene_file) {
            (Some(_), Some(_)) => return Err(Error::InvalidInput("scenario sets both scene and scene_file".into())),
            (None, None) => return Err(Error::InvalidInput("scenario needs a scene or a scene_file".into())),
            _ => {}
        }
        if self.waypoints.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one waypoint".into()));
        }
        let t = &self.timing;
        let positive = [t.dt, t.perception_period, t.max_approach_time, t.sweep_speed, t.turn_speed];
        let non_negative = [t.capture_time, t.select_wrench, t.grasp_wrench, t.detect_valve, t.contact_valve, t.gripper_time];
        if positive.iter().any(|v| !(*v > 0.0)) || non_negative.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("timing values must be positive".into()));
        }
        self.detector.validate()?;
        self.registration.validate()?;
        self.controller.validate()?;
        self.wrench.config.validate()?;
        self.valve.params.validate()
    }

    /// Static scene plus the panel boxes.
    pub fn world(&self) -> Result<Scene> {
        let mut scene = match (&self.scene, &self.scene_file) {
            (Some(s), _) => s.clone(),
            (None, Some(path)) => read_scene(path)?,
            (None, None) => return Err(Error::InvalidInput("scenario needs a scene or a scene_file".into())),
        };
        if let Some(p) = &self.panel {
            scene.objects.extend(self.panel_geometry.boxes_at(p));
        }
        scene.validate()?;
        Ok(scene)
    }
}
