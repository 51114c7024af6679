mod robustness;
mod scenario;
mod trajectory;

pub use robustness::{robustness_csv, run_robustness, valve_robustness_grid, wrench_trial, RobustnessKind, RobustnessRow};
pub use scenario::{Scenario, TimingParams, TrackingParams, ValveSetup, WrenchSetup};
pub use trajectory::{export_trajectory, import_trajectory, parse_trajectory, trajectory_csv, TrajectoryRow};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::approach::{control_step, step_base, ApproachPhase, BaseState, ControllerState, WaypointFollower};
use crate::detector::{detect_panels, Tracker};
use crate::error::{Error, Result};
use crate::geom::{Pose2, Pose6};
use crate::manip::{adapt_primitive, insertion_plan, interpolate, ArmState, InsertionPlan, PrimitiveLibrary};
use crate::registration::{icp_se2, lowpass_pose, register_panel, PanelModel, PanelPose};
use crate::rng::{derive_seed, SeedSplitter};
use crate::scan_sim::{raycast_scan, DepthFrameSpec, Scene};
use crate::valve::{perceive_valve, StemPose};
use crate::wrench::{perceive_wrench, stereo_agree, stereo_rig, synth_detections};

/// Mission phases in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Navigate,
    ApproachPanel,
    CyclePanel,
    ArrivePanel,
    SeeWrenches,
    SelectWrench,
    GraspWrench,
    SeeValve,
    DetectValve,
    ContactValve,
    InsertWrench,
    TurnValve,
}

impl Phase {
    pub const ALL: [Phase; 12] = [
        Phase::Navigate,
        Phase::ApproachPanel,
        Phase::CyclePanel,
        Phase::ArrivePanel,
        Phase::SeeWrenches,
        Phase::SelectWrench,
        Phase::GraspWrench,
        Phase::SeeValve,
        Phase::DetectValve,
        Phase::ContactValve,
        Phase::InsertWrench,
        Phase::TurnValve,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Navigate => "Navigate",
            Phase::ApproachPanel => "ApproachPanel",
            Phase::CyclePanel => "CyclePanel",
            Phase::ArrivePanel => "ArrivePanel",
            Phase::SeeWrenches => "SeeWrenches",
            Phase::SelectWrench => "SelectWrench",
            Phase::GraspWrench => "GraspWrench",
            Phase::SeeValve => "SeeValve",
            Phase::DetectValve => "DetectValve",
            Phase::ContactValve => "ContactValve",
            Phase::InsertWrench => "InsertWrench",
            Phase::TurnValve => "TurnValve",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure { reason: String },
    /// Not run because an earlier phase failed.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    /// Simulated time (s).
    pub duration: f64,
    pub outcome: Outcome,
}

/// Perception and planning results worth inspecting after a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionDetails {
    pub panel_estimate: Option<PanelPose>,
    pub panel_error: Option<f64>,
    pub registrations: usize,
    pub selected_length: Option<f64>,
    pub grasp_point: Option<Point3<f64>>,
    pub grasp_error: Option<f64>,
    pub stem: Option<StemPose>,
    pub stem_error: Option<f64>,
    pub insertion: Option<InsertionPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub scenario: String,
    pub seed: u64,
    pub phases: Vec<PhaseRecord>,
    /// Sum of all phase durations (s).
    pub total: f64,
    pub details: MissionDetails,
}

impl MissionReport {
    pub fn success(&self) -> bool {
        self.phases.iter().all(|p| p.outcome == Outcome::Success)
    }

    pub fn phase(&self, phase: Phase) -> &PhaseRecord {
        &self.phases[phase as usize]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Report, base trajectory and measured compute time of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionRun {
    pub report: MissionReport,
    pub trajectory: Vec<TrajectoryRow>,
    /// Wall-clock compute per phase (s). Not deterministic, so kept out of the report.
    pub compute: Vec<(Phase, f64)>,
}

impl MissionRun {
    /// Write `report.json`, `trajectory.csv` and `compute.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        export_trajectory(&self.trajectory, &dir.join("trajectory.csv"))?;
        let mut csv = String::from("phase,wall_clock_s\n");
        for (p, s) in &self.compute {
            csv.push_str(&format!("{},{:.6}\n", p.as_str(), s));
        }
        std::fs::write(dir.join("compute.csv"), csv)?;
        Ok(())
    }
}

struct Recorder {
    phases: Vec<PhaseRecord>,
    compute: Vec<(Phase, f64)>,
    failed: bool,
}

impl Recorder {
    fn record(&mut self, phase: Phase, duration: f64, outcome: Outcome, wall: f64) {
        if outcome != Outcome::Success {
            self.failed = true;
        }
        self.phases.push(PhaseRecord { phase, duration, outcome });
        self.compute.push((phase, wall));
    }

    fn fail(&mut self, phase: Phase, duration: f64, err: &Error, wall: f64) {
        self.record(phase, duration, Outcome::Failure { reason: err.to_string() }, wall);
    }

    fn skip_rest(&mut self) {
        for p in Phase::ALL.into_iter().skip(self.phases.len()) {
            self.phases.push(PhaseRecord { phase: p, duration: 0.0, outcome: Outcome::Skipped });
            self.compute.push((p, 0.0));
        }
    }
}

/// LiDAR perception between control steps: detection, tracking and filtered registration.
struct PanelPerception<'a> {
    scenario: &'a Scenario,
    scene: &'a Scene,
    model: PanelModel,
    tracker: Tracker,
    estimate: Option<PanelPose>,
    next_scan: f64,
    scans: u64,
    registrations: usize,
    lidar_seed: u64,
}

impl PanelPerception<'_> {
    /// Returns within the registration radius of `centre`, thinned to the point budget.
    fn cluster_near(&self, points: Vec<Point3<f64>>, centre: [f64; 2]) -> Vec<Point3<f64>> {
        let tr = &self.scenario.tracking;
        let near: Vec<Point3<f64>> = points
            .into_iter()
            .filter(|p| (p.x - centre[0]).hypot(p.y - centre[1]) < tr.registration_radius && p.z > 0.02)
            .collect();
        let stride = near.len().div_ceil(tr.max_registration_points.max(1)).max(1);
        near.into_iter().step_by(stride).collect()
    }

    /// Away from the panel, detect and track candidates and run the full multi-seed registration
    /// on the nearest confirmed one. Close to the estimate, refine it with single-seed ICP on the
    /// returns around it.
    fn update(&mut self, base: &BaseState) -> Option<Pose2> {
        if base.t + 1e-9 < self.next_scan {
            return self.estimate.map(|p| p.pose2());
        }
        let s = self.scenario;
        let tr = &s.tracking;
        self.next_scan = base.t + s.timing.perception_period;
        let sensor = Pose6::new(base.x, base.y, tr.sensor_height, 0.0, 0.0, base.yaw);
        let mut scan = raycast_scan(self.scene, &sensor, &s.lidar, derive_seed(self.lidar_seed, self.scans));
        scan.timestamp = base.t;
        self.scans += 1;
        let tracking = self.estimate.filter(|e| (e.x - base.x).hypot(e.y - base.y) <= tr.track_range);
        let measured = match tracking {
            Some(est) => {
                let c = est.transform(&self.model.centroid());
                let cluster = self.cluster_near(scan.points(), [c.x, c.y]);
                match icp_se2(&self.model, &cluster, &est, &s.registration) {
                    Ok((pose, residual)) if residual <= tr.max_track_residual => Some(PanelPose { score: est.score, ..pose }),
                    _ => None,
                }
            }
            None => {
                self.tracker.update(detect_panels(&scan, &s.detector), base.t);
                let confirmed = self.tracker.confirmed(tr.min_observations, [base.x, base.y]);
                confirmed
                    .first()
                    .map(|t| t.centroid)
                    .filter(|c| (c.x - base.x).hypot(c.y - base.y) <= tr.registration_range)
                    .and_then(|c| {
                        let cluster = self.cluster_near(scan.points(), [c.x, c.y]);
                        register_panel(&self.model, &cluster, &scan.sensor_pose, &s.registration).ok()
                    })
                    .filter(|p| p.score <= tr.max_registration_score)
            }
        };
        if let Some(mut pose) = measured {
            pose.timestamp = base.t;
            self.registrations += 1;
            self.estimate = Some(match self.estimate {
                Some(prev) => lowpass_pose(&prev, &pose, base.vyaw, tr.lowpass_lambda, tr.lowpass_k),
                None => pose,
            });
        }
        self.estimate.map(|p| p.pose2())
    }
}

fn mission_phase(approach: ApproachPhase, panel_known: bool) -> Phase {
    match approach {
        ApproachPhase::Navigate if !panel_known => Phase::Navigate,
        ApproachPhase::Navigate => Phase::ApproachPanel,
        ApproachPhase::Circle => Phase::CyclePanel,
        ApproachPhase::LocalApproach | ApproachPhase::Arrived => Phase::ArrivePanel,
    }
}

/// Execute the whole mission in simulation. Phase failures are recorded in the report and end
/// the run; only invalid scenarios return an error.
pub fn run_mission(scenario: &Scenario) -> Result<MissionRun> {
    scenario.validate()?;
    let scene = scenario.world()?;
    let seeds = SeedSplitter::new(scenario.seed);
    let t = &scenario.timing;
    let mut rec = Recorder { phases: Vec::new(), compute: Vec::new(), failed: false };
    let mut details = MissionDetails::default();
    let mut trajectory = Vec::new();

    // Base motion: navigation, approach, circling and final alignment.
    let mut perception = PanelPerception {
        scenario,
        scene: &scene,
        model: PanelModel::from_geometry(&scenario.panel_geometry, 0.05)?,
        tracker: Tracker::new(scenario.tracking.gate, scenario.tracking.timeout),
        estimate: None,
        next_scan: 0.0,
        scans: 0,
        registrations: 0,
        lidar_seed: seeds.named("lidar"),
    };
    let mut follower = WaypointFollower::new(scenario.waypoints.clone())?;
    let mut state = ControllerState::default();
    let mut base = BaseState::at(&scenario.start);
    let mut phase_start = 0.0;
    let mut current = Phase::Navigate;
    let mut wall = Instant::now();
    let mut base_error = None;
    loop {
        let panel = perception.update(&base);
        let cmd = match control_step(&base, panel.as_ref(), &mut follower, &mut state, &scenario.controller, t.dt) {
            Ok(c) => c,
            Err(e) => {
                base_error = Some(e);
                break;
            }
        };
        let phase = mission_phase(state.phase, panel.is_some());
        while current < phase {
            rec.record(current, base.t - phase_start, Outcome::Success, wall.elapsed().as_secs_f64());
            wall = Instant::now();
            phase_start = base.t;
            current = Phase::ALL[current as usize + 1];
        }
        if state.phase == ApproachPhase::Arrived {
            break;
        }
        trajectory.push(TrajectoryRow { t: base.t, x: base.x, y: base.y, yaw: base.yaw, speed: base.speed(), phase: phase.as_str().into() });
        if base.t >= t.max_approach_time {
            base_error = Some(Error::InvalidInput(format!("approach did not finish within {} s", t.max_approach_time)));
            break;
        }
        base = step_base(&base, &cmd, &scenario.controller, t.dt);
    }
    details.registrations = perception.registrations;
    details.panel_estimate = perception.estimate;
    if let (Some(est), Some(truth)) = (perception.estimate, scenario.panel) {
        details.panel_error = Some((est.x - truth.x).hypot(est.y - truth.y));
    }
    if let Some(e) = base_error {
        rec.fail(current, base.t - phase_start, &e, wall.elapsed().as_secs_f64());
        rec.skip_rest();
        return Ok(finish(scenario, rec, details, trajectory));
    }
    rec.record(Phase::ArrivePanel, base.t - phase_start, Outcome::Success, wall.elapsed().as_secs_f64());

    let panel_est = perception.estimate.expect("arrival requires a panel estimate");
    let panel_truth = scenario.panel.map(|p| PanelPose::new(p.x, p.y, p.yaw)).unwrap_or(panel_est);
    let library = PrimitiveLibrary::standard();
    let base_pose = base.pose();
    // Panel pose in the base frame, as the arm sees it.
    let panel_in_base = base_pose.relative(&panel_est.pose2()).to_pose6(0.0);
    let mut arm = ArmState::stowed();

    // Arm to the wrench capture pose, then stereo wrench perception.
    let wall = Instant::now();
    let see = run_primitive(&library, "perceive_wrenches", &panel_in_base, &mut arm, t.dt);
    let see_duration = see.as_ref().map_or(0.0, |d| d + t.capture_time);
    if let Err(e) = see {
        rec.fail(Phase::SeeWrenches, see_duration, &e, wall.elapsed().as_secs_f64());
        rec.skip_rest();
        return Ok(finish(scenario, rec, details, trajectory));
    }
    let w = &scenario.wrench;
    let cams = stereo_rig(&panel_est, w.config.plane_offset, w.camera_distance, w.camera_height, w.baseline);
    let captures: Result<Vec<_>> = cams
        .iter()
        .enumerate()
        .map(|(k, cam)| synth_detections(&w.rack, &panel_truth, cam, w.sigma_px, derive_seed(seeds.named("wrench"), k as u64)))
        .collect();
    rec.record(Phase::SeeWrenches, see_duration, Outcome::Success, wall.elapsed().as_secs_f64());

    let wall = Instant::now();
    let selection = captures.and_then(|caps| {
        let obs: Vec<_> = caps.iter().zip(&cams).map(|(c, cam)| perceive_wrench(c, &panel_est, cam, &w.config)).collect::<Result<_>>()?;
        let grasp = stereo_agree(&obs[0].grasp_point, &obs[1].grasp_point, w.config.stereo_tolerance)
            .ok_or_else(|| Error::InvalidGeometry("stereo grasp points disagree".into()))?;
        Ok((obs[0].selected.metric_length, grasp))
    });
    match selection {
        Ok((length, grasp)) => {
            details.selected_length = Some(length);
            details.grasp_point = Some(grasp);
            if let Some(spec) = w.config.expected_lengths.get(w.config.target_index).and_then(|l| w.rack.wrenches.iter().find(|s| s.length == *l)) {
                details.grasp_error = Some((w.rack.head_point(&panel_truth, spec) - grasp).norm());
            }
            rec.record(Phase::SelectWrench, t.select_wrench, Outcome::Success, wall.elapsed().as_secs_f64());
        }
        Err(e) => {
            rec.fail(Phase::SelectWrench, t.select_wrench, &e, wall.elapsed().as_secs_f64());
            rec.skip_rest();
            return Ok(finish(scenario, rec, details, trajectory));
        }
    }
    rec.record(Phase::GraspWrench, t.grasp_wrench, Outcome::Success, 0.0);

    // Valve stem perception with the end-effector depth camera.
    let wall = Instant::now();
    let see = run_primitive(&library, "perceive_valve", &panel_in_base, &mut arm, t.dt);
    let see_duration = see.as_ref().map_or(0.0, |d| d + t.capture_time);
    if let Err(e) = see {
        rec.fail(Phase::SeeValve, see_duration, &e, wall.elapsed().as_secs_f64());
        rec.skip_rest();
        return Ok(finish(scenario, rec, details, trajectory));
    }
    let v = &scenario.valve;
    let spec = DepthFrameSpec { noise_sigma: v.depth_noise, ..DepthFrameSpec::tof_camera() };
    let frame = v.scene.render(&spec, seeds.named("valve"));
    rec.record(Phase::SeeValve, see_duration, Outcome::Success, wall.elapsed().as_secs_f64());

    let wall = Instant::now();
    let stem = match perceive_valve(&frame, &v.params) {
        Ok(p) => {
            details.stem = Some(p.stem);
            details.stem_error = Some((p.stem.position - v.scene.truth().position).norm());
            rec.record(Phase::DetectValve, t.detect_valve, Outcome::Success, wall.elapsed().as_secs_f64());
            p.stem
        }
        Err(e) => {
            rec.fail(Phase::DetectValve, t.detect_valve, &e, wall.elapsed().as_secs_f64());
            rec.skip_rest();
            return Ok(finish(scenario, rec, details, trajectory));
        }
    };
    rec.record(Phase::ContactValve, t.contact_valve, Outcome::Success, 0.0);

    // Gravity-assisted insertion and the final turn.
    let wall = Instant::now();
    let plan = insertion_plan(&stem);
    let mut angle = 0.0;
    let mut insert = (plan.approach_angle - angle).abs() / t.turn_speed + 2.0 * t.gripper_time;
    angle = plan.approach_angle;
    for seg in &plan.sweep {
        insert += (seg.end_angle - angle).abs() / t.sweep_speed;
        angle = seg.end_angle;
    }
    let turn = plan.turn_angle.abs() / t.turn_speed;
    details.insertion = Some(plan);
    rec.record(Phase::InsertWrench, insert, Outcome::Success, wall.elapsed().as_secs_f64());
    rec.record(Phase::TurnValve, turn, Outcome::Success, 0.0);
    Ok(finish(scenario, rec, details, trajectory))
}

/// Adapt a library primitive to the perceived panel and run it from `arm`; returns its duration.
fn run_primitive(lib: &PrimitiveLibrary, name: &str, panel_in_base: &Pose6, arm: &mut ArmState, dt: f64) -> Result<f64> {
    let p = adapt_primitive(lib.get(name)?, panel_in_base);
    let tr = interpolate(&p, arm, dt)?;
    if let Some(last) = tr.samples.last() {
        *arm = last.state.clone();
    }
    Ok(tr.duration())
}

fn finish(scenario: &Scenario, rec: Recorder, details: MissionDetails, trajectory: Vec<TrajectoryRow>) -> MissionRun {
    let total = rec.phases.iter().map(|p| p.duration).sum();
    debug_assert!(rec.failed == rec.phases.iter().any(|p| p.outcome != Outcome::Success));
    MissionRun {
        report: MissionReport { scenario: scenario.name.clone(), seed: scenario.seed, phases: rec.phases, total, details },
        trajectory,
        compute: rec.compute,
    }
}
