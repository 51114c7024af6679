//! Base motion: kinematic simulator, localization, waypoint driving and the circling panel
//! approach controller.
//!
//! The circling controller keeps the panel at a fixed distance in front of the robot and moves
//! sideways around it until the robot sees the panel front, then hands over to a proportional
//! local approach to a standoff pose.

mod base;
mod localize;
mod waypoints;

pub use base::{step_base, BaseState};
pub use localize::{localize, GpsFix, Localizer};
pub use waypoints::{drive_to, follow_waypoints, WaypointFollower};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
    pub vyaw: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand { vx: 0.0, vy: 0.0, vyaw: 0.0 };

    pub fn new(vx: f64, vy: f64, vyaw: f64) -> Self {
        Self { vx, vy, vyaw }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Forward speed limit while circling (m/s).
    pub v_limit: f64,
    /// Circling radius (m).
    pub circle_radius: f64,
    /// Duration of one full turn around the panel (s).
    pub period: f64,
    /// Total width of the signum hysteresis band (rad).
    pub hysteresis: f64,
    /// Time for the sideways term to fade in (s).
    pub fade_time: f64,
    pub yaw_gain: f64,
    pub max_yaw_rate: f64,
    /// Circling ends once the robot is within this angle of the panel front (rad).
    pub local_switch_angle: f64,
    /// Distance of the final pose in front of the panel centre (m).
    pub standoff: f64,
    /// Navigation hands over to circling inside this panel distance (m).
    pub engage_distance: f64,
    pub arrive_pos_tol: f64,
    pub arrive_yaw_tol: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            v_limit: 0.8,
            circle_radius: 2.5,
            period: 10.0,
            hysteresis: 20f64.to_radians(),
            fade_time: 2.0,
            yaw_gain: 4.0,
            max_yaw_rate: 2.0,
            local_switch_angle: 10f64.to_radians(),
            standoff: 1.1,
            engage_distance: 6.0,
            arrive_pos_tol: 0.05,
            arrive_yaw_tol: 3f64.to_radians(),
            v_max: 4.0,
            a_max: 5.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.v_limit,
            self.circle_radius,
            self.period,
            self.hysteresis,
            self.fade_time,
            self.yaw_gain,
            self.max_yaw_rate,
            self.local_switch_angle,
            self.standoff,
            self.engage_distance,
            self.arrive_pos_tol,
            self.arrive_yaw_tol,
            self.v_max,
            self.a_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("controller parameters must be positive".into()));
        }
        if self.hysteresis >= 0.5 * PI {
            return Err(Error::InvalidInput("hysteresis must stay below 90 degrees".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachPhase {
    Navigate,
    Circle,
    LocalApproach,
    Arrived,
}

impl ApproachPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            ApproachPhase::Navigate => "navigate",
            ApproachPhase::Circle => "circle",
            ApproachPhase::LocalApproach => "local_approach",
            ApproachPhase::Arrived => "arrived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phase: ApproachPhase,
    /// Last signum output; `None` until the first call.
    pub rsgn_sign: Option<f64>,
    /// Sideways fade factor in `[0, 1]`.
    pub alpha: f64,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self { phase: ApproachPhase::Navigate, rsgn_sign: None, alpha: 0.0 }
    }
}

/// Signum with hysteresis: the sign flips only beyond the opposite band edge at ±hysteresis/2.
pub fn rsgn(p_theta: f64, state: &mut ControllerState, hysteresis: f64) -> f64 {
    let half = 0.5 * hysteresis;
    let sign = if p_theta > half {
        1.0
    } else if p_theta < -half {
        -1.0
    } else {
        state.rsgn_sign.unwrap_or(if p_theta < 0.0 { -1.0 } else { 1.0 })
    };
    state.rsgn_sign = Some(sign);
    sign
}

/// Angular position of the robot around the panel, counterclockwise from the panel's front
/// normal, computed from the panel pose in the robot frame. Zero when the robot stands in front.
pub fn panel_angle(panel_ego: &Pose2) -> f64 {
    // The robot sits at the origin of its own frame; express it in the panel frame.
    let r = panel_ego.inverse_transform_point([0.0, 0.0]);
    r[1].atan2(r[0])
}

/// Bearing of the panel centre from the robot's forward axis.
pub fn panel_bearing(panel_ego: &Pose2) -> f64 {
    panel_ego.y.atan2(panel_ego.x)
}

/// Circling command: hold `circle_radius` to the panel, move sideways around it at one turn
/// per `period`, and keep facing it. Advances the fade by `dt`.
pub fn circle_command(panel_ego: &Pose2, params: &ControllerParams, state: &mut ControllerState, dt: f64) -> VelocityCommand {
    state.alpha = (state.alpha + dt / params.fade_time).min(1.0);
    let vx = (panel_ego.x - params.circle_radius).clamp(-params.v_limit, params.v_limit);
    let sign = rsgn(panel_angle(panel_ego), state, params.hysteresis);
    let vy = state.alpha * sign * params.circle_radius * 2.0 * PI / params.period;
    let vyaw = (params.yaw_gain * panel_bearing(panel_ego)).clamp(-params.max_yaw_rate, params.max_yaw_rate);
    VelocityCommand::new(vx, vy, vyaw)
}

/// Standoff pose in front of the panel, facing it, in the panel's frame of reference.
pub fn standoff_target(panel: &Pose2, params: &ControllerParams) -> Pose2 {
    panel.compose(&Pose2::new(params.standoff, 0.0, PI))
}

/// Unit-gain proportional command toward a target given in the robot frame, clamped to the
/// circling speed limit and the yaw rate limit.
pub fn local_approach_command(target_ego: &Pose2, params: &ControllerParams) -> VelocityCommand {
    VelocityCommand::new(
        target_ego.x.clamp(-params.v_limit, params.v_limit),
        target_ego.y.clamp(-params.v_limit, params.v_limit),
        normalize_angle(target_ego.yaw).clamp(-params.max_yaw_rate, params.max_yaw_rate),
    )
}

/// Forward-only phase transitions given the current panel estimate in the robot frame.
pub fn step_phase(state: &ControllerState, panel_ego: Option<&Pose2>, params: &ControllerParams) -> ControllerState {
    let mut next = *state;
    let Some(p) = panel_ego else { return next };
    if next.phase == ApproachPhase::Navigate && p.x.hypot(p.y) <= params.engage_distance {
        next.phase = ApproachPhase::Circle;
    }
    if next.phase == ApproachPhase::Circle && panel_angle(p).abs() < params.local_switch_angle {
        next.phase = ApproachPhase::LocalApproach;
    }
    if next.phase == ApproachPhase::LocalApproach {
        let t = standoff_target(p, params);
        if t.x.hypot(t.y) < params.arrive_pos_tol && normalize_angle(t.yaw).abs() < params.arrive_yaw_tol {
            next.phase = ApproachPhase::Arrived;
        }
    }
    next
}

/// One controller step: phase update, then the command for the resulting phase. Without a
/// panel estimate the base follows the waypoints; a panel beyond the engage distance is driven
/// at directly, arriving at the circling speed.
pub fn control_step(
    base: &BaseState,
    panel_world: Option<&Pose2>,
    follower: &mut WaypointFollower,
    state: &mut ControllerState,
    params: &ControllerParams,
    dt: f64,
) -> Result<VelocityCommand> {
    let pose = base.pose();
    let panel_ego = panel_world.map(|p| pose.relative(p));
    *state = step_phase(state, panel_ego.as_ref(), params);
    match (state.phase, panel_ego, panel_world) {
        (ApproachPhase::Navigate, Some(ego), Some(world)) => {
            let d = ego.x.hypot(ego.y);
            let k = (d - 0.9 * params.engage_distance).max(0.0) / d.max(1e-9);
            let goal = [base.x + k * (world.x - base.x), base.y + k * (world.y - base.y)];
            let face = pose.yaw + panel_bearing(&ego);
            Ok(drive_to(base, goal, params.v_limit, face, params))
        }
        (ApproachPhase::Navigate, _, _) => follow_waypoints(base, follower, params),
        (ApproachPhase::Circle, Some(ego), _) => Ok(circle_command(&ego, params, state, dt)),
        (ApproachPhase::LocalApproach, Some(ego), _) => {
            Ok(local_approach_command(&standoff_target(&ego, params), params))
        }
        _ => Ok(VelocityCommand::ZERO),
    }
}

/// One recorded simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub phase: ApproachPhase,
    pub alpha: f64,
    /// Bearing of the panel estimate from the forward axis, when one exists (rad).
    pub bearing: Option<f64>,
    /// Robot position around the panel, zero in front (rad).
    pub panel_angle: Option<f64>,
    pub rsgn: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachTrace {
    pub samples: Vec<TraceSample>,
    pub final_state: BaseState,
    /// Time the local approach started, i.e. the robot reached the panel front.
    pub front_time: Option<f64>,
    pub arrived_time: Option<f64>,
}

/// Closed-loop approach simulation at fixed `dt` until arrival or `max_time`. `perceive` returns
/// the latest world-frame panel estimate for the current base state, if any.
pub fn simulate_approach<F>(
    start: &BaseState,
    waypoints: Vec<Pose2>,
    params: &ControllerParams,
    dt: f64,
    max_time: f64,
    mut perceive: F,
) -> Result<ApproachTrace>
where
    F: FnMut(&BaseState) -> Option<Pose2>,
{
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    let mut follower = WaypointFollower::new(waypoints)?;
    let mut state = ControllerState::default();
    let mut base = *start;
    let mut panel: Option<Pose2> = None;
    let mut trace = ApproachTrace { samples: Vec::new(), final_state: base, front_time: None, arrived_time: None };
    let end = start.t + max_time;
    while base.t < end {
        if let Some(p) = perceive(&base) {
            panel = Some(p);
        }
        let cmd = control_step(&base, panel.as_ref(), &mut follower, &mut state, params, dt)?;
        if state.phase >= ApproachPhase::LocalApproach && trace.front_time.is_none() {
            trace.front_time = Some(base.t);
        }
        let ego = panel.map(|p| base.pose().relative(&p));
        trace.samples.push(TraceSample {
            t: base.t,
            x: base.x,
            y: base.y,
            yaw: base.yaw,
            speed: base.speed(),
            phase: state.phase,
            alpha: state.alpha,
            bearing: ego.as_ref().map(panel_bearing),
            panel_angle: ego.as_ref().map(panel_angle),
            rsgn: state.rsgn_sign,
        });
        if state.phase == ApproachPhase::Arrived {
            trace.arrived_time = Some(base.t);
            break;
        }
        base = step_base(&base, &cmd, params, dt);
    }
    trace.final_state = base;
    Ok(trace)
}
