use serde::{Deserialize, Serialize};

use super::{BaseState, ControllerParams, VelocityCommand};
use crate::error::{Error, Result};
use crate::geom::{angle_diff, Pose2};

/// Progress along an allocentric waypoint list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointFollower {
    pub waypoints: Vec<Pose2>,
    pub index: usize,
    /// A waypoint counts as reached inside this radius (m).
    pub capture_radius: f64,
}

impl WaypointFollower {
    pub fn new(waypoints: Vec<Pose2>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidInput("waypoint list is empty".into()));
        }
        Ok(Self { waypoints, index: 0, capture_radius: 0.05 })
    }

    pub fn current(&self) -> Option<&Pose2> {
        self.waypoints.get(self.index)
    }

    pub fn is_exhausted(&self) -> bool {
        self.index >= self.waypoints.len()
    }

    /// Speed allowed when passing waypoint `i`: full speed on straight continuations, zero at
    /// right-angle turns and at the final waypoint.
    fn pass_speed(&self, i: usize, from: [f64; 2], params: &ControllerParams) -> f64 {
        let Some(next) = self.waypoints.get(i + 1) else { return 0.0 };
        let w = &self.waypoints[i];
        let a = (w.y - from[1]).atan2(w.x - from[0]);
        let b = (next.y - w.y).atan2(next.x - w.x);
        params.v_max * angle_diff(b, a).cos().max(0.0)
    }
}

/// Drive holonomically toward `goal` at up to `v_max`, braking so the speed at the goal is
/// `v_end`. The base turns to face `face_yaw` (world frame) with the yaw gain.
pub fn drive_to(state: &BaseState, goal: [f64; 2], v_end: f64, face_yaw: f64, params: &ControllerParams) -> VelocityCommand {
    let (dx, dy) = (goal[0] - state.x, goal[1] - state.y);
    let dist = dx.hypot(dy);
    let vyaw = (params.yaw_gain * angle_diff(face_yaw, state.yaw)).clamp(-params.max_yaw_rate, params.max_yaw_rate);
    if dist < 1e-9 {
        return VelocityCommand::new(0.0, 0.0, vyaw);
    }
    // Brake at 90% of the limit so the discrete loop can follow the curve.
    let speed = params.v_max.min((v_end * v_end + 1.8 * params.a_max * dist).sqrt());
    let local = state.pose().inverse_transform_point(goal);
    let k = speed / dist;
    VelocityCommand::new(local[0] * k, local[1] * k, vyaw)
}

/// Velocity command toward the current waypoint. Advances past captured waypoints first and
/// reports `SearchExhausted` once the last one has been reached.
pub fn follow_waypoints(state: &BaseState, follower: &mut WaypointFollower, params: &ControllerParams) -> Result<VelocityCommand> {
    while let Some(w) = follower.current() {
        if (w.x - state.x).hypot(w.y - state.y) <= follower.capture_radius {
            follower.index += 1;
        } else {
            break;
        }
    }
    let Some(w) = follower.current().copied() else { return Err(Error::SearchExhausted) };
    let heading = (w.y - state.y).atan2(w.x - state.x);
    let v_end = follower.pass_speed(follower.index, [state.x, state.y], params);
    Ok(drive_to(state, [w.x, w.y], v_end, heading, params))
}
