use serde::{Deserialize, Serialize};

use super::{ControllerParams, VelocityCommand};
use crate::geom::{normalize_angle, Pose2};

/// Omnidirectional base state. Velocities are in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaseState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    pub vyaw: f64,
    pub t: f64,
}

impl BaseState {
    pub fn at(pose: &Pose2) -> Self {
        Self { x: pose.x, y: pose.y, yaw: pose.yaw, ..Self::default() }
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Body velocity rotated into the world frame.
    pub fn world_velocity(&self) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * self.vx - s * self.vy, s * self.vx + c * self.vy]
    }
}

/// Advance the kinematic base by `dt`. The planar body velocity moves towards the command by at
/// most `a_max·dt` and is capped at `v_max`; the yaw rate follows the command directly. Poses are
/// integrated with the mean of the old and new velocities.
pub fn step_base(state: &BaseState, cmd: &VelocityCommand, params: &ControllerParams, dt: f64) -> BaseState {
    debug_assert!(dt > 0.0);
    let (dvx, dvy) = (cmd.vx - state.vx, cmd.vy - state.vy);
    let dv = dvx.hypot(dvy);
    let max_dv = params.a_max * dt;
    let k = if dv > max_dv { max_dv / dv } else { 1.0 };
    let (mut vx, mut vy) = (state.vx + k * dvx, state.vy + k * dvy);
    let speed = vx.hypot(vy);
    if speed > params.v_max {
        vx *= params.v_max / speed;
        vy *= params.v_max / speed;
    }
    let vyaw = cmd.vyaw;
    let yaw_mid = state.yaw + 0.5 * (state.vyaw + vyaw) * 0.5 * dt;
    let (s, c) = yaw_mid.sin_cos();
    let (mvx, mvy) = (0.5 * (state.vx + vx), 0.5 * (state.vy + vy));
    BaseState {
        x: state.x + (c * mvx - s * mvy) * dt,
        y: state.y + (s * mvx + c * mvy) * dt,
        yaw: normalize_angle(state.yaw + 0.5 * (state.vyaw + vyaw) * dt),
        vx,
        vy,
        vyaw,
        t: state.t + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> ControllerParams {
        ControllerParams::default()
    }

    #[test]
    fn acceleration_is_limited() {
        let s = step_base(&BaseState::default(), &VelocityCommand::new(4.0, 0.0, 0.0), &params(), 0.1);
        assert!((s.vx - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matching_command_keeps_velocity() {
        let s0 = BaseState { vx: 0.3, vy: -0.2, vyaw: 0.1, ..BaseState::default() };
        let s = step_base(&s0, &VelocityCommand::new(0.3, -0.2, 0.1), &params(), 0.02);
        assert_eq!((s.vx, s.vy, s.vyaw), (0.3, -0.2, 0.1));
    }

    #[test]
    fn constant_command_distance_follows_trapezoid() {
        let mut s = BaseState::default();
        let cmd = VelocityCommand::new(1.0, 0.0, 0.0);
        for _ in 0..500 {
            s = step_base(&s, &cmd, &params(), 0.02);
        }
        assert!((s.t - 10.0).abs() < 1e-9);
        assert!((s.x - 9.9).abs() < 1e-9, "{}", s.x);
    }

    proptest! {
        #[test]
        fn speed_and_acceleration_bounded(
            cmds in proptest::collection::vec((-8.0..8.0f64, -8.0..8.0f64, -2.0..2.0f64), 1..60),
        ) {
            let p = params();
            let mut s = BaseState::default();
            for (vx, vy, w) in cmds {
                let n = step_base(&s, &VelocityCommand::new(vx, vy, w), &p, 0.02);
                prop_assert!(n.speed() <= p.v_max + 1e-9);
                prop_assert!((n.vx - s.vx).hypot(n.vy - s.vy) <= p.a_max * 0.02 + 1e-9);
                s = n;
            }
        }
    }
}
