mod insertion;

pub use insertion::{insertion_plan, insertion_plan_for_angle, InsertionPlan, InsertionStep, SweepDirection, SweepSegment};

use nalgebra::{Isometry3, Translation3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pose6;

/// Joint speed limit of the arm (rad/s).
pub const JOINT_SPEED_LIMIT: f64 = 2.0;
/// End-effector speed limit (m/s).
pub const CARTESIAN_SPEED_LIMIT: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Arm,
    Gripper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Joint,
    Cartesian,
}

/// Goal of a keyframe in its interpolation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum Target {
    Joint { positions: Vec<f64> },
    Cartesian { pose: Pose6 },
}

impl Target {
    pub fn space(&self) -> Space {
        match self {
            Target::Joint { .. } => Space::Joint,
            Target::Cartesian { .. } => Space::Cartesian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub group: Group,
    pub target: Target,
    /// Frame a Cartesian target is expressed against, e.g. `panel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_frame: Option<String>,
    /// rad/s for joint targets. For Cartesian targets m/s of translation, also applied as the
    /// rad/s limit of the orientation change.
    pub max_speed: f64,
}

impl Keyframe {
    pub fn joint(group: Group, positions: Vec<f64>, max_speed: f64) -> Self {
        Self { group, target: Target::Joint { positions }, reference_frame: None, max_speed }
    }

    pub fn cartesian(pose: Pose6, frame: &str, max_speed: f64) -> Self {
        Self { group: Group::Arm, target: Target::Cartesian { pose }, reference_frame: Some(frame.into()), max_speed }
    }

    pub fn space(&self) -> Space {
        self.target.space()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_speed > 0.0) || !self.max_speed.is_finite() {
            return Err(Error::InvalidKeyframe(format!("max_speed must be positive and finite, got {}", self.max_speed)));
        }
        if let Target::Cartesian { .. } = self.target {
            if self.reference_frame.is_none() {
                return Err(Error::InvalidKeyframe("cartesian keyframe without reference frame".into()));
            }
            if self.group != Group::Arm {
                return Err(Error::InvalidKeyframe("only the arm has a cartesian space".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub name: String,
    pub keyframes: Vec<Keyframe>,
    /// Nominal panel pose the Cartesian keyframes were designed against.
    pub reference_pose: Pose6,
}

impl MotionPrimitive {
    pub fn validate(&self) -> Result<()> {
        if self.keyframes.is_empty() {
            return Err(Error::InvalidKeyframe(format!("primitive '{}' has no keyframes", self.name)));
        }
        self.keyframes.iter().try_for_each(Keyframe::validate)
    }
}

/// Shift every Cartesian keyframe by `perceived ∘ reference⁻¹`, so each target keeps its pose
/// relative to the panel. Joint keyframes are unchanged.
pub fn adapt_primitive(p: &MotionPrimitive, perceived: &Pose6) -> MotionPrimitive {
    let shift = perceived.to_isometry() * p.reference_pose.to_isometry().inverse();
    let keyframes = p
        .keyframes
        .iter()
        .map(|k| match &k.target {
            Target::Cartesian { pose } => {
                Keyframe { target: Target::Cartesian { pose: Pose6::from_isometry(&(shift * pose.to_isometry())) }, ..k.clone() }
            }
            Target::Joint { .. } => k.clone(),
        })
        .collect();
    MotionPrimitive { name: p.name.clone(), keyframes, reference_pose: *perceived }
}

/// Manipulator state in both interpolation spaces. Without inverse kinematics the joint and
/// Cartesian arm states are tracked independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub arm_joints: Vec<f64>,
    pub arm_pose: Pose6,
    pub gripper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: ArmState,
}

/// Timed samples after the start state; the last sample of each segment equals its keyframe.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

fn joints_of(state: &mut ArmState, group: Group) -> &mut Vec<f64> {
    match group {
        Group::Arm => &mut state.arm_joints,
        Group::Gripper => &mut state.gripper,
    }
}

/// Distance a segment covers in its own metric: largest joint change, or the larger of
/// translation and rotation angle.
fn segment_distance(from: &ArmState, k: &Keyframe) -> Result<f64> {
    match &k.target {
        Target::Joint { positions } => {
            let mut s = from.clone();
            let cur = joints_of(&mut s, k.group);
            if cur.len() != positions.len() {
                return Err(Error::InvalidKeyframe(format!("joint target has {} values, state has {}", positions.len(), cur.len())));
            }
            Ok(cur.iter().zip(positions).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max))
        }
        Target::Cartesian { pose } => {
            let (a, b) = (from.arm_pose.to_isometry(), pose.to_isometry());
            let trans = (b.translation.vector - a.translation.vector).norm();
            Ok(trans.max(a.rotation.angle_to(&b.rotation)))
        }
    }
}

fn blend(from: &ArmState, k: &Keyframe, s: f64) -> ArmState {
    let mut out = from.clone();
    match &k.target {
        Target::Joint { positions } => {
            let cur = joints_of(&mut out, k.group);
            for (c, t) in cur.iter_mut().zip(positions) {
                *c += s * (t - *c);
            }
        }
        Target::Cartesian { pose } => {
            let (a, b) = (from.arm_pose.to_isometry(), pose.to_isometry());
            let t = a.translation.vector.lerp(&b.translation.vector, s);
            let r = a.rotation.slerp(&b.rotation, s);
            out.arm_pose = Pose6::from_isometry(&Isometry3::from_parts(Translation3::from(t), r));
        }
    }
    out
}

/// Piecewise-linear interpolation through the keyframes, each segment timed by its distance
/// over `max_speed` and sampled at no more than `dt`.
pub fn interpolate(p: &MotionPrimitive, current: &ArmState, dt: f64) -> Result<Trajectory> {
    p.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let mut state = current.clone();
    let mut t = 0.0;
    let mut samples = Vec::new();
    for k in &p.keyframes {
        let dist = segment_distance(&state, k)?;
        if dist == 0.0 {
            continue;
        }
        let duration = dist / k.max_speed;
        if !(duration > 0.0) {
            return Err(Error::InvalidKeyframe(format!("zero-duration segment to a distinct target in '{}'", p.name)));
        }
        let n = (duration / dt).ceil().max(1.0) as usize;
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let st = if i == n {
                let mut end = state.clone();
                match &k.target {
                    Target::Joint { positions } => *joints_of(&mut end, k.group) = positions.clone(),
                    Target::Cartesian { pose } => end.arm_pose = *pose,
                }
                end
            } else {
                blend(&state, k, s)
            };
            samples.push(TrajectorySample { t: t + duration * s, state: st });
        }
        t += duration;
        state = samples.last().unwrap().state.clone();
    }
    Ok(Trajectory { samples })
}

/// Named primitives stored as JSON `{"primitives": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveLibrary {
    pub primitives: Vec<MotionPrimitive>,
}

impl PrimitiveLibrary {
    pub fn get(&self, name: &str) -> Result<&MotionPrimitive> {
        self.primitives.iter().find(|p| p.name == name).ok_or_else(|| Error::InvalidInput(format!("no primitive named '{name}'")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lib: Self = serde_json::from_str(text)?;
        lib.primitives.iter().try_for_each(MotionPrimitive::validate)?;
        Ok(lib)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    /// Primitives used by the mission. Cartesian targets are expressed in the base frame for a
    /// panel at the reference pose 1.1 m ahead of the base, facing it.
    pub fn standard() -> Self {
        let reference = Pose6::new(1.1, 0.0, 0.0, 0.0, 0.0, std::f64::consts::PI);
        let j = |q: [f64; 6]| Keyframe::joint(Group::Arm, q.to_vec(), JOINT_SPEED_LIMIT);
        let grip = |w: f64| Keyframe::joint(Group::Gripper, vec![w], 0.5);
        let c = |x: f64, y: f64, z: f64, pitch: f64| Keyframe::cartesian(Pose6::new(x, y, z, 0.0, pitch, 0.0), "panel", CARTESIAN_SPEED_LIMIT);
        let prim = |name: &str, keyframes: Vec<Keyframe>| MotionPrimitive { name: name.into(), keyframes, reference_pose: reference };
        Self {
            primitives: vec![
                prim(
                    "perceive_wrenches",
                    vec![j([0.0, -1.2, 1.6, -0.4, 1.57, 0.0]), j([0.0, -0.9, 1.2, -0.3, 1.57, 0.0]), c(0.1, 0.0, 1.0, 0.0)],
                ),
                prim("perceive_valve", vec![j([0.0, -1.0, 1.4, -0.4, 1.57, 0.0]), c(0.45, -0.25, 0.55, 0.0)]),
                prim("stow", vec![grip(0.0), j([0.0, -1.57, 2.4, -0.8, 1.57, 0.0])]),
            ],
        }
    }
}

impl ArmState {
    /// Arm folded on the base with the gripper closed.
    pub fn stowed() -> Self {
        Self { arm_joints: vec![0.0, -1.57, 2.4, -0.8, 1.57, 0.0], arm_pose: Pose6::new(0.2, 0.0, 0.6, 0.0, 0.0, 0.0), gripper: vec![0.0] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> ArmState {
        ArmState { arm_joints: vec![0.0; 6], arm_pose: Pose6::IDENTITY, gripper: vec![0.0] }
    }

    fn prim(keyframes: Vec<Keyframe>) -> MotionPrimitive {
        MotionPrimitive { name: "t".into(), keyframes, reference_pose: Pose6::IDENTITY }
    }

    #[test]
    fn cartesian_move_duration() {
        let p = prim(vec![Keyframe::cartesian(Pose6::from_translation(0.65, 0.0, 0.0), "panel", 1.3)]);
        let tr = interpolate(&p, &state(), 0.01).unwrap();
        assert!((tr.duration() - 0.5).abs() < 1e-12);
        assert_eq!(tr.samples.last().unwrap().state.arm_pose, Pose6::from_translation(0.65, 0.0, 0.0));
    }

    #[test]
    fn joint_move_duration() {
        let mut q = vec![0.0; 6];
        q[2] = 1.0;
        let tr = interpolate(&prim(vec![Keyframe::joint(Group::Arm, q, JOINT_SPEED_LIMIT)]), &state(), 0.01).unwrap();
        assert!((tr.duration() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn keyframe_at_current_state_is_empty() {
        let tr = interpolate(&prim(vec![Keyframe::joint(Group::Arm, vec![0.0; 6], 1.0)]), &state(), 0.01).unwrap();
        assert!(tr.samples.is_empty());
    }

    #[test]
    fn invalid_keyframes_rejected() {
        let bad_speed = prim(vec![Keyframe::joint(Group::Arm, vec![1.0; 6], 0.0)]);
        assert!(matches!(interpolate(&bad_speed, &state(), 0.01), Err(Error::InvalidKeyframe(_))));
        let bad_dims = prim(vec![Keyframe::joint(Group::Arm, vec![1.0; 3], 1.0)]);
        assert!(matches!(interpolate(&bad_dims, &state(), 0.01), Err(Error::InvalidKeyframe(_))));
        let mut no_frame = Keyframe::cartesian(Pose6::IDENTITY, "panel", 1.0);
        no_frame.reference_frame = None;
        assert!(matches!(interpolate(&prim(vec![no_frame]), &state(), 0.01), Err(Error::InvalidKeyframe(_))));
        assert!(matches!(interpolate(&prim(vec![]), &state(), 0.01), Err(Error::InvalidKeyframe(_))));
    }

    #[test]
    fn library_roundtrip() {
        let lib = PrimitiveLibrary::standard();
        assert_eq!(PrimitiveLibrary::from_json(&lib.to_json().unwrap()).unwrap(), lib);
        assert!(lib.get("perceive_wrenches").is_ok());
        assert!(lib.get("missing").is_err());
    }
}
