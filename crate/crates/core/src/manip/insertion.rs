use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::valve::StemPose;

/// Angles closer than this to a multiple of 90° count as aligned with the stem.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSegment {
    pub direction: SweepDirection,
    pub end_angle: f64,
}

/// Labelled stages of the gravity-assisted insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionStep {
    Approach,
    OpenGripper,
    Sweep,
    CloseGripper,
    Turn,
}

/// Wrench roll angles (rad, 0 = mouth hanging straight down onto the stem).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPlan {
    pub approach_angle: f64,
    pub sweep: Vec<SweepSegment>,
    pub insertable_angles: Vec<f64>,
    /// Negative is clockwise.
    pub turn_angle: f64,
    pub steps: Vec<InsertionStep>,
}

pub fn insertion_plan(stem: &StemPose) -> InsertionPlan {
    insertion_plan_for_angle(stem.angle)
}

/// Plan for a stem rolled by `phi`: the insertable angles are `phi + k·90°` within the closed
/// range [-90°, 90°]; the wrench approaches 45° from the insertable angle nearest to upright
/// (the lower one on a tie), sweeps to +90°, then to -90°, and finally turns 540° clockwise.
pub fn insertion_plan_for_angle(phi: f64) -> InsertionPlan {
    let r = phi.rem_euclid(FRAC_PI_2);
    let insertable_angles = if r < ALIGN_TOL || FRAC_PI_2 - r < ALIGN_TOL { vec![-FRAC_PI_2, 0.0, FRAC_PI_2] } else { vec![r - FRAC_PI_2, r] };
    let nearest = insertable_angles.iter().copied().fold(f64::INFINITY, |best, a| if a.abs() < best.abs() { a } else { best });
    InsertionPlan {
        approach_angle: nearest + FRAC_PI_4,
        sweep: vec![
            SweepSegment { direction: SweepDirection::Positive, end_angle: FRAC_PI_2 },
            SweepSegment { direction: SweepDirection::Negative, end_angle: -FRAC_PI_2 },
        ],
        insertable_angles,
        turn_angle: -3.0 * PI,
        steps: vec![InsertionStep::Approach, InsertionStep::OpenGripper, InsertionStep::Sweep, InsertionStep::CloseGripper, InsertionStep::Turn],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_stem_has_three_angles() {
        let p = insertion_plan_for_angle(0.0);
        assert_eq!(p.insertable_angles, vec![-FRAC_PI_2, 0.0, FRAC_PI_2]);
        assert!((p.approach_angle - FRAC_PI_4).abs() < 1e-15);
        assert!((p.turn_angle.to_degrees() + 540.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_stem_has_two_angles() {
        let p = insertion_plan_for_angle(FRAC_PI_4);
        assert_eq!(p.insertable_angles.len(), 2);
        assert!((p.insertable_angles[0] + FRAC_PI_4).abs() < 1e-12 && (p.insertable_angles[1] - FRAC_PI_4).abs() < 1e-12);
        assert!(p.approach_angle.abs() < 1e-12);
    }
}
