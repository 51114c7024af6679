use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose2;

/// A rover GPS fix with its compass heading in `pose.yaw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: f64,
    pub pose: Pose2,
}

/// Differential GPS localization on top of odometry. Each fix is corrected by the error the base
/// station currently reports against its surveyed position, and the offset between corrected
/// fix and odometry is kept until the next fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localizer {
    /// Surveyed base station position in the world frame.
    pub base_station: [f64; 2],
    /// Fixes older than this raise a stale error (s).
    pub timeout: f64,
    pub offset: Pose2,
    pub last_fix: Option<f64>,
}

impl Localizer {
    pub fn new(base_station: [f64; 2], timeout: f64) -> Self {
        Self { base_station, timeout, offset: Pose2::IDENTITY, last_fix: None }
    }

    /// Absorb a rover fix together with the simultaneous base station fix.
    pub fn on_fix(&mut self, odom: &Pose2, fix: &GpsFix, base_station_fix: [f64; 2]) {
        let bias = [base_station_fix[0] - self.base_station[0], base_station_fix[1] - self.base_station[1]];
        let corrected = Pose2::new(fix.pose.x - bias[0], fix.pose.y - bias[1], fix.pose.yaw);
        self.offset = corrected.compose(&odom.inverse());
        self.last_fix = Some(fix.t);
    }

    /// Odometry carried into the world frame by the last offset, without a staleness check.
    pub fn pose_unchecked(&self, odom: &Pose2) -> Pose2 {
        self.offset.compose(odom)
    }

    /// Localized pose at time `now`; errors when no fix arrived within the timeout.
    pub fn pose(&self, odom: &Pose2, now: f64) -> Result<Pose2> {
        let age = self.last_fix.map_or(f64::INFINITY, |t| now - t);
        if age > self.timeout {
            return Err(Error::GpsStale { age });
        }
        Ok(self.pose_unchecked(odom))
    }
}

/// Apply an optional fix pair, then return the localized pose at `now`.
pub fn localize(
    odom: &Pose2,
    fix: Option<(&GpsFix, [f64; 2])>,
    state: &mut Localizer,
    now: f64,
) -> Result<Pose2> {
    if let Some((f, base)) = fix {
        state.on_fix(odom, f, base);
    }
    state.pose(odom, now)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Pose2, b: &Pose2) -> bool {
        a.distance(b) < 1e-9 && crate::geom::angle_diff(a.yaw, b.yaw).abs() < 1e-9
    }

    #[test]
    fn zero_drift_returns_odometry() {
        let mut loc = Localizer::new([0.0, 0.0], 1.0);
        let odom = Pose2::new(3.0, -1.0, 0.4);
        let p = localize(&odom, Some((&GpsFix { t: 0.0, pose: odom }, [0.0, 0.0])), &mut loc, 0.0).unwrap();
        assert!(close(&p, &odom));
    }

    #[test]
    fn odometry_drift_is_corrected_at_next_fix() {
        let mut loc = Localizer::new([10.0, 5.0], 1.0);
        let truth = Pose2::new(4.0, 2.0, 0.3);
        let odom = Pose2::new(5.0, 2.0, 0.3);
        let fix = GpsFix { t: 1.0, pose: truth };
        let p = localize(&odom, Some((&fix, [10.0, 5.0])), &mut loc, 1.0).unwrap();
        assert!(close(&p, &truth));
        // Later odometry increments are carried through the offset.
        let step = Pose2::new(1.0, 0.0, 0.1);
        let p2 = loc.pose(&odom.compose(&step), 1.5).unwrap();
        assert!(close(&p2, &truth.compose(&step)));
    }

    #[test]
    fn shared_bias_cancels() {
        let mut loc = Localizer::new([10.0, 5.0], 1.0);
        let truth = Pose2::new(-2.0, 7.0, -1.0);
        let biased = GpsFix { t: 0.0, pose: Pose2::new(truth.x + 0.3, truth.y, truth.yaw) };
        let p = localize(&Pose2::new(0.0, 0.0, 0.0), Some((&biased, [10.3, 5.0])), &mut loc, 0.0).unwrap();
        assert!(close(&p, &truth));
    }

    #[test]
    fn stale_fix_raises() {
        let mut loc = Localizer::new([0.0, 0.0], 1.0);
        assert!(matches!(loc.pose(&Pose2::IDENTITY, 0.0), Err(Error::GpsStale { .. })));
        loc.on_fix(&Pose2::IDENTITY, &GpsFix { t: 0.0, pose: Pose2::IDENTITY }, [0.0, 0.0]);
        assert!(loc.pose(&Pose2::IDENTITY, 0.9).is_ok());
        assert!(matches!(loc.pose(&Pose2::IDENTITY, 1.5), Err(Error::GpsStale { .. })));
    }
}
