use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose2;

/// Axis-aligned rectangle in the world ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min: [min_x, min_y], max: [max_x, max_y] }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max[0] > self.min[0] && self.max[1] > self.min[1])
    }
}

/// A box with a vertical yaw axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObject {
    pub center: [f64; 3],
    /// Full side lengths along the box's local x, y, z axes.
    pub extents: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl BoxObject {
    pub fn new(center: [f64; 3], extents: [f64; 3], yaw: f64) -> Self {
        Self { center, extents, yaw, label: None }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    fn to_local(&self, p: &Vector3<f64>) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        [c * p.x + s * p.y, -s * p.x + c * p.y, p.z]
    }

    /// Ray parameter of the first intersection with `origin + t·dir`, `t > 0`.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let o = self.to_local(&(origin - Point3::from(self.center)));
        let d = self.to_local(dir);
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            let h = 0.5 * self.extents[a];
            if d[a].abs() < 1e-15 {
                if o[a] < -h || o[a] > h {
                    return None;
                }
                continue;
            }
            let t1 = (-h - o[a]) / d[a];
            let t2 = (h - o[a]) / d[a];
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            t_near = t_near.max(lo);
            t_far = t_far.min(hi);
            if t_near > t_far {
                return None;
            }
        }
        if t_near > 1e-12 {
            Some(t_near)
        } else if t_far > 1e-12 {
            Some(t_far)
        } else {
            None
        }
    }

    pub fn contains(&self, p: &Point3<f64>, eps: f64) -> bool {
        let l = self.to_local(&(p - Point3::from(self.center)));
        (0..3).all(|a| l[a].abs() <= 0.5 * self.extents[a] + eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Whether the plane z = 0 reflects rays.
    #[serde(default = "default_true")]
    pub ground_plane: bool,
    #[serde(default)]
    pub objects: Vec<BoxObject>,
    pub arena_bounds: Rect,
}

fn default_true() -> bool {
    true
}

impl Scene {
    pub fn new(arena_bounds: Rect) -> Self {
        Self { ground_plane: true, objects: Vec::new(), arena_bounds }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arena_bounds.is_degenerate() {
            return Err(Error::InvalidInput("arena bounds are degenerate".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.extents.iter().all(|e| *e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidInput(format!("object {i} has non-positive extents")));
            }
        }
        Ok(())
    }

    /// Smallest ray parameter over all surfaces, if below `max_t`.
    pub fn cast(&self, origin: &Point3<f64>, dir: &Vector3<f64>, max_t: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        if self.ground_plane && dir.z < 0.0 && origin.z > 0.0 {
            best = -origin.z / dir.z;
        }
        for o in &self.objects {
            if let Some(t) = o.intersect(origin, dir) {
                best = best.min(t);
            }
        }
        (best <= max_t).then_some(best)
    }
}

/// Panel mock-up: an upper body with a full-depth footprint standing on a lower block that is
/// flush with the front face and recessed at the back, so front and back differ only near the
/// ground. Local frame: origin at the footprint centre on the ground, +x is the front normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelGeometry {
    /// Front-to-back size (m).
    pub depth: f64,
    /// Size along the front face (m).
    pub width: f64,
    pub height: f64,
    /// Height of the lower block (m).
    pub foot_height: f64,
    /// How far the lower block's back face is set in from the upper back face (m).
    pub back_recess: f64,
}

impl Default for PanelGeometry {
    fn default() -> Self {
        Self { depth: 0.76, width: 1.0, height: 1.2, foot_height: 0.4, back_recess: 0.3 }
    }
}

impl PanelGeometry {
    /// Local-frame boxes making up the panel.
    pub fn local_boxes(&self) -> Vec<BoxObject> {
        let upper_h = self.height - self.foot_height;
        let lower_depth = self.depth - self.back_recess;
        vec![
            BoxObject::new(
                [0.0, 0.0, self.foot_height + 0.5 * upper_h],
                [self.depth, self.width, upper_h],
                0.0,
            )
            .with_label("panel"),
            BoxObject::new(
                [0.5 * self.depth - 0.5 * lower_depth, 0.0, 0.5 * self.foot_height],
                [lower_depth, self.width, self.foot_height],
                0.0,
            )
            .with_label("panel"),
        ]
    }

    /// World-frame boxes for the panel placed at `pose`.
    pub fn boxes_at(&self, pose: &Pose2) -> Vec<BoxObject> {
        self.local_boxes()
            .into_iter()
            .map(|mut b| {
                let c = pose.transform_point([b.center[0], b.center[1]]);
                b.center = [c[0], c[1], b.center[2]];
                b.yaw = pose.yaw;
                b
            })
            .collect()
    }

    pub fn footprint(&self) -> f64 {
        self.depth * self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_intersection_front_face() {
        let b = BoxObject::new([10.0, 0.0, 0.5], [1.0, 2.0, 1.0], 0.0);
        let t = b.intersect(&Point3::new(0.0, 0.0, 0.5), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 9.5).abs() < 1e-12);
        assert!(b.intersect(&Point3::new(0.0, 0.0, 2.0), &Vector3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn yawed_box_intersection() {
        let b = BoxObject::new([5.0, 0.0, 0.0], [1.0, 1.0, 1.0], std::f64::consts::FRAC_PI_4);
        let t = b.intersect(&Point3::new(0.0, 0.0, 0.0), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - (5.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn ground_plane_cast() {
        let s = Scene::new(Rect::new(-10.0, -10.0, 10.0, 10.0));
        let d = Vector3::new(1.0, 0.0, -1.0).normalize();
        let t = s.cast(&Point3::new(0.0, 0.0, 1.0), &d, 100.0).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-12);
        assert!(s.cast(&Point3::new(0.0, 0.0, 1.0), &Vector3::new(1.0, 0.0, 0.1), 100.0).is_none());
    }

    #[test]
    fn validation_rejects_bad_scene() {
        let mut s = Scene::new(Rect::new(0.0, 0.0, 0.0, 1.0));
        assert!(s.validate().is_err());
        s.arena_bounds = Rect::new(0.0, 0.0, 1.0, 1.0);
        s.objects.push(BoxObject::new([0.0; 3], [1.0, 0.0, 1.0], 0.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn panel_boxes_share_front_face() {
        let g = PanelGeometry::default();
        let boxes = g.local_boxes();
        let front = |b: &BoxObject| b.center[0] + 0.5 * b.extents[0];
        let back = |b: &BoxObject| b.center[0] - 0.5 * b.extents[0];
        assert!((front(&boxes[0]) - front(&boxes[1])).abs() < 1e-12);
        assert!((back(&boxes[1]) - back(&boxes[0]) - g.back_recess).abs() < 1e-12);
    }
}
