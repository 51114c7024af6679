use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::scan_sim::{BoxObject, PanelGeometry};
use crate::spatial::KdTree3;

/// Panel surface as a point cloud in the panel's local frame (origin on the ground at the
/// footprint centre, +x the front normal).
#[derive(Debug, Clone)]
pub struct PanelModel {
    tree: KdTree3,
    /// Outward face normal per point, when the model was sampled from known faces.
    normals: Option<Vec<Vector3<f64>>>,
    pub footprint: f64,
    /// Nominal distance between neighbouring surface samples (m).
    pub spacing: f64,
}

impl PanelModel {
    pub fn from_points(points: Vec<Point3<f64>>, footprint: f64, spacing: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("panel model has no points".into()));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput("model spacing must be positive".into()));
        }
        Ok(Self { tree: KdTree3::new(&points), normals: None, footprint, spacing })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != self.len() {
            return Err(Error::InvalidInput("one normal per model point required".into()));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    /// Sample every exposed face of the panel boxes on a grid no coarser than `spacing`.
    /// Faces resting on the ground and surface patches shared between boxes are left out.
    pub fn from_geometry(geometry: &PanelGeometry, spacing: f64) -> Result<Self> {
        let boxes = geometry.local_boxes();
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for (i, b) in boxes.iter().enumerate() {
            for (p, n) in sample_box_surface(b, spacing) {
                if p.z < 1e-9 {
                    continue;
                }
                let covered = boxes.iter().enumerate().any(|(j, o)| j != i && o.contains(&p, 1e-9));
                if !covered {
                    points.push(p);
                    normals.push(n);
                }
            }
        }
        Self::from_points(points, geometry.footprint(), spacing)?.with_normals(normals)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        self.tree.points()
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Nearest model point to a query in the model frame: `(index, distance)`.
    pub fn nearest(&self, q: &Point3<f64>) -> (usize, f64) {
        let (i, d2) = self.tree.nearest(q).expect("model is never empty");
        (i, d2.sqrt())
    }

    /// Closest surface point to `q`: the nearest sample moved along its face to the foot of
    /// the perpendicular from `q`, or the sample itself when normals are unknown.
    pub fn closest_surface_point(&self, q: &Point3<f64>) -> Point3<f64> {
        let (i, _) = self.nearest(q);
        let m = self.points()[i];
        match &self.normals {
            Some(n) => {
                let n = n[i];
                let along = q - m;
                // Stay within half a sample of the anchor so edges are not extended.
                let tangential = along - n * along.dot(&n);
                let t = tangential.norm();
                let limit = 0.5 * self.spacing;
                let tangential = if t > limit { tangential * (limit / t) } else { tangential };
                m + tangential
            }
            None => m,
        }
    }

    pub fn centroid(&self) -> Point3<f64> {
        let s = self.points().iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords);
        Point3::from(s / self.len() as f64)
    }
}

fn linspace(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing).ceil().max(1.0) as usize;
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Axis-aligned box (yaw ignored) surface samples including edges, with outward normals.
fn sample_box_surface(b: &BoxObject, spacing: f64) -> Vec<(Point3<f64>, Vector3<f64>)> {
    let c = b.center;
    let h = [0.5 * b.extents[0], 0.5 * b.extents[1], 0.5 * b.extents[2]];
    let mut out = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let us = linspace(c[u] - h[u], c[u] + h[u], spacing);
        let vs = linspace(c[v] - h[v], c[v] + h[v], spacing);
        for side in [-1.0, 1.0] {
            for &a in &us {
                for &bv in &vs {
                    let mut p = [0.0; 3];
                    p[axis] = c[axis] + side * h[axis];
                    p[u] = a;
                    p[v] = bv;
                    let mut n = Vector3::zeros();
                    n[axis] = side;
                    out.push((Point3::new(p[0], p[1], p[2]), n));
                }
            }
        }
    }
    out
}
