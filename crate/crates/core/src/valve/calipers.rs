use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Minimum-area enclosing rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub center: [f64; 2],
    /// Side lengths sorted so that `extents[0] <= extents[1]`.
    pub extents: [f64; 2],
    /// Direction of one side, in `[0, π/2)`.
    pub angle: f64,
    /// Side lengths along `angle` and along `angle + π/2`.
    pub sides: [f64; 2],
}

impl RotatedBox {
    pub fn area(&self) -> f64 {
        self.sides[0] * self.sides[1]
    }

    pub fn axes(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.angle.sin_cos();
        ([c, s], [-s, c])
    }

    /// Whether `p` lies inside the box grown by `eps` on every side.
    pub fn contains(&self, p: [f64; 2], eps: f64) -> bool {
        let (e0, e1) = self.axes();
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        dot(d, e0).abs() <= 0.5 * self.sides[0] + eps && dot(d, e1).abs() <= 0.5 * self.sides[1] + eps
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (e0, e1) = self.axes();
        let (a, b) = (0.5 * self.sides[0], 0.5 * self.sides[1]);
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .map(|(i, j)| [self.center[0] + i * a * e0[0] + j * b * e1[0], self.center[1] + i * a * e0[1] + j * b * e1[1]])
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull without collinear vertices (monotone chain).
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area rectangle enclosing `points`, by rotating calipers over the convex hull.
pub fn min_area_rect(points: &[[f64; 2]]) -> Result<RotatedBox> {
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let hull = convex_hull(points);
    let n = hull.len();
    let span = hull.iter().flat_map(|p| hull.iter().map(move |q| (p[0] - q[0]).hypot(p[1] - q[1]))).fold(0.0, f64::max);
    let twice_area: f64 = (0..n).map(|i| cross([0.0, 0.0], hull[i], hull[(i + 1) % n])).sum();
    if n < 3 || twice_area.abs() <= 1e-12 * span * span {
        return Err(Error::DegenerateGeometry("need at least three non-collinear points".into()));
    }

    let edge = |i: usize| {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let l = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
    };
    let argmax = |f: &dyn Fn([f64; 2]) -> f64| (0..n).max_by(|&i, &j| f(hull[i]).total_cmp(&f(hull[j]))).unwrap();

    // Caliper pointers: farthest along the edge, farthest from it, and farthest against it.
    let e = edge(0);
    let nrm = |e: [f64; 2]| [-e[1], e[0]];
    let mut right = argmax(&|p| dot(p, e));
    let mut top = argmax(&|p| dot(p, nrm(e)));
    let mut left = argmax(&|p| -dot(p, e));
    let mut best: Option<(f64, usize, [f64; 4])> = None;
    for i in 0..n {
        let e = edge(i);
        let u = nrm(e);
        let advance = |mut k: usize, f: &dyn Fn([f64; 2]) -> f64| {
            for _ in 0..n {
                let next = (k + 1) % n;
                if f(hull[next]) > f(hull[k]) {
                    k = next;
                } else {
                    break;
                }
            }
            k
        };
        right = advance(right, &|p| dot(p, e));
        top = advance(top, &|p| dot(p, u));
        left = advance(left, &|p| -dot(p, e));
        let base = dot(hull[i], u);
        let (lo, hi) = (dot(hull[left], e), dot(hull[right], e));
        let height = dot(hull[top], u) - base;
        let area = (hi - lo) * height;
        if best.is_none_or(|(a, _, _)| area < a) {
            best = Some((area, i, [lo, hi, base, base + height]));
        }
    }
    let (_, i, [lo, hi, b0, b1]) = best.unwrap();
    let e = edge(i);
    let u = nrm(e);
    let (cs, cu) = (0.5 * (lo + hi), 0.5 * (b0 + b1));
    let center = [cs * e[0] + cu * u[0], cs * e[1] + cu * u[1]];
    let mut angle = e[1].atan2(e[0]).rem_euclid(FRAC_PI_2);
    let mut sides = [hi - lo, b1 - b0];
    // The edge direction was reduced by an odd multiple of π/2 when its quadrant is odd.
    let quadrant = (e[1].atan2(e[0]).rem_euclid(2.0 * std::f64::consts::PI) / FRAC_PI_2).floor() as i64;
    if quadrant % 2 == 1 {
        sides.swap(0, 1);
    }
    if angle >= FRAC_PI_2 - 1e-12 {
        angle = 0.0;
        sides.swap(0, 1);
    }
    let extents = if sides[0] <= sides[1] { sides } else { [sides[1], sides[0]] };
    Ok(RotatedBox { center, extents, angle, sides })
}

/// Area of the bounding rectangle whose first side points along `theta`.
pub fn area_at_angle(points: &[[f64; 2]], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (mut a0, mut a1, mut b0, mut b1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let a = c * p[0] + s * p[1];
        let b = -s * p[0] + c * p[1];
        a0 = a0.min(a);
        a1 = a1.max(a);
        b0 = b0.min(b);
        b1 = b1.max(b);
    }
    (a1 - a0) * (b1 - b0)
}
