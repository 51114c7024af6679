//! Small spatial indices used by clustering, ICP and scoring.

use nalgebra::Point3;
use std::collections::HashMap;

/// Static 3D k-d tree for nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree3 {
    points: Vec<Point3<f64>>,
    // Implicit tree: `order[lo..hi]` is a subtree whose root is the median element.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree3 {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        Self::build(points, &mut order, &mut axes, 0, points.len());
        Self { points: points.to_vec(), order, axes }
    }

    fn build(points: &[Point3<f64>], order: &mut [usize], axes: &mut [u8], lo: usize, hi: usize) {
        if hi <= lo {
            return;
        }
        let slice = &mut order[lo..hi];
        let (mut min, mut max) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for &i in slice.iter() {
            for a in 0..3 {
                min[a] = min[a].min(points[i][a]);
                max[a] = max[a].max(points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .unwrap_or(0);
        let mid = (hi - lo) / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        axes[lo + mid] = axis as u8;
        Self::build(points, order, axes, lo, lo + mid);
        Self::build(points, order, axes, lo + mid + 1, hi);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Index and squared distance of the nearest stored point.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), &mut best);
        Some(best)
    }

    fn search(&self, q: &Point3<f64>, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi <= lo {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (first, second) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, first.0, first.1, best);
        if diff * diff <= best.1 {
            self.search(q, second.0, second.1, best);
        }
    }
}

/// Uniform grid hash for fixed-radius neighbour queries.
#[derive(Debug)]
pub struct GridIndex {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl GridIndex {
    pub fn new(points: &[Point3<f64>], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(p: &Point3<f64>, cell: f64) -> (i64, i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    /// Indices of points whose cell neighbours the query's cell (superset of the radius ball
    /// when `radius <= cell`).
    pub fn candidates<'a>(&'a self, p: &Point3<f64>) -> impl Iterator<Item = usize> + 'a {
        let (kx, ky, kz) = Self::key(p, self.cell);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                (-1..=1).flat_map(move |dz| {
                    self.cells.get(&(kx + dx, ky + dy, kz + dz)).into_iter().flatten().copied()
                })
            })
        })
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    /// Group element indices by root, groups ordered by their smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            let g = *by_root.entry(r).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[g].push(i);
        }
        out
    }
}
