use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::DetectorParams;
use crate::spatial::{GridIndex, UnionFind};

/// A group of detection points, optionally carrying track state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub points: Vec<Point3<f64>>,
    pub centroid: Point3<f64>,
    /// Axis-aligned bounding box size (m).
    pub bbox_dims: Vector3<f64>,
    pub first_seen: f64,
    pub last_seen: f64,
    pub track_id: u64,
    /// Number of frames merged into this track.
    pub observations: u32,
}

impl Cluster {
    /// Build a cluster from a non-empty point set.
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        assert!(!points.is_empty(), "cluster needs at least one point");
        let mut lo = points[0].coords;
        let mut hi = lo;
        let mut sum = Vector3::zeros();
        for p in &points {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
            sum += p.coords;
        }
        let centroid = Point3::from(sum / points.len() as f64);
        Self { points, centroid, bbox_dims: hi - lo, first_seen: 0.0, last_seen: 0.0, track_id: 0, observations: 1 }
    }

    pub fn mean_height(&self) -> f64 {
        self.points.iter().map(|p| p.z).sum::<f64>() / self.points.len() as f64
    }

    pub fn planar_distance(&self, other: &Cluster) -> f64 {
        (self.centroid.x - other.centroid.x).hypot(self.centroid.y - other.centroid.y)
    }
}

/// Connected components under `distance <= cluster_tolerance`, dropping small components.
pub fn cluster_detections(points: &[Point3<f64>], params: &DetectorParams) -> Vec<Cluster> {
    let tol = params.cluster_tolerance;
    let tol2 = tol * tol;
    let grid = GridIndex::new(points, tol);
    let mut uf = UnionFind::new(points.len());
    for (i, p) in points.iter().enumerate() {
        for j in grid.candidates(p) {
            if j > i && (points[j] - p).norm_squared() <= tol2 {
                uf.union(i, j);
            }
        }
    }
    uf.groups()
        .into_iter()
        .filter(|g| g.len() >= params.min_cluster_points.max(1))
        .map(|g| Cluster::from_points(g.into_iter().map(|i| points[i]).collect()))
        .collect()
}

/// Replace each cluster's bounding box by that of the whole object it lies on: the connected
/// set of above-ground scan returns reachable from the detections. Growth stops once the box
/// exceeds `panel_max_dims`, since the cluster is rejected either way.
pub fn extend_to_objects(clusters: &mut [Cluster], returns: &[Point3<f64>], params: &DetectorParams) {
    let support: Vec<Point3<f64>> = returns.iter().copied().filter(|p| p.z > params.ground_clearance).collect();
    if support.is_empty() {
        return;
    }
    let tol = params.cluster_tolerance;
    let grid = GridIndex::new(&support, tol);
    let limit = Vector3::from(params.panel_max_dims);
    for c in clusters.iter_mut() {
        let (mut lo, mut hi) = (c.centroid.coords, c.centroid.coords);
        for p in &c.points {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        let mut seen = vec![false; support.len()];
        let mut queue: Vec<Point3<f64>> = c.points.clone();
        'grow: while let Some(q) = queue.pop() {
            for j in grid.candidates(&q) {
                if !seen[j] && (support[j] - q).norm_squared() <= tol * tol {
                    seen[j] = true;
                    lo = lo.inf(&support[j].coords);
                    hi = hi.sup(&support[j].coords);
                    if (hi - lo).iter().zip(limit.iter()).any(|(d, m)| d > m) {
                        break 'grow;
                    }
                    queue.push(support[j]);
                }
            }
        }
        c.bbox_dims = hi - lo;
    }
}

/// Keep panel-sized clusters inside the arena that stand above the ground.
pub fn filter_clusters(clusters: Vec<Cluster>, params: &DetectorParams) -> Vec<Cluster> {
    clusters
        .into_iter()
        .filter(|c| {
            (0..3).all(|a| c.bbox_dims[a] <= params.panel_max_dims[a])
                && params.arena_bounds.contains(c.centroid.x, c.centroid.y)
                && c.mean_height() >= params.min_mean_height
                && c.bbox_dims.x.max(c.bbox_dims.y) >= params.min_planar_extent
        })
        .collect()
}

/// Nearest-neighbour track update. Pairs are accepted greedily by planar centroid distance
/// within `gate`; matched tracks take a running mean of their centroid. New tracks get ids above
/// every existing one.
pub fn track_clusters(tracks: Vec<Cluster>, new: Vec<Cluster>, now: f64, gate: f64, timeout: f64) -> Vec<Cluster> {
    let mut next_id = tracks.iter().map(|t| t.track_id + 1).max().unwrap_or(1);
    associate(tracks, new, now, gate, timeout, &mut next_id)
}

fn associate(mut tracks: Vec<Cluster>, new: Vec<Cluster>, now: f64, gate: f64, timeout: f64, next_id: &mut u64) -> Vec<Cluster> {
    let mut pairs = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for (ni, c) in new.iter().enumerate() {
            let d = t.planar_distance(c);
            if d <= gate {
                pairs.push((d, ti, ni));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut track_used = vec![false; tracks.len()];
    let mut new_used = vec![false; new.len()];
    for (_, ti, ni) in pairs {
        if track_used[ti] || new_used[ni] {
            continue;
        }
        track_used[ti] = true;
        new_used[ni] = true;
        let t = &mut tracks[ti];
        let c = &new[ni];
        let k = t.observations as f64 + 1.0;
        t.centroid += (c.centroid - t.centroid) / k;
        t.observations += 1;
        t.points = c.points.clone();
        t.bbox_dims = c.bbox_dims;
        t.last_seen = now;
    }
    for (ni, mut c) in new.into_iter().enumerate() {
        if !new_used[ni] {
            c.track_id = *next_id;
            *next_id += 1;
            c.first_seen = now;
            c.last_seen = now;
            c.observations = 1;
            tracks.push(c);
        }
    }
    tracks.retain(|t| now - t.last_seen <= timeout);
    tracks
}

/// Track list with its own id counter, so ids are never reused after a track expires.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub tracks: Vec<Cluster>,
    pub gate: f64,
    pub timeout: f64,
    next_id: u64,
}

impl Tracker {
    pub fn new(gate: f64, timeout: f64) -> Self {
        Self { tracks: Vec::new(), gate, timeout, next_id: 1 }
    }

    pub fn update(&mut self, new: Vec<Cluster>, now: f64) {
        let tracks = std::mem::take(&mut self.tracks);
        self.tracks = associate(tracks, new, now, self.gate, self.timeout, &mut self.next_id);
    }

    /// Tracks observed at least `min_observations` times, nearest to `from` first.
    pub fn confirmed(&self, min_observations: u32, from: [f64; 2]) -> Vec<&Cluster> {
        let mut v: Vec<&Cluster> = self.tracks.iter().filter(|t| t.observations >= min_observations).collect();
        let d = |c: &Cluster| (c.centroid.x - from[0]).hypot(c.centroid.y - from[1]);
        v.sort_by(|a, b| d(a).total_cmp(&d(b)));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_sim::Rect;
    use proptest::prelude::*;

    fn params(tol: f64) -> DetectorParams {
        DetectorParams { cluster_tolerance: tol, min_cluster_points: 1, ..DetectorParams::default() }
    }

    fn blob(x: f64, y: f64) -> Cluster {
        Cluster::from_points(vec![Point3::new(x, y, 0.5), Point3::new(x + 0.1, y, 0.6)])
    }

    #[test]
    fn extent_grows_over_attached_returns_but_not_ground() {
        let p = DetectorParams { cluster_tolerance: 0.3, ..DetectorParams::default() };
        let wall: Vec<_> = (0..41).map(|i| Point3::new(10.0, -2.0 + 0.1 * i as f64, 1.0)).collect();
        let ground: Vec<_> = (0..100).map(|i| Point3::new(5.0 + 0.1 * i as f64, 0.0, 0.01)).collect();
        let returns: Vec<_> = wall.iter().chain(&ground).copied().collect();
        let mut cl = vec![Cluster::from_points(wall[18..23].to_vec())];
        extend_to_objects(&mut cl, &returns, &p);
        assert!(cl[0].bbox_dims.y > p.panel_max_dims[1]);
        let mut alone = vec![Cluster::from_points(wall[18..23].to_vec())];
        extend_to_objects(&mut alone, &ground, &p);
        assert!((alone[0].bbox_dims.y - 0.4).abs() < 1e-9 && alone[0].bbox_dims.x == 0.0);
    }

    #[test]
    fn two_separated_groups() {
        let mut pts: Vec<Point3<f64>> = (0..5).map(|i| Point3::new(i as f64 * 0.1, 0.0, 0.5)).collect();
        pts.extend((0..5).map(|i| Point3::new(5.0 + i as f64 * 0.1, 0.0, 0.5)));
        assert_eq!(cluster_detections(&pts, &params(0.3)).len(), 2);
        assert!(cluster_detections(&[], &params(0.3)).is_empty());
    }

    #[test]
    fn chain_below_tolerance_is_one_cluster() {
        let pts: Vec<Point3<f64>> = (0..20).map(|i| Point3::new(i as f64 * 0.29, 0.0, 0.0)).collect();
        let c = cluster_detections(&pts, &params(0.3));
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].points.len(), 20);
    }

    #[test]
    fn min_points_drops_small_clusters() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0), Point3::new(10.1, 0.0, 0.0)];
        let p = DetectorParams { min_cluster_points: 2, ..params(0.3) };
        assert_eq!(cluster_detections(&pts, &p).len(), 1);
    }

    #[test]
    fn filter_rules() {
        let p = DetectorParams { panel_max_dims: [2.0; 3], arena_bounds: Rect::new(-10.0, -10.0, 10.0, 10.0), ..params(0.3) };
        let long = Cluster::from_points(vec![Point3::new(0.0, 0.0, 0.5), Point3::new(5.0, 0.0, 0.5)]);
        let outside = Cluster::from_points(vec![Point3::new(20.0, 0.0, 0.5), Point3::new(20.5, 0.0, 0.7)]);
        let flat = Cluster::from_points(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(1.5, 0.0, 0.05)]);
        let good = blob(1.0, 1.0);
        let kept = filter_clusters(vec![long, outside, flat, good.clone()], &p);
        assert_eq!(kept, vec![good.clone()]);
        let narrow = DetectorParams { min_planar_extent: 0.5, ..p };
        assert!(filter_clusters(vec![good], &narrow).is_empty());
    }

    #[test]
    fn tracking_same_cluster_twice() {
        let t = track_clusters(Vec::new(), vec![blob(3.0, 0.0)], 0.0, 1.0, 1.0);
        let t = track_clusters(t, vec![blob(3.2, 0.0)], 0.1, 1.0, 1.0);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].observations, 2);
        assert!((t[0].centroid.x - 3.15).abs() < 1e-12);
        assert_eq!(t[0].last_seen, 0.1);
    }

    #[test]
    fn stale_tracks_dropped() {
        let t = track_clusters(Vec::new(), vec![blob(3.0, 0.0)], 0.0, 1.0, 1.0);
        let t = track_clusters(t, Vec::new(), 1.5, 1.0, 1.0);
        assert!(t.is_empty());
    }

    #[test]
    fn close_clusters_with_small_gate_stay_distinct() {
        let t = track_clusters(Vec::new(), vec![blob(0.0, 0.0), blob(0.4, 0.0)], 0.0, 0.2, 1.0);
        let t = track_clusters(t, vec![blob(0.0, 0.0), blob(0.4, 0.0)], 0.1, 0.2, 1.0);
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|c| c.observations == 2));
        assert_ne!(t[0].track_id, t[1].track_id);
    }

    #[test]
    fn tracker_ids_not_reused() {
        let mut tr = Tracker::new(1.0, 0.5);
        tr.update(vec![blob(0.0, 0.0)], 0.0);
        tr.update(Vec::new(), 1.0);
        tr.update(vec![blob(0.0, 0.0)], 1.1);
        assert_eq!(tr.tracks[0].track_id, 2);
    }

    fn brute_components(pts: &[Point3<f64>], tol: f64) -> Vec<Vec<usize>> {
        let n = pts.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if (pts[i] - pts[j]).norm() <= tol && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for l in 0..n {
            let g: Vec<usize> = (0..n).filter(|&i| label[i] == l).collect();
            if !g.is_empty() {
                groups.push(g);
            }
        }
        groups
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn clustering_matches_transitive_closure(
            raw in prop::collection::vec((0.0..4.0f64, 0.0..4.0f64, 0.0..1.0f64), 0..200),
            tol in 0.05..0.6f64,
        ) {
            let pts: Vec<Point3<f64>> = raw.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
            let want = brute_components(&pts, tol);
            let clusters = cluster_detections(&pts, &params(tol));
            prop_assert_eq!(clusters.len(), want.len());
            for (c, g) in clusters.iter().zip(&want) {
                let expected: Vec<Point3<f64>> = g.iter().map(|&i| pts[i]).collect();
                prop_assert_eq!(&c.points, &expected);
            }
            let sizes: usize = clusters.iter().map(|c| c.points.len()).sum();
            prop_assert_eq!(sizes, pts.len());
        }
    }
}
