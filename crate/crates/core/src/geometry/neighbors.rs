//! Exact nearest-neighbour queries.
//!
//! [`nearest_brute`] is the reference path. [`NearestIndex`] is a kd-tree that
//! returns the same `(index, squared distance)` pair, including the
//! lowest-index tie rule, and is what the metrics use for larger clouds.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::cloud::{dist2, PointCloud};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

/// Below this many points the brute-force scan is used directly.
pub const BRUTE_FORCE_CUTOFF: usize = 32;

/// Nearest point of `points` to `query`: `(index, squared distance)`, lowest
/// index on ties.
pub fn nearest_brute(points: &[[f64; 3]], query: &[f64; 3]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = dist2(p, query);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a point set.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

impl NearestIndex {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        let root = if points.is_empty() {
            nodes.push(Node::Leaf { start: 0, end: 0 });
            0
        } else {
            build(&points, &mut order, 0, points.len(), &mut nodes)
        };
        Self {
            points,
            order,
            nodes,
            root,
        }
    }

    pub fn from_cloud<T: Real>(cloud: &PointCloud<T>) -> Self {
        Self::new(cloud.to_f64_points())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// `(index, squared distance)` of the nearest point; lowest index on ties.
    pub fn nearest(&self, query: &[f64; 3]) -> (usize, f64) {
        if self.points.len() <= BRUTE_FORCE_CUTOFF {
            return nearest_brute(&self.points, query);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        best
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(&self.points[i], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Equal-distance candidates may live across the plane, so only
                // strictly farther subtrees are pruned.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(
    points: &[[f64; 3]],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return nodes.len() - 1;
    }
    let slice = &order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice {
        for d in 0..3 {
            lo[d] = lo[d].min(points[i][d]);
            hi[d] = hi[d].max(points[i][d]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            (hi[a] - lo[a])
                .partial_cmp(&(hi[b] - lo[b]))
                .unwrap_or(Ordering::Equal)
        })
        .unwrap_or(0);
    if hi[axis] - lo[axis] == 0.0 {
        nodes.push(Node::Leaf { start, end });
        return nodes.len() - 1;
    }
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let value = points[order[start + mid]][axis];
    // Left holds coordinates <= value, right holds >= value.
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes.push(Node::Split {
        axis,
        value,
        left,
        right,
    });
    nodes.len() - 1
}

/// Indices of the `k` nearest points of `src` to `query`, ascending distance,
/// lowest index on ties.
pub fn knn<T: Real>(src: &PointCloud<T>, query: [f64; 3], k: usize) -> Result<Vec<usize>> {
    knn_in(&src.to_f64_points(), query, k)
}

pub(crate) fn knn_in(points: &[[f64; 3]], query: [f64; 3], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let mut keyed: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (dist2(p, &query), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, cmp);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(cmp);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect()
    }

    #[test]
    fn kdtree_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 5, 33, 100, 500] {
            let pts = random_points(&mut rng, n);
            let tree = NearestIndex::new(pts.clone());
            for _ in 0..200 {
                let q = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
                assert_eq!(tree.nearest(&q), nearest_brute(&pts, &q));
            }
        }
    }

    #[test]
    fn kdtree_tie_rule_on_duplicates_and_lattice() {
        // Lattice with many equidistant candidates and exact duplicates.
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let dupes = pts.clone();
        pts.extend(dupes);
        let tree = NearestIndex::new(pts.clone());
        for x in 0..9 {
            for y in 0..9 {
                let q = [x as f64 * 0.5, y as f64 * 0.5, 1.0];
                assert_eq!(tree.nearest(&q), nearest_brute(&pts, &q));
            }
        }
    }

    #[test]
    fn knn_lattice_center() {
        let mut pts = Vec::new();
        for x in -1..=1 {
            for y in -1..=1 {
                for z in -1..=1 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let got = knn(&cloud, [0.0, 0.0, 0.0], 7).unwrap();
        // Index of (x,y,z) is 9(x+1) + 3(y+1) + (z+1); center is 13, face neighbours
        // sorted by index are 4, 10, 12, 14, 16, 22.
        assert_eq!(got, vec![13, 4, 10, 12, 14, 16, 22]);
        assert_eq!(knn(&cloud, [1.0, 1.0, 1.0], 1).unwrap(), vec![26]);
        assert!(knn(&cloud, [0.0; 3], 28).is_err());
        assert!(knn(&cloud, [0.0; 3], 0).is_err());
        let all = knn(&cloud, [0.0; 3], 27).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..27).collect::<Vec<_>>());
    }
}
