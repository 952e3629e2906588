//! Exact k-d tree over points of arbitrary (runtime) dimension.
//!
//! Used both for 3D neighborhoods and for nearest-neighbor search in
//! descriptor space. Results are exact: radius queries return the same set
//! as a linear scan, and k-nearest queries order candidates by
//! `(squared distance, index)` so ties resolve to the lower index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 12;

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

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A neighbor returned by a k-nearest query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Squared Euclidean distance, accumulated in coordinate order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    /// Builds a tree from `coords`, a flat row-major buffer of `dim`-sized points.
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0, "k-d tree dimension must be positive");
        assert_eq!(coords.len() % dim, 0, "coordinate buffer not a multiple of dim");
        let n = coords.len() / dim;
        let mut tree = KdTree {
            dim,
            coords,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn from_points3(points: &[[f64; 3]]) -> Self {
        Self::new(3, points.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let dim = self.dim;
        let coords = &self.coords;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis]
                .total_cmp(&coords[b * dim + axis])
                .then(a.cmp(&b))
        });
        let value = coords[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for axis in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.coords[i * self.dim + axis];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (axis, hi - lo);
            }
        }
        best.0
    }

    /// Indices of all points with squared distance `<= radius²` from `query`,
    /// sorted ascending.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Vec<usize> {
        assert_eq!(query.len(), self.dim);
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.radius_visit(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_visit(&self, node: usize, query: &[f64], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if squared_distance(self.point(i), query) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let left_bound = diff.max(0.0);
                let right_bound = (-diff).max(0.0);
                if left_bound * left_bound <= r2 {
                    self.radius_visit(left, query, r2, out);
                }
                if right_bound * right_bound <= r2 {
                    self.radius_visit(right, query, r2, out);
                }
            }
        }
    }

    /// The `k` nearest points ordered by `(squared distance, index)`.
    /// `skip` excludes one index (typically the query point itself).
    pub fn nearest(&self, query: &[f64], k: usize, skip: Option<usize>) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_visit(0, query, k, skip, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|Candidate(dist_sq, index)| Neighbor { index, dist_sq })
            .collect()
    }

    fn knn_visit(&self, node: usize, query: &[f64], k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    let c = Candidate(squared_distance(self.point(i), query), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far, far_bound) = if diff <= 0.0 {
                    (left, right, -diff)
                } else {
                    (right, left, diff)
                };
                self.knn_visit(near, query, k, skip, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().map_or(f64::INFINITY, |c| c.0)
                };
                // Ties must be visited so the index tie-break stays exact.
                if far_bound * far_bound <= worst {
                    self.knn_visit(far, query, k, skip, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn radius_matches_linear_scan() {
        let coords = random_points(500, 3, 3);
        let tree = KdTree::new(3, coords.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.2..1.2)).collect();
            let r = rng.random_range(0.05..0.6);
            let brute: Vec<usize> = (0..500)
                .filter(|&i| squared_distance(&coords[i * 3..i * 3 + 3], &q) <= r * r)
                .collect();
            assert_eq!(tree.within_radius(&q, r), brute);
        }
    }

    #[test]
    fn knn_matches_sorted_scan_with_duplicates() {
        let mut coords = random_points(40, 5, 1);
        // duplicate half the points so ties must resolve by index
        let dup = coords[..100].to_vec();
        coords.extend(dup);
        let n = coords.len() / 5;
        let tree = KdTree::new(5, coords.clone());
        for qi in 0..n {
            let q = &coords[qi * 5..qi * 5 + 5];
            let mut brute: Vec<(f64, usize)> = (0..n)
                .map(|i| (squared_distance(&coords[i * 5..i * 5 + 5], q), i))
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let got = tree.nearest(q, 4, None);
            let got: Vec<(f64, usize)> = got.iter().map(|n| (n.dist_sq, n.index)).collect();
            assert_eq!(got, brute[..4].to_vec());
        }
    }

    #[test]
    fn skip_excludes_self() {
        let tree = KdTree::from_points3(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let nn = tree.nearest(&[0.0, 0.0, 0.0], 1, Some(0));
        assert_eq!(nn[0].index, 1);
        assert_eq!(nn[0].dist_sq, 1.0);
    }

    #[test]
    fn identical_points_build() {
        let tree = KdTree::from_points3(&vec![[1.0, 2.0, 3.0]; 100]);
        assert_eq!(tree.within_radius(&[1.0, 2.0, 3.0], 0.0).len(), 100);
        assert_eq!(tree.nearest(&[0.0, 0.0, 0.0], 3, None)[2].index, 2);
    }
}
