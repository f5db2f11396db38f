//! Exact k-nearest-neighbor queries over 3D points with a kd-tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::scene::linalg::{dist2, Vec3};
use crate::Real;

const LEAF_SIZE: usize = 8;

enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Static kd-tree over a borrowed point slice.
///
/// Queries are exact. Neighbors are ordered by squared distance and then by
/// index, so equidistant points resolve the same way as a brute-force scan.
pub struct KdTree<'a, T> {
    points: &'a [Vec3<T>],
    order: Vec<u32>,
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate<T> {
    dist2: T,
    index: u32,
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&other.dist2)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

impl<'a, T: Real> KdTree<'a, T> {
    pub fn new(points: &'a [Vec3<T>]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split the widest axis at the median
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for &i in &self.order[start..end] {
            let p = self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap_or(Ordering::Equal))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .partial_cmp(&points[b as usize][axis])
                .unwrap_or(Ordering::Equal)
        });
        let value = points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` points nearest to `query` as `(index, squared distance)`,
    /// closest first. `exclude` is skipped, which is how self-matches are
    /// dropped.
    pub fn nearest(&self, query: Vec3<T>, k: usize, exclude: Option<usize>) -> Vec<(usize, T)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, exclude.map(|e| e as u32), &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.index as usize, c.dist2))
            .collect()
    }

    fn search(
        &self,
        node: usize,
        query: Vec3<T>,
        k: usize,
        exclude: Option<u32>,
        heap: &mut BinaryHeap<Candidate<T>>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        dist2: dist2(query, self.points[i as usize]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                // ties must be visited too, a lower index on the far side can win
                let full = heap.len() == k;
                if !full || diff * diff <= heap.peek().expect("heap is full").dist2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

/// For every point, its `k` nearest other points as `(index, squared
/// distance)`, closest first. Queries run in parallel.
pub fn knn_all<T: Real>(points: &[Vec3<T>], k: usize) -> Vec<Vec<(usize, T)>> {
    let tree = KdTree::new(points);
    (0..points.len())
        .into_par_iter()
        .map(|i| tree.nearest(points[i], k, Some(i)))
        .collect()
}
