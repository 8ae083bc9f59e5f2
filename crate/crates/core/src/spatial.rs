//! Exact nearest-neighbor search over a frozen point set.
//!
//! A median-split k-d tree with leaf buckets. Candidates are ordered by
//! `(squared distance, point index)`, so results are identical to a linear
//! scan including tie resolution (lowest index wins).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geom::{distance_squared, Point3, PointCloud};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub distance: T,
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Immutable spatial index over a copy of a cloud's points.
#[derive(Debug, Clone)]
pub struct NeighborIndex<T: Real> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    dist2: T,
    index: usize,
}

impl<T: Real> Candidate<T> {
    #[inline]
    fn better_than(&self, other: &Self) -> bool {
        self.dist2 < other.dist2 || (self.dist2 == other.dist2 && self.index < other.index)
    }
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Candidate<T> {}
impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // distances are finite, partial_cmp only fails on NaN
        self.dist2.partial_cmp(&other.dist2).unwrap_or(Ordering::Equal).then(self.index.cmp(&other.index))
    }
}

#[inline]
fn coord<T: Real>(p: &Point3<T>, axis: usize) -> T {
    p.coords[axis]
}

impl<T: Real> NeighborIndex<T> {
    pub fn build(cloud: &PointCloud<T>) -> Result<Self> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(&points, &mut order, 0, &mut nodes);
        Ok(Self { points, order, nodes })
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    /// Closest indexed point; ties resolve to the lowest index.
    pub fn nearest(&self, query: &Point3<T>) -> Neighbor<T> {
        let mut best = Candidate { dist2: T::max_value().unwrap_or_else(T::one), index: usize::MAX };
        self.nearest_in(0, query, &mut best);
        Neighbor { index: best.index, distance: best.dist2.sqrt() }
    }

    fn nearest_in(&self, node: usize, query: &Point3<T>, best: &mut Candidate<T>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Candidate { dist2: distance_squared(query, &self.points[i]), index: i };
                    if cand.better_than(best) {
                        *best = cand;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = coord(query, axis) - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.nearest_in(near, query, best);
                if diff * diff <= best.dist2 {
                    self.nearest_in(far, query, best);
                }
            }
        }
    }

    /// The `k` closest points in ascending `(distance, index)` order.
    pub fn knn(&self, query: &Point3<T>, k: usize) -> Result<Vec<Neighbor<T>>> {
        if k == 0 || k > self.points.len() {
            return Err(Error::KTooLarge { k, count: self.points.len() });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, query, k, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|c| Neighbor { index: c.index, distance: c.dist2.sqrt() }).collect())
    }

    fn knn_in(&self, node: usize, query: &Point3<T>, k: usize, heap: &mut BinaryHeap<Candidate<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Candidate { dist2: distance_squared(query, &self.points[i]), index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand.better_than(heap.peek().expect("heap holds k items")) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = coord(query, axis) - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.knn_in(near, query, k, heap);
                let visit = heap.len() < k || diff * diff <= heap.peek().expect("heap holds k items").dist2;
                if visit {
                    self.knn_in(far, query, k, heap);
                }
            }
        }
    }
}

fn build_node<T: Real>(points: &[Point3<T>], order: &mut [usize], offset: usize, nodes: &mut Vec<Node<T>>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset, end: offset + order.len() });
        return id;
    }
    // split along the widest extent
    let mut lo = points[order[0]];
    let mut hi = lo;
    for &i in order.iter() {
        let p = &points[i];
        for a in 0..3 {
            lo.coords[a] = lo.coords[a].min(p.coords[a]);
            hi.coords[a] = hi.coords[a].max(p.coords[a]);
        }
    }
    let extent = hi - lo;
    let axis = (0..3).max_by(|&a, &b| extent[a].partial_cmp(&extent[b]).unwrap_or(Ordering::Equal)).unwrap_or(0);
    if !(extent[axis] > T::zero()) {
        // all points coincide
        nodes.push(Node::Leaf { start: offset, end: offset + order.len() });
        return id;
    }

    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        coord(&points[a], axis).partial_cmp(&coord(&points[b], axis)).unwrap_or(Ordering::Equal)
    });
    let value = coord(&points[order[mid]], axis);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(points, left_part, offset, nodes);
    let right = build_node(points, right_part, offset + mid, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}

/// Convenience wrapper matching the free-function style of the other modules.
pub fn build_index<T: Real>(cloud: &PointCloud<T>) -> Result<NeighborIndex<T>> {
    NeighborIndex::build(cloud)
}
