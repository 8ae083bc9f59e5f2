#![allow(dead_code)]

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regscore::metrics::{Correspondence, CorrespondenceSet, MetricKind, MetricSpec};
use regscore::{Point3, PointCloud, RigidTransform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng, half: f64) -> Point3<f64> {
    Point3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

pub fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis };
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let t = Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    RigidTransform::from_axis_angle(&axis, angle, t)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, half: f64) -> PointCloud<f64> {
    PointCloud::new((0..n).map(|_| random_point(rng, half)).collect()).unwrap()
}

/// Brute-force nearest: lowest index among the minimal squared distances.
pub fn scan_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d2 = regscore::geom::distance_squared(q, p);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    (best.0, best.1.sqrt())
}

/// Brute-force k nearest sorted by (squared distance, index).
pub fn scan_knn(points: &[Point3<f64>], q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> =
        points.iter().enumerate().map(|(i, p)| (regscore::geom::distance_squared(q, p), i)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(d2, i)| (i, d2.sqrt())).collect()
}

/// O(n²) point-cloud resolution.
pub fn brute_resolution(points: &[Point3<f64>]) -> f64 {
    let mut sum = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                best = best.min(regscore::geom::distance_squared(p, q));
            }
        }
        sum += best.sqrt();
    }
    sum / points.len() as f64
}

pub fn max_abs_diff(a: &nalgebra::Matrix3<f64>, b: &nalgebra::Matrix3<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn spec(kind: MetricKind, t: f64, m: f64, pr: f64) -> MetricSpec<f64> {
    MetricSpec::new(kind, t, m, 2.0 * pr, pr).unwrap()
}

pub fn random_corrs(r: &mut ChaCha8Rng, n: usize) -> CorrespondenceSet<f64> {
    (0..n)
        .map(|_| {
            let s = random_point(r, 20.0);
            let t =
                s + Vector3::new(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0), r.random_range(-12.0..12.0));
            Correspondence::new(s, t)
        })
        .collect()
}

/// Builds correspondences where hypothesis B (identity) has strictly smaller
/// error than hypothesis A (a small translation) on every inlier, and both
/// see the same inlier set.
pub fn dominated_pair(
    r: &mut ChaCha8Rng,
    t: f64,
) -> (CorrespondenceSet<f64>, RigidTransform<f64>, RigidTransform<f64>) {
    let u = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)).normalize();
    let beta = r.random_range(0.01..0.3) * t;
    let mut items = Vec::new();
    for _ in 0..r.random_range(3..40) {
        let s = random_point(r, 50.0);
        let alpha = r.random_range(0.0..0.3) * t;
        let w = u.cross(&Vector3::new(r.random_range(-1.0..1.0), 1.0, 0.5)).normalize() * r.random_range(0.0..0.3) * t;
        items.push(Correspondence::new(s, s + u * alpha + w));
    }
    for _ in 0..r.random_range(0..40) {
        let s = random_point(r, 50.0);
        let dir = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 1.0).normalize();
        items.push(Correspondence::new(s, s + dir * (2.0 * t + r.random_range(0.0..5.0) * t)));
    }
    items.shuffle(r);
    let accurate = RigidTransform::identity();
    let sloppy = RigidTransform::from_translation(-u * beta);
    (CorrespondenceSet::new(items).unwrap(), sloppy, accurate)
}
