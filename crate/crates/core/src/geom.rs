//! Points, clouds, rigid transforms and the least-squares rigid solver.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix3x4, Unit, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spatial::NeighborIndex;

pub use nalgebra::Point3;

/// Minimal-sample triangles with area below this factor times pr² are rejected.
pub const COLLINEARITY_AREA_FACTOR: f64 = 1e-6;

pub(crate) fn is_finite_point<T: Real>(p: &Point3<T>) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Squared Euclidean distance, always summed in x, y, z order so that every
/// caller (index, linear scans, oracles) gets bit-identical values.
#[inline]
pub fn distance_squared<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn distance<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    distance_squared(a, b).sqrt()
}

/// An ordered collection of finite 3D points with a lazily cached resolution.
#[derive(Debug, Clone)]
pub struct PointCloud<T: Real> {
    points: Vec<Point3<T>>,
    resolution: OnceLock<T>,
}

impl<T: Real> PointCloud<T> {
    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !is_finite_point(p)) {
            return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self::from_finite(points))
    }

    pub(crate) fn from_finite(points: Vec<Point3<T>>) -> Self {
        Self { points, resolution: OnceLock::new() }
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<T>> {
        self.points
    }

    /// Point-cloud resolution (pr), computed on first use and cached.
    pub fn resolution(&self) -> Result<T> {
        if let Some(pr) = self.resolution.get() {
            return Ok(*pr);
        }
        let pr = cloud_resolution(self)?;
        Ok(*self.resolution.get_or_init(|| pr))
    }

    /// Returns the cached resolution without computing it.
    pub fn cached_resolution(&self) -> Option<T> {
        self.resolution.get().copied()
    }

    /// New cloud holding `self`'s points mapped through `transform`.
    pub fn transformed(&self, transform: &RigidTransform<T>) -> Self {
        Self::from_finite(self.points.iter().map(|p| transform.apply(p)).collect())
    }

    /// Axis-aligned bounding box `(min, max)`, or `None` for an empty cloud.
    pub fn bounding_box(&self) -> Option<(Point3<T>, Point3<T>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }
}

/// Mean distance from each point to its nearest other point.
///
/// Uses the exact spatial index; duplicates count as distance 0.
pub fn cloud_resolution<T: Real>(cloud: &PointCloud<T>) -> Result<T> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints(cloud.len()));
    }
    let index = NeighborIndex::build(cloud)?;
    let mut sum = T::zero();
    for p in cloud.points() {
        // the first hit is the point itself (or a coincident duplicate)
        let hits = index.knn(p, 2)?;
        sum += hits[1].distance;
    }
    Ok(sum / T::lit(cloud.len() as f64))
}

/// A 6-DoF pose: `p ↦ R·p + t` with `R ∈ SO(3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Real> {
    rotation: Matrix3<T>,
    translation: Vector3<T>,
}

impl<T: Real> RigidTransform<T> {
    /// Tolerance on ‖RᵀR − I‖ and |det R − 1|.
    pub fn so3_tolerance() -> T {
        T::lit(1e-9).max(T::default_epsilon() * T::lit(1e3))
    }

    /// Validating constructor.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self> {
        let tol = Self::so3_tolerance();
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = (rotation.determinant() - T::one()).abs();
        if !(ortho <= tol && det <= tol) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("rotation is not in SO(3)".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: &Vector3<T>, angle: T, translation: Vector3<T>) -> Self {
        let rotation = if angle == T::zero() {
            Matrix3::identity()
        } else {
            nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
        };
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    /// `R·p + t`.
    #[inline]
    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// The transform that applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Row-major `[R | t]`.
    pub fn to_matrix(&self) -> Matrix3x4<T> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix3x4<T>) -> Result<Self> {
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    /// ‖RᵀR − I‖_F and |det R − 1|.
    pub fn so3_residuals(&self) -> (T, T) {
        (
            (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm(),
            (self.rotation.determinant() - T::one()).abs(),
        )
    }
}

impl<T: Real> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

/// Free-function form of [`RigidTransform::apply`].
pub fn apply_transform<T: Real>(transform: &RigidTransform<T>, p: &Point3<T>) -> Point3<T> {
    transform.apply(p)
}

/// `compose(a, b)` applies `b` first, then `a`.
pub fn compose<T: Real>(a: &RigidTransform<T>, b: &RigidTransform<T>) -> RigidTransform<T> {
    a.compose(b)
}

pub fn invert<T: Real>(transform: &RigidTransform<T>) -> RigidTransform<T> {
    transform.inverse()
}

pub fn triangle_area<T: Real>(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> T {
    (b - a).cross(&(c - a)).norm() * T::lit(0.5)
}

/// True when the triangle is too thin to determine a rotation, measured
/// against the resolution `pr` of the cloud the points came from.
pub fn is_degenerate_triangle<T: Real>(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>, pr: T) -> bool {
    !(triangle_area(a, b, c) >= T::lit(COLLINEARITY_AREA_FACTOR) * pr * pr)
}

/// Least-squares rigid transform mapping each `pairs[i].0` onto `pairs[i].1`.
///
/// Kabsch construction: demean both sides, SVD of the cross-covariance,
/// flip the last singular direction when the product would be a reflection.
pub fn estimate_rigid_transform<T: Real>(pairs: &[(Point3<T>, Point3<T>)]) -> Result<RigidTransform<T>> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientPairs(pairs.len()));
    }
    let n = T::lit(pairs.len() as f64);
    let (src_sum, dst_sum) =
        pairs.iter().fold((Vector3::zeros(), Vector3::zeros()), |(s, d), (a, b)| (s + a.coords, d + b.coords));
    let src_centroid = src_sum / n;
    let dst_centroid = dst_sum / n;

    let mut scatter = Matrix3::<T>::zeros();
    let mut cross = Matrix3::<T>::zeros();
    for (a, b) in pairs {
        let da = a.coords - src_centroid;
        let db = b.coords - dst_centroid;
        scatter += da * da.transpose();
        cross += da * db.transpose();
    }

    // collinear sources leave the second principal spread at zero
    let mut spread: Vec<T> = scatter.symmetric_eigenvalues().iter().copied().collect();
    spread.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let rel_eps = T::lit(1e-12).max(T::default_epsilon());
    if !(spread[0] > T::zero()) || !(spread[1] > rel_eps * spread[0]) {
        return Err(Error::DegenerateSample);
    }
    if pairs.iter().all(|(a, b)| a == b) {
        return Ok(RigidTransform::identity());
    }

    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(Error::DegenerateSample)?;
    let v = svd.v_t.ok_or(Error::DegenerateSample)?.transpose();
    let mut fix = Matrix3::<T>::identity();
    if (v * u.transpose()).determinant() < T::zero() {
        fix[(2, 2)] = -T::one();
    }
    let rotation = refine_rotation(v * fix * u.transpose(), &cross);
    let translation = dst_centroid - rotation * src_centroid;
    Ok(RigidTransform { rotation, translation })
}

/// Polishes a near-optimal Procrustes rotation with Newton steps on the
/// stationarity condition `sym(R·H) = R·H`.
///
/// The SVD's backward error is amplified by 1/σ₂ on thin samples; each step
/// solves `(tr S·I − S)·ω = −vee(G − Gᵀ)` for `G = R·H`, `S = sym(G)`, and
/// left-multiplies by `exp([ω]×)`.
fn refine_rotation<T: Real>(mut rotation: Matrix3<T>, cross: &Matrix3<T>) -> Matrix3<T> {
    for _ in 0..2 {
        let g = rotation * cross;
        let skew = g - g.transpose();
        let residual = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
        let sym = (g + g.transpose()) * T::lit(0.5);
        let system = Matrix3::identity() * sym.trace() - sym;
        let Some(step) = system.lu().solve(&(-residual)) else { break };
        if !step.iter().all(|v| v.is_finite()) || step.norm() > T::lit(1e-3) {
            break;
        }
        rotation = nalgebra::Rotation3::new(step).into_inner() * rotation;
    }
    rotation
}
