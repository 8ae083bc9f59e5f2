//! Hypothesis-evaluation scoring functions.
//!
//! Every kind is oriented so that a higher score is better. Correspondence
//! kinds sum a per-correspondence score `s(e)` over the transformation errors
//! `e = ‖R·p_s + t − p_t‖`; the two whole-cloud kinds look at the transformed
//! source cloud against a neighbor index over the target cloud.
//!
//! The correspondence scores share one piecewise shape: an inlier branch for
//! `e < t` (strict) and an outlier branch otherwise.
//!
//! | kind | `e < t` | `e ≥ t` |
//! |---|---|---|
//! | inlier-count | 1 | 0 |
//! | mae | `|e−t|/t` | 0 |
//! | mse | `|e−t|²/t²` | 0 |
//! | log-cosh | `ln cosh(ê−t̂) / ln cosh(t̂)` with `ê = e/pr`, `t̂ = t/pr` | 0 |
//! | exp | `exp(−e²/(2t²))` | 0 |
//! | quantile | `m|e−t|/t` | `(1−m)|e−t|/e` |
//! | neg-quantile | `m|e−t|/t` | `(m−1)|e−t|/e` |
//! | huber | `−e²/2` | `−t(e − t/2)` |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform};
use crate::scalar::Real;
use crate::spatial::NeighborIndex;

pub const DEFAULT_T_PR: f64 = 7.5;
pub const DEFAULT_M: f64 = 0.9;
pub const DEFAULT_T_OVERLAP_PR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    InlierCount,
    Huber,
    Mae,
    Mse,
    LogCosh,
    Exp,
    Quantile,
    NegQuantile,
    PcDist,
    OverlapCount,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::InlierCount,
        MetricKind::Huber,
        MetricKind::Mae,
        MetricKind::Mse,
        MetricKind::LogCosh,
        MetricKind::Exp,
        MetricKind::Quantile,
        MetricKind::NegQuantile,
        MetricKind::PcDist,
        MetricKind::OverlapCount,
    ];

    /// The six continuous metrics that weight inliers by their error.
    pub const PROPOSED: [MetricKind; 6] = [
        MetricKind::Mae,
        MetricKind::Mse,
        MetricKind::LogCosh,
        MetricKind::Exp,
        MetricKind::Quantile,
        MetricKind::NegQuantile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::InlierCount => "inlier-count",
            MetricKind::Huber => "huber",
            MetricKind::Mae => "mae",
            MetricKind::Mse => "mse",
            MetricKind::LogCosh => "log-cosh",
            MetricKind::Exp => "exp",
            MetricKind::Quantile => "quantile",
            MetricKind::NegQuantile => "neg-quantile",
            MetricKind::PcDist => "pc-dist",
            MetricKind::OverlapCount => "overlap-count",
        }
    }

    /// True for kinds scored from correspondences alone.
    pub fn is_correspondence_based(self) -> bool {
        !matches!(self, MetricKind::PcDist | MetricKind::OverlapCount)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown metric '{s}'")))
    }
}

/// Which scoring function to use and its parameters, all in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec<T: Real> {
    kind: MetricKind,
    t: T,
    m: T,
    t_overlap: T,
    pr: T,
}

impl<T: Real> MetricSpec<T> {
    pub fn new(kind: MetricKind, t: T, m: T, t_overlap: T, pr: T) -> Result<Self> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(t) {
            return Err(Error::InvalidSpec("t must be positive".into()));
        }
        if !(m > T::zero() && m < T::one()) {
            return Err(Error::InvalidSpec("m must lie in (0, 1)".into()));
        }
        if !positive(t_overlap) {
            return Err(Error::InvalidSpec("t_overlap must be positive".into()));
        }
        if !positive(pr) {
            return Err(Error::InvalidSpec("pr must be positive".into()));
        }
        Ok(Self { kind, t, m, t_overlap, pr })
    }

    /// Builds a spec from thresholds given in multiples of `pr`.
    pub fn in_pr_units(kind: MetricKind, pr: T, t_pr: T, m: T, t_overlap_pr: T) -> Result<Self> {
        Self::new(kind, t_pr * pr, m, t_overlap_pr * pr, pr)
    }

    /// Default parameters: t = 7.5 pr, m = 0.9, t_overlap = 2 pr.
    pub fn with_defaults(kind: MetricKind, pr: T) -> Result<Self> {
        Self::in_pr_units(kind, pr, T::lit(DEFAULT_T_PR), T::lit(DEFAULT_M), T::lit(DEFAULT_T_OVERLAP_PR))
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }
    pub fn t(&self) -> T {
        self.t
    }
    pub fn m(&self) -> T {
        self.m
    }
    pub fn t_overlap(&self) -> T {
        self.t_overlap
    }
    pub fn pr(&self) -> T {
        self.pr
    }

    pub fn with_kind(mut self, kind: MetricKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_t(self, t: T) -> Result<Self> {
        Self::new(self.kind, t, self.m, self.t_overlap, self.pr)
    }

    /// Same spec with every length parameter multiplied by `factor`.
    pub fn scaled(self, factor: T) -> Result<Self> {
        Self::new(self.kind, self.t * factor, self.m, self.t_overlap * factor, self.pr * factor)
    }

    fn require_correspondence_kind(&self) -> Result<()> {
        if self.kind.is_correspondence_based() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("{} is a whole-cloud metric", self.kind)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<T: Real> {
    pub source: Point3<T>,
    pub target: Point3<T>,
}

impl<T: Real> Correspondence<T> {
    pub fn new(source: Point3<T>, target: Point3<T>) -> Self {
        Self { source, target }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet<T: Real> {
    items: Vec<Correspondence<T>>,
}

impl<T: Real> CorrespondenceSet<T> {
    pub fn new(items: Vec<Correspondence<T>>) -> Result<Self> {
        let finite = |p: &Point3<T>| p.iter().all(|v| v.is_finite());
        if let Some(i) = items.iter().position(|c| !finite(&c.source) || !finite(&c.target)) {
            return Err(Error::InvalidInput(format!("correspondence {i} has a non-finite coordinate")));
        }
        Ok(Self { items })
    }

    /// Pairs point `i` of `source` with point `i` of `target`.
    pub fn aligned(source: &PointCloud<T>, target: &PointCloud<T>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::InvalidInput(format!(
                "index-aligned pairing needs equal sizes, got {} and {}",
                source.len(),
                target.len()
            )));
        }
        Ok(Self {
            items: source.points().iter().zip(target.points()).map(|(s, t)| Correspondence::new(*s, *t)).collect(),
        })
    }

    pub fn items(&self) -> &[Correspondence<T>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Correspondence<T>> {
        self.items.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence<T>> {
        self.items.iter()
    }
}

impl<T: Real> FromIterator<Correspondence<T>> for CorrespondenceSet<T> {
    fn from_iter<I: IntoIterator<Item = Correspondence<T>>>(iter: I) -> Self {
        Self { items: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisScore<T> {
    pub value: T,
    pub kind: MetricKind,
}

/// `‖R·p_s + t − p_t‖`.
#[inline]
pub fn transformation_error<T: Real>(c: &Correspondence<T>, transform: &RigidTransform<T>) -> T {
    (transform.apply(&c.source) - c.target).norm()
}

/// `ln cosh(x)` without overflow for large `|x|` or cancellation near 0.
pub fn log_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    if a > T::lit(20.0) {
        a - T::ln_2() + (-(a + a)).exp().ln_1p()
    } else {
        let s = (a * T::lit(0.5)).sinh();
        (T::lit(2.0) * s * s).ln_1p()
    }
}

/// Per-correspondence score `s(e)` for a correspondence-based kind.
pub fn score_correspondence<T: Real>(spec: &MetricSpec<T>, e: T) -> Result<T> {
    spec.require_correspondence_kind()?;
    Ok(score_unchecked(spec, e))
}

#[inline]
fn score_unchecked<T: Real>(spec: &MetricSpec<T>, e: T) -> T {
    let t = spec.t;
    let m = spec.m;
    let inlier = e < t;
    match spec.kind {
        MetricKind::InlierCount => {
            if inlier {
                T::one()
            } else {
                T::zero()
            }
        }
        MetricKind::Mae => {
            if inlier {
                (e - t).abs() / t
            } else {
                T::zero()
            }
        }
        MetricKind::Mse => {
            if inlier {
                let r = (e - t).abs() / t;
                r * r
            } else {
                T::zero()
            }
        }
        MetricKind::LogCosh => {
            if inlier {
                let e_hat = e / spec.pr;
                let t_hat = t / spec.pr;
                log_cosh(e_hat - t_hat) / log_cosh(t_hat)
            } else {
                T::zero()
            }
        }
        MetricKind::Exp => {
            if inlier {
                (-(e * e) / (T::lit(2.0) * t * t)).exp()
            } else {
                T::zero()
            }
        }
        MetricKind::Quantile => {
            if inlier {
                m * ((e - t).abs() / t)
            } else {
                (T::one() - m) * ((e - t).abs() / e)
            }
        }
        MetricKind::NegQuantile => {
            if inlier {
                m * ((e - t).abs() / t)
            } else {
                (m - T::one()) * ((e - t).abs() / e)
            }
        }
        MetricKind::Huber => {
            if inlier {
                -(e * e) * T::lit(0.5)
            } else {
                -t * (e - t * T::lit(0.5))
            }
        }
        MetricKind::PcDist | MetricKind::OverlapCount => unreachable!("whole-cloud kind"),
    }
}

/// `S(T) = Σ_j s(e(c_j))`; an empty set scores 0.
pub fn evaluate_hypothesis<T: Real>(
    spec: &MetricSpec<T>,
    transform: &RigidTransform<T>,
    corrs: &CorrespondenceSet<T>,
) -> Result<HypothesisScore<T>> {
    spec.require_correspondence_kind()?;
    let mut value = T::zero();
    for c in corrs.iter() {
        value += score_unchecked(spec, transformation_error(c, transform));
    }
    Ok(HypothesisScore { value, kind: spec.kind })
}

/// Scores `transform` by comparing the transformed source cloud with the
/// target cloud behind `target_index`.
///
/// `pc-dist` is the negated mean nearest-neighbor distance; `overlap-count`
/// counts source points closer than `t_overlap` to the target.
pub fn evaluate_hypothesis_cloud<T: Real>(
    spec: &MetricSpec<T>,
    transform: &RigidTransform<T>,
    source: &PointCloud<T>,
    target_index: &NeighborIndex<T>,
) -> Result<HypothesisScore<T>> {
    if source.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let nearest = |p: &Point3<T>| target_index.nearest(&transform.apply(p)).distance;
    let value = match spec.kind {
        MetricKind::PcDist => {
            let mut sum = T::zero();
            for p in source.points() {
                sum += nearest(p);
            }
            -(sum / T::lit(source.len() as f64))
        }
        MetricKind::OverlapCount => {
            let count = source.points().iter().filter(|p| nearest(p) < spec.t_overlap).count();
            T::lit(count as f64)
        }
        kind => return Err(Error::InvalidSpec(format!("{kind} is a correspondence metric"))),
    };
    Ok(HypothesisScore { value, kind: spec.kind })
}

/// Inputs a hypothesis may be scored against.
#[derive(Debug, Clone, Copy)]
pub struct EvalInputs<'a, T: Real> {
    pub corrs: &'a CorrespondenceSet<T>,
    pub source: Option<&'a PointCloud<T>>,
    pub target_index: Option<&'a NeighborIndex<T>>,
}

impl<'a, T: Real> EvalInputs<'a, T> {
    pub fn correspondences(corrs: &'a CorrespondenceSet<T>) -> Self {
        Self { corrs, source: None, target_index: None }
    }

    /// Dispatches to the correspondence or whole-cloud evaluator.
    pub fn score(&self, spec: &MetricSpec<T>, transform: &RigidTransform<T>) -> Result<HypothesisScore<T>> {
        if spec.kind.is_correspondence_based() {
            evaluate_hypothesis(spec, transform, self.corrs)
        } else {
            match (self.source, self.target_index) {
                (Some(source), Some(index)) => evaluate_hypothesis_cloud(spec, transform, source, index),
                _ => Err(Error::MissingClouds(spec.kind.name())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn spec(kind: MetricKind) -> MetricSpec<f64> {
        MetricSpec::new(kind, 7.5, 0.9, 2.0, 1.0).unwrap()
    }

    fn s(kind: MetricKind, e: f64) -> f64 {
        score_correspondence(&spec(kind), e).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in MetricKind::ALL {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
        assert!("nope".parse::<MetricKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(MetricSpec::new(MetricKind::Mae, 0.0, 0.9, 1.0, 1.0).is_err());
        assert!(MetricSpec::new(MetricKind::Mae, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(MetricSpec::new(MetricKind::Mae, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(MetricSpec::new(MetricKind::Mae, 1.0, 0.5, -1.0, 1.0).is_err());
        assert!(MetricSpec::new(MetricKind::Mae, 1.0, 0.5, 1.0, 0.0).is_err());
        let d = MetricSpec::with_defaults(MetricKind::Mae, 2.0).unwrap();
        assert_eq!((d.t(), d.m(), d.t_overlap()), (15.0, 0.9, 4.0));
    }

    #[test]
    fn transformation_error_examples() {
        let id = RigidTransform::identity();
        let c = Correspondence::new(Point3::origin(), Point3::origin());
        assert_eq!(transformation_error(&c, &id), 0.0);
        let c = Correspondence::new(Point3::new(1.0, 0.0, 0.0), Point3::origin());
        assert_eq!(transformation_error(&c, &id), 1.0);
        let rz = RigidTransform::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2, Vector3::zeros());
        let c = Correspondence::new(Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(transformation_error(&c, &rz), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn huber_is_continuous_at_threshold() {
        let below = s(MetricKind::Huber, 7.5 - 1e-12);
        assert_abs_diff_eq!(below, s(MetricKind::Huber, 7.5), epsilon = 1e-9);
        assert_eq!(s(MetricKind::Huber, 10.0), -7.5 * (10.0 - 3.75));
    }

    #[test]
    fn whole_cloud_kinds_rejected() {
        assert!(score_correspondence(&spec(MetricKind::PcDist), 1.0).is_err());
        let corrs = CorrespondenceSet::default();
        assert!(evaluate_hypothesis(&spec(MetricKind::OverlapCount), &RigidTransform::identity(), &corrs).is_err());
        let inputs = EvalInputs::correspondences(&corrs);
        assert!(matches!(
            inputs.score(&spec(MetricKind::PcDist), &RigidTransform::identity()),
            Err(Error::MissingClouds(_))
        ));
    }

    #[test]
    fn cloud_metric_rejects_correspondence_kind() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]).unwrap();
        let index = NeighborIndex::build(&cloud).unwrap();
        let r = evaluate_hypothesis_cloud(&spec(MetricKind::Mae), &RigidTransform::identity(), &cloud, &index);
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn log_cosh_branches_agree() {
        for x in [0.0, 1e-9, 0.3, 5.0, 19.999, 20.001, 300.0, 1000.0] {
            let direct = if x < 300.0 { f64::cosh(x).ln() } else { x - std::f64::consts::LN_2 };
            assert_abs_diff_eq!(log_cosh(x), direct, epsilon = 1e-12 * (1.0 + direct));
            assert_eq!(log_cosh(-x), log_cosh(x));
        }
        assert!(log_cosh(1e-9) > 0.0);
    }
}
