//! Seeded synthetic scenes, correspondences and nuisances.
//!
//! Every generator is a pure function of its inputs and seed.

use nalgebra::Vector3;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform};
use crate::metrics::{Correspondence, CorrespondenceSet};
use crate::ransac::{seeded_rng, SeededRng};
use crate::scalar::Real;
use crate::spatial::NeighborIndex;

/// Synthetic outliers land farther than this many pr from their true match.
pub const OUTLIER_REJECT_PR: f64 = 15.0;
pub const DEFAULT_HOLE_FRACTION: f64 = 0.01;
pub const DEFAULT_SCENE_POINTS: usize = 10_000;
pub const DEFAULT_BLOB_DIAMETER: f64 = 100.0;

const OUTLIER_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone)]
pub enum Shape<T: Real> {
    /// Uniform samples in a ball of the given diameter.
    RandomBlob { diameter: T },
    /// Axis-aligned grid, filled in x-major order.
    Lattice { spacing: T },
    /// A user-supplied cloud, used as the target verbatim.
    File(PointCloud<T>),
}

#[derive(Debug, Clone)]
pub struct SceneConfig<T: Real> {
    pub n_points: usize,
    pub shape: Shape<T>,
    pub gt_rotation_angle: T,
    pub gt_translation_magnitude: T,
    pub seed: u64,
}

impl<T: Real> SceneConfig<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            n_points: DEFAULT_SCENE_POINTS,
            shape: Shape::RandomBlob { diameter: T::lit(DEFAULT_BLOB_DIAMETER) },
            gt_rotation_angle: T::lit(std::f64::consts::FRAC_PI_4),
            gt_translation_magnitude: T::lit(DEFAULT_BLOB_DIAMETER * 0.5),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CorrespondenceConfig<T: Real> {
    pub n_correspondences: usize,
    pub inlier_ratio: T,
    /// Standard deviation of the per-coordinate inlier perturbation, in pr.
    pub inlier_sigma_pr: T,
    pub seed: u64,
}

impl<T: Real> CorrespondenceConfig<T> {
    pub fn inlier_count(&self) -> usize {
        (T::lit(self.n_correspondences as f64) * self.inlier_ratio).round().as_f64() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.inlier_ratio > T::zero() && self.inlier_ratio <= T::one()) {
            return Err(Error::BadConfig("inlier_ratio must lie in (0, 1]".into()));
        }
        if !(self.inlier_sigma_pr >= T::zero()) {
            return Err(Error::BadConfig("inlier_sigma_pr must be non-negative".into()));
        }
        if self.inlier_count() < 3 {
            return Err(Error::BadConfig("fewer than 3 inliers requested".into()));
        }
        Ok(())
    }
}

/// A source/target pair with known ground truth.
///
/// `target.points()[i]` is the (possibly degraded) observation of
/// `gt_pairs[i]`, whose members are exact twins under `gt`. `pr` is the
/// resolution of the clean target and stays fixed across degradations.
#[derive(Debug, Clone)]
pub struct ScenePair<T: Real> {
    pub source: PointCloud<T>,
    pub target: PointCloud<T>,
    pub gt: RigidTransform<T>,
    pub gt_pairs: Vec<(Point3<T>, Point3<T>)>,
    pub pr: T,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorrespondences<T: Real> {
    pub set: CorrespondenceSet<T>,
    pub inlier_mask: Vec<bool>,
}

impl<T: Real> SyntheticCorrespondences<T> {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|m| **m).count()
    }
}

fn gaussian<T: Real, R: Rng>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn unit_vector<T: Real, R: Rng>(rng: &mut R) -> Vector3<T> {
    loop {
        let v = Vector3::new(gaussian::<T, _>(rng), gaussian(rng), gaussian(rng));
        let n = v.norm();
        if n > T::lit(1e-6) {
            return v / n;
        }
    }
}

fn uniform<T: Real, R: Rng>(rng: &mut R, lo: T, hi: T) -> T {
    lo + (hi - lo) * T::lit(rng.random::<f64>())
}

fn blob<T: Real>(n: usize, diameter: T, rng: &mut SeededRng) -> Vec<Point3<T>> {
    let radius = diameter * T::lit(0.5);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = Vector3::new(
            uniform(rng, -T::one(), T::one()),
            uniform(rng, -T::one(), T::one()),
            uniform(rng, -T::one(), T::one()),
        );
        if v.norm_squared() <= T::one() {
            out.push(Point3::from(v * radius));
        }
    }
    out
}

/// The first `n` nodes of the smallest cube grid holding at least `n` nodes.
pub fn lattice<T: Real>(n: usize, spacing: T) -> Vec<Point3<T>> {
    let mut side = 1usize;
    while side * side * side < n {
        side += 1;
    }
    let mut out = Vec::with_capacity(n);
    'fill: for i in 0..side {
        for j in 0..side {
            for k in 0..side {
                if out.len() == n {
                    break 'fill;
                }
                out.push(Point3::new(
                    spacing * T::lit(i as f64),
                    spacing * T::lit(j as f64),
                    spacing * T::lit(k as f64),
                ));
            }
        }
    }
    out
}

/// Builds the target by `cfg.shape`, draws a ground-truth pose and derives
/// the source as the inverse pose applied to the target.
pub fn generate_scene<T: Real>(cfg: &SceneConfig<T>) -> Result<ScenePair<T>> {
    let mut rng = seeded_rng(cfg.seed);
    let target_points = match &cfg.shape {
        Shape::RandomBlob { diameter } => {
            if cfg.n_points < 10 || !(*diameter > T::zero()) {
                return Err(Error::BadConfig("blob needs n_points >= 10 and a positive diameter".into()));
            }
            blob(cfg.n_points, *diameter, &mut rng)
        }
        Shape::Lattice { spacing } => {
            if cfg.n_points < 10 || !(*spacing > T::zero()) {
                return Err(Error::BadConfig("lattice needs n_points >= 10 and a positive spacing".into()));
            }
            lattice(cfg.n_points, *spacing)
        }
        Shape::File(cloud) => {
            if cloud.len() < 2 {
                return Err(Error::BadConfig("file cloud needs at least 2 points".into()));
            }
            cloud.points().to_vec()
        }
    };
    if !cfg.gt_rotation_angle.is_finite() || !(cfg.gt_translation_magnitude >= T::zero()) {
        return Err(Error::BadConfig("ground-truth pose parameters must be finite".into()));
    }
    let axis = unit_vector::<T, _>(&mut rng);
    let direction = unit_vector::<T, _>(&mut rng);
    let gt = RigidTransform::from_axis_angle(&axis, cfg.gt_rotation_angle, direction * cfg.gt_translation_magnitude);

    let target = PointCloud::new(target_points)?;
    let pr = target.resolution()?;
    let source = target.transformed(&gt.inverse());
    let gt_pairs = source.points().iter().copied().zip(target.points().iter().copied()).collect();
    Ok(ScenePair { source, target, gt, gt_pairs, pr })
}

/// Draws `round(n·inlier_ratio)` inliers from the ground-truth twins (target
/// side perturbed by N(0, (σ·pr)²) per coordinate) and fills the rest with
/// outliers whose target lies more than 15 pr from the true match.
///
/// The returned order is shuffled; `inlier_mask[i]` labels item `i`.
pub fn generate_correspondences<T: Real>(
    scene: &ScenePair<T>,
    cfg: &CorrespondenceConfig<T>,
) -> Result<SyntheticCorrespondences<T>> {
    cfg.validate()?;
    let n_pairs = scene.gt_pairs.len();
    if n_pairs == 0 || scene.target.len() != n_pairs {
        return Err(Error::BadConfig("scene has no aligned ground-truth pairs".into()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let n = cfg.n_correspondences;
    let k = cfg.inlier_count().min(n);
    let sigma = cfg.inlier_sigma_pr * scene.pr;

    let inlier_ids: Vec<usize> = if k <= n_pairs {
        index::sample(&mut rng, n_pairs, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n_pairs)).collect()
    };
    let mut items = Vec::with_capacity(n);
    for &i in &inlier_ids {
        let observed = scene.target.points()[i];
        let target = if sigma > T::zero() {
            observed + Vector3::new(gaussian::<T, _>(&mut rng), gaussian(&mut rng), gaussian(&mut rng)) * sigma
        } else {
            observed
        };
        items.push((Correspondence::new(scene.gt_pairs[i].0, target), true));
    }

    let reject = T::lit(OUTLIER_REJECT_PR) * scene.pr;
    let (lo, hi) = scene.target.bounding_box().ok_or(Error::EmptyCloud)?;
    let margin = Vector3::repeat(reject);
    let (lo, hi) = (lo - margin, hi + margin);
    for _ in k..n {
        let j = rng.random_range(0..n_pairs);
        let (src, twin) = scene.gt_pairs[j];
        let mut placed = None;
        for _ in 0..OUTLIER_MAX_ATTEMPTS {
            let cand = Point3::new(
                uniform(&mut rng, lo.x, hi.x),
                uniform(&mut rng, lo.y, hi.y),
                uniform(&mut rng, lo.z, hi.z),
            );
            if (cand - twin).norm() > reject {
                placed = Some(cand);
                break;
            }
        }
        let target = placed.ok_or_else(|| Error::BadConfig("could not place an outlier".into()))?;
        items.push((Correspondence::new(src, target), false));
    }
    items.shuffle(&mut rng);
    let (set, inlier_mask): (Vec<_>, Vec<_>) = items.into_iter().unzip();
    Ok(SyntheticCorrespondences { set: CorrespondenceSet::new(set)?, inlier_mask })
}

fn perturbed<T: Real>(points: &[Point3<T>], sigma: T, rng: &mut SeededRng) -> Vec<Point3<T>> {
    points.iter().map(|p| p + Vector3::new(gaussian::<T, _>(rng), gaussian(rng), gaussian(rng)) * sigma).collect()
}

/// Adds N(0, (sigma_pr·pr)²) to each coordinate, `pr` being the input
/// cloud's resolution. The output's own resolution is recomputed on demand.
pub fn add_gaussian_noise<T: Real>(cloud: &PointCloud<T>, sigma_pr: T, seed: u64) -> Result<PointCloud<T>> {
    if !(sigma_pr >= T::zero()) {
        return Err(Error::BadConfig("sigma_pr must be non-negative".into()));
    }
    if sigma_pr == T::zero() {
        return Ok(cloud.clone());
    }
    let sigma = sigma_pr * cloud.resolution()?;
    PointCloud::new(perturbed(cloud.points(), sigma, &mut seeded_rng(seed)))
}

fn check_fraction<T: Real>(keep: T) -> Result<()> {
    if keep > T::zero() && keep <= T::one() {
        Ok(())
    } else {
        Err(Error::BadConfig("keep_fraction must lie in (0, 1]".into()))
    }
}

/// Indices kept by [`decimate_uniform`]: every `round(1/keep)`-th index.
pub fn decimate_uniform_indices<T: Real>(n: usize, keep_fraction: T) -> Result<Vec<usize>> {
    check_fraction(keep_fraction)?;
    let step = (T::one() / keep_fraction).round().as_f64().max(1.0) as usize;
    Ok((0..n).step_by(step).collect())
}

pub fn decimate_uniform<T: Real>(cloud: &PointCloud<T>, keep_fraction: T) -> Result<PointCloud<T>> {
    let ids = decimate_uniform_indices(cloud.len(), keep_fraction)?;
    Ok(select(cloud, &ids))
}

/// Indices kept by [`decimate_random`], ascending.
pub fn decimate_random_indices<T: Real>(n: usize, keep_fraction: T, seed: u64) -> Result<Vec<usize>> {
    check_fraction(keep_fraction)?;
    let m = (T::lit(n as f64) * keep_fraction).round().as_f64() as usize;
    let mut ids = index::sample(&mut seeded_rng(seed), n, m.min(n)).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

pub fn decimate_random<T: Real>(cloud: &PointCloud<T>, keep_fraction: T, seed: u64) -> Result<PointCloud<T>> {
    let ids = decimate_random_indices(cloud.len(), keep_fraction, seed)?;
    Ok(select(cloud, &ids))
}

/// One carved hole: the seed point and everything removed with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    pub seed: usize,
    pub removed: Vec<usize>,
}

/// Carves `n_holes` holes of `round(hole_fraction·n)` points each. Each hole
/// picks a random surviving point and removes its nearest surviving
/// neighbors, itself included. Returns the surviving indices (ascending)
/// and the carved holes in order.
pub fn punch_holes_indices<T: Real>(
    cloud: &PointCloud<T>,
    n_holes: usize,
    hole_fraction: T,
    seed: u64,
) -> Result<(Vec<usize>, Vec<Hole>)> {
    if !(hole_fraction > T::zero() && hole_fraction < T::one()) || !(T::lit(n_holes as f64) * hole_fraction < T::one())
    {
        return Err(Error::BadConfig("need 0 < hole_fraction and n_holes * hole_fraction < 1".into()));
    }
    let mut alive: Vec<usize> = (0..cloud.len()).collect();
    let k = (T::lit(cloud.len() as f64) * hole_fraction).round().as_f64() as usize;
    let mut holes = Vec::with_capacity(n_holes);
    if k == 0 {
        return Ok((alive, holes));
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..n_holes {
        if alive.len() < k {
            return Err(Error::BadConfig("not enough surviving points for another hole".into()));
        }
        let seed_idx = alive[rng.random_range(0..alive.len())];
        let index = NeighborIndex::from_points(alive.iter().map(|&i| cloud.points()[i]).collect())?;
        let hits = index.knn(&cloud.points()[seed_idx], k)?;
        let mut removed: Vec<usize> = hits.iter().map(|h| alive[h.index]).collect();
        let mut gone: Vec<usize> = hits.iter().map(|h| h.index).collect();
        gone.sort_unstable();
        for pos in gone.into_iter().rev() {
            alive.remove(pos);
        }
        removed.sort_unstable();
        holes.push(Hole { seed: seed_idx, removed });
    }
    Ok((alive, holes))
}

pub fn punch_holes<T: Real>(
    cloud: &PointCloud<T>,
    n_holes: usize,
    hole_fraction: T,
    seed: u64,
) -> Result<PointCloud<T>> {
    let (ids, _) = punch_holes_indices(cloud, n_holes, hole_fraction, seed)?;
    Ok(select(cloud, &ids))
}

fn select<T: Real>(cloud: &PointCloud<T>, ids: &[usize]) -> PointCloud<T> {
    PointCloud::from_finite(ids.iter().map(|&i| cloud.points()[i]).collect())
}

/// A data-degradation applied to the target side of a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nuisance<T> {
    None,
    /// Gaussian noise, standard deviation in pr.
    Noise {
        sigma_pr: T,
    },
    DecimateUniform {
        keep_fraction: T,
    },
    DecimateRandom {
        keep_fraction: T,
    },
    Holes {
        count: usize,
        hole_fraction: T,
    },
}

impl<T: Real> ScenePair<T> {
    /// Copy of the scene with `nuisance` applied to the target. Surviving
    /// ground-truth pairs stay aligned with the target points; the source
    /// cloud, pose and `pr` are unchanged.
    pub fn degrade(&self, nuisance: Nuisance<T>, seed: u64) -> Result<Self> {
        let keep = |ids: Vec<usize>| -> Self {
            Self {
                source: self.source.clone(),
                target: select(&self.target, &ids),
                gt: self.gt,
                gt_pairs: ids.iter().map(|&i| self.gt_pairs[i]).collect(),
                pr: self.pr,
            }
        };
        Ok(match nuisance {
            Nuisance::None => self.clone(),
            Nuisance::Noise { sigma_pr } => {
                if !(sigma_pr >= T::zero()) {
                    return Err(Error::BadConfig("sigma_pr must be non-negative".into()));
                }
                let points = perturbed(self.target.points(), sigma_pr * self.pr, &mut seeded_rng(seed));
                Self { target: PointCloud::new(points)?, ..self.clone() }
            }
            Nuisance::DecimateUniform { keep_fraction } => {
                keep(decimate_uniform_indices(self.target.len(), keep_fraction)?)
            }
            Nuisance::DecimateRandom { keep_fraction } => {
                keep(decimate_random_indices(self.target.len(), keep_fraction, seed)?)
            }
            Nuisance::Holes { count, hole_fraction } => {
                keep(punch_holes_indices(&self.target, count, hole_fraction, seed)?.0)
            }
        })
    }
}
