//! Fixed-budget RANSAC over 3-point minimal samples.
//!
//! Hypotheses are generated sequentially from a seeded ChaCha8 stream so
//! the sample sequence depends only on `(seed, n)`. Evaluation may fan out
//! across rayon workers; the reduction keeps the highest score and, among
//! equal scores, the earliest iteration.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{estimate_rigid_transform, is_degenerate_triangle, PointCloud, RigidTransform};
use crate::metrics::{CorrespondenceSet, EvalInputs, HypothesisScore, MetricSpec};
use crate::scalar::Real;
use crate::spatial::NeighborIndex;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_DEGENERACY_RETRIES: usize = 100;
pub const MINIMAL_SAMPLE_SIZE: usize = 3;

/// The generator behind every seeded draw in this crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct RansacConfig<T: Real> {
    pub iterations: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub metric: MetricSpec<T>,
    pub degeneracy_retries: usize,
    /// Evaluate hypotheses on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl<T: Real> RansacConfig<T> {
    pub fn new(metric: MetricSpec<T>, seed: u64) -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            sample_size: MINIMAL_SAMPLE_SIZE,
            seed,
            metric,
            degeneracy_retries: DEFAULT_DEGENERACY_RETRIES,
            parallel: false,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::BadConfig("iterations must be at least 1".into()));
        }
        if self.sample_size != MINIMAL_SAMPLE_SIZE {
            return Err(Error::BadConfig(format!("only {MINIMAL_SAMPLE_SIZE}-point samples are supported")));
        }
        if self.degeneracy_retries == 0 {
            return Err(Error::BadConfig("degeneracy_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// One generated hypothesis and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisRecord<T: Real> {
    pub iteration: usize,
    pub sample: [usize; 3],
    pub transform: RigidTransform<T>,
    pub score: T,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult<T: Real> {
    pub best_transform: RigidTransform<T>,
    pub best_score: HypothesisScore<T>,
    pub best_iteration: usize,
    pub hypotheses_evaluated: usize,
    pub elapsed_eval_time: Duration,
    pub elapsed_total_time: Duration,
    pub trace: Vec<HypothesisRecord<T>>,
}

impl<T: Real> RegistrationResult<T> {
    /// Equality of everything except the timing fields.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.best_transform == other.best_transform
            && self.best_score == other.best_score
            && self.best_iteration == other.best_iteration
            && self.hypotheses_evaluated == other.hypotheses_evaluated
            && self.trace == other.trace
    }
}

fn draw_triple<R: Rng>(n: usize, rng: &mut R) -> [usize; 3] {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut c = rng.random_range(0..n - 2);
    if c >= lo {
        c += 1;
    }
    if c >= hi {
        c += 1;
    }
    [a, b, c]
}

fn triple_is_degenerate<T: Real>(corrs: &CorrespondenceSet<T>, idx: &[usize; 3], pr: T) -> bool {
    let items = corrs.items();
    is_degenerate_triangle(&items[idx[0]].source, &items[idx[1]].source, &items[idx[2]].source, pr)
}

/// Draws three distinct indices uniformly, redrawing up to `retries` times
/// while the source triangle is degenerate at resolution `pr`.
pub fn sample_minimal<T: Real, R: Rng>(
    corrs: &CorrespondenceSet<T>,
    rng: &mut R,
    pr: T,
    retries: usize,
) -> Result<[usize; 3]> {
    let n = corrs.len();
    if n < MINIMAL_SAMPLE_SIZE {
        return Err(Error::TooFewCorrespondences(n));
    }
    for _ in 0..=retries {
        let idx = draw_triple(n, rng);
        if !triple_is_degenerate(corrs, &idx, pr) {
            return Ok(idx);
        }
    }
    Err(Error::PersistentDegeneracy(retries))
}

fn generate_hypothesis<T: Real, R: Rng>(
    corrs: &CorrespondenceSet<T>,
    rng: &mut R,
    config: &RansacConfig<T>,
) -> Result<([usize; 3], RigidTransform<T>)> {
    let pr = config.metric.pr();
    for _ in 0..=config.degeneracy_retries {
        let idx = sample_minimal(corrs, rng, pr, config.degeneracy_retries)?;
        let pairs = idx.map(|i| {
            let c = corrs.items()[i];
            (c.source, c.target)
        });
        match estimate_rigid_transform(&pairs) {
            Ok(t) => return Ok((idx, t)),
            Err(Error::DegenerateSample) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PersistentDegeneracy(config.degeneracy_retries))
}

/// The `config.iterations` minimal-sample hypotheses `run_ransac` would
/// evaluate, in iteration order.
pub fn generate_hypotheses<T: Real>(
    corrs: &CorrespondenceSet<T>,
    config: &RansacConfig<T>,
) -> Result<Vec<([usize; 3], RigidTransform<T>)>> {
    let mut rng = seeded_rng(config.seed);
    (0..config.iterations).map(|_| generate_hypothesis(corrs, &mut rng, config)).collect()
}

/// Index of the best score: maximum value, earliest position on ties.
pub fn select_best<T: Real>(scores: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if !(*s > scores[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Runs `config.iterations` rounds of sample → solve → score and returns
/// the highest-scoring hypothesis. Whole-cloud metrics need `source` and
/// `target_index`.
pub fn run_ransac<T: Real>(
    config: &RansacConfig<T>,
    corrs: &CorrespondenceSet<T>,
    source: Option<&PointCloud<T>>,
    target_index: Option<&NeighborIndex<T>>,
) -> Result<RegistrationResult<T>> {
    let started = Instant::now();
    config.validate()?;
    if corrs.len() < MINIMAL_SAMPLE_SIZE {
        return Err(Error::TooFewCorrespondences(corrs.len()));
    }
    let kind = config.metric.kind();
    if !kind.is_correspondence_based() && (source.is_none() || target_index.is_none()) {
        return Err(Error::MissingClouds(kind.name()));
    }
    let inputs = EvalInputs { corrs, source, target_index };

    let hypotheses = generate_hypotheses(corrs, config)?;

    let eval_started = Instant::now();
    let score = |(_, t): &([usize; 3], RigidTransform<T>)| inputs.score(&config.metric, t).map(|s| s.value);
    let scores = if config.parallel {
        hypotheses.par_iter().map(score).collect::<Result<Vec<_>>>()?
    } else {
        hypotheses.iter().map(score).collect::<Result<Vec<_>>>()?
    };
    let elapsed_eval_time = eval_started.elapsed();

    let best = select_best(&scores).expect("at least one iteration");
    let trace: Vec<_> = hypotheses
        .iter()
        .zip(&scores)
        .enumerate()
        .map(|(iteration, ((sample, transform), score))| HypothesisRecord {
            iteration,
            sample: *sample,
            transform: *transform,
            score: *score,
        })
        .collect();

    Ok(RegistrationResult {
        best_transform: hypotheses[best].1,
        best_score: HypothesisScore { value: scores[best], kind },
        best_iteration: best,
        hypotheses_evaluated: scores.len(),
        elapsed_eval_time,
        elapsed_total_time: started.elapsed(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::metrics::{Correspondence, MetricKind};

    fn corrs(points: &[[f64; 3]]) -> CorrespondenceSet<f64> {
        points
            .iter()
            .map(|p| {
                let q = Point3::new(p[0], p[1], p[2]);
                Correspondence::new(q, q)
            })
            .collect()
    }

    #[test]
    fn triple_is_distinct_and_uniform_ish() {
        let mut rng = seeded_rng(3);
        let mut hits = [0usize; 5];
        for _ in 0..5000 {
            let t = draw_triple(5, &mut rng);
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
            for i in t {
                hits[i] += 1;
            }
        }
        for h in hits {
            assert!((2700..3300).contains(&h), "{hits:?}");
        }
    }

    #[test]
    fn three_points_give_the_only_triple() {
        let c = corrs(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let mut idx = sample_minimal(&c, &mut seeded_rng(1), 1.0, 100).unwrap();
        idx.sort();
        assert_eq!(idx, [0, 1, 2]);
    }

    #[test]
    fn collinear_sources_are_persistently_degenerate() {
        let c = corrs(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(matches!(sample_minimal(&c, &mut seeded_rng(1), 1.0, 100), Err(Error::PersistentDegeneracy(100))));
    }

    #[test]
    fn too_few_correspondences() {
        let c = corrs(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(matches!(sample_minimal(&c, &mut seeded_rng(1), 1.0, 5), Err(Error::TooFewCorrespondences(2))));
        let spec = MetricSpec::with_defaults(MetricKind::Mae, 1.0).unwrap();
        assert!(run_ransac(&RansacConfig::new(spec, 0), &c, None, None).is_err());
    }

    #[test]
    fn sample_sequence_is_reproducible() {
        let c = corrs(&(0..50).map(|i| [i as f64, (i * i % 7) as f64, (i % 3) as f64]).collect::<Vec<_>>());
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            (0..100).map(|_| sample_minimal(&c, &mut rng, 1.0, 100).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn select_best_prefers_earliest_tie() {
        assert_eq!(select_best(&[1.0, 3.0, 2.0, 3.0]), Some(1));
        assert_eq!(select_best::<f64>(&[]), None);
        assert_eq!(select_best(&[-5.0]), Some(0));
    }

    #[test]
    fn whole_cloud_metric_needs_clouds() {
        let c = corrs(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let spec = MetricSpec::with_defaults(MetricKind::PcDist, 1.0).unwrap();
        assert!(matches!(run_ransac(&RansacConfig::new(spec, 0), &c, None, None), Err(Error::MissingClouds(_))));
    }

    #[test]
    fn config_validation() {
        let c = corrs(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let spec = MetricSpec::with_defaults(MetricKind::Mae, 1.0).unwrap();
        let mut cfg = RansacConfig::new(spec, 0).with_iterations(0);
        assert!(run_ransac(&cfg, &c, None, None).is_err());
        cfg.iterations = 1;
        cfg.sample_size = 2;
        assert!(run_ransac(&cfg, &c, None, None).is_err());
    }
}
