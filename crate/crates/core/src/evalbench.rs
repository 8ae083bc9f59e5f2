//! Registration correctness, accuracy statistics and the sweep runner.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform};
use crate::metrics::{EvalInputs, MetricKind, MetricSpec, DEFAULT_M, DEFAULT_T_OVERLAP_PR, DEFAULT_T_PR};
use crate::ransac::{run_ransac, RansacConfig, DEFAULT_ITERATIONS};
use crate::scalar::Real;
use crate::spatial::NeighborIndex;
use crate::synth::{
    generate_correspondences, generate_scene, CorrespondenceConfig, Nuisance, SceneConfig, DEFAULT_HOLE_FRACTION,
};

pub const DEFAULT_D_RMSE_PR: f64 = 2.5;
pub const DEFAULT_TRIALS: usize = 100;

/// Mean per-pair error `‖R·p_s + t − p_t‖` of `est` over ground-truth pairs.
///
/// Despite the conventional name this is a plain mean of Euclidean errors;
/// nothing is squared or rooted across pairs.
pub fn rmse<T: Real>(est: &RigidTransform<T>, gt_pairs: &[(Point3<T>, Point3<T>)]) -> Result<T> {
    if gt_pairs.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut sum = T::zero();
    for (s, t) in gt_pairs {
        sum += (est.apply(s) - t).norm();
    }
    Ok(sum / T::lit(gt_pairs.len() as f64))
}

/// A registration is correct iff its error is strictly below `d_rmse_pr · pr`.
pub fn is_correct<T: Real>(rmse_value: T, d_rmse_pr: T, pr: T) -> bool {
    rmse_value < d_rmse_pr * pr
}

/// Metric parameters expressed in pr, instantiated per scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTemplate<T> {
    pub kind: MetricKind,
    pub t_pr: T,
    pub m: T,
    pub t_overlap_pr: T,
}

impl<T: Real> MetricTemplate<T> {
    pub fn new(kind: MetricKind) -> Self {
        Self { kind, t_pr: T::lit(DEFAULT_T_PR), m: T::lit(DEFAULT_M), t_overlap_pr: T::lit(DEFAULT_T_OVERLAP_PR) }
    }

    pub fn instantiate(&self, pr: T) -> Result<MetricSpec<T>> {
        MetricSpec::in_pr_units(self.kind, pr, self.t_pr, self.m, self.t_overlap_pr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    T,
    Iterations,
    DRmse,
    InlierRatio,
    Noise,
    DecimationUniform,
    DecimationRandom,
    Holes,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 8] = [
        SweepAxis::T,
        SweepAxis::Iterations,
        SweepAxis::DRmse,
        SweepAxis::InlierRatio,
        SweepAxis::Noise,
        SweepAxis::DecimationUniform,
        SweepAxis::DecimationRandom,
        SweepAxis::Holes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::T => "t",
            SweepAxis::Iterations => "iterations",
            SweepAxis::DRmse => "d_rmse",
            SweepAxis::InlierRatio => "inlier_ratio",
            SweepAxis::Noise => "noise",
            SweepAxis::DecimationUniform => "decimation-uniform",
            SweepAxis::DecimationRandom => "decimation-random",
            SweepAxis::Holes => "holes",
        }
    }

    fn nuisance<T: Real>(self, value: T, hole_fraction: T) -> Nuisance<T> {
        match self {
            SweepAxis::Noise => Nuisance::Noise { sigma_pr: value },
            SweepAxis::DecimationUniform => Nuisance::DecimateUniform { keep_fraction: value },
            SweepAxis::DecimationRandom => Nuisance::DecimateRandom { keep_fraction: value },
            SweepAxis::Holes => Nuisance::Holes { count: value.round().as_f64().max(0.0) as usize, hole_fraction },
            _ => Nuisance::None,
        }
    }

    /// Whether the sweep value changes the scene or correspondences.
    fn alters_inputs(self) -> bool {
        !matches!(self, SweepAxis::T | SweepAxis::Iterations | SweepAxis::DRmse)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig<T: Real> {
    pub d_rmse_pr: T,
    pub trials: usize,
    pub metrics: Vec<MetricTemplate<T>>,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<T>,
    pub seed: u64,
    pub iterations: usize,
    pub hole_fraction: T,
    /// Run trials on the rayon pool. Rows other than timing do not depend on it.
    pub parallel: bool,
}

impl<T: Real> EvalConfig<T> {
    pub fn new(metrics: Vec<MetricTemplate<T>>, sweep_axis: SweepAxis, sweep_values: Vec<T>, seed: u64) -> Self {
        Self {
            d_rmse_pr: T::lit(DEFAULT_D_RMSE_PR),
            trials: DEFAULT_TRIALS,
            metrics,
            sweep_axis,
            sweep_values,
            seed,
            iterations: DEFAULT_ITERATIONS,
            hole_fraction: T::lit(DEFAULT_HOLE_FRACTION),
            parallel: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::BadConfig("trials must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::BadConfig("sweep values must not be empty".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::BadConfig("at least one metric is required".into()));
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("sweep values must be finite".into()));
        }
        Ok(())
    }

    /// Sweep values in ascending order.
    pub fn sorted_values(&self) -> Vec<T> {
        let mut v = self.sweep_values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v
    }
}

/// One aggregated line of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub metric: MetricKind,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub trials: usize,
    pub accuracy: f64,
    /// Mean error of the correct runs in pr; NaN when none was correct.
    pub mean_rmse_pr: f64,
    pub mean_eval_time_s: f64,
    pub index_build_time_s: f64,
}

impl ExperimentRow {
    /// Equality ignoring the timing columns.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.metric == other.metric
            && self.sweep_axis == other.sweep_axis
            && self.sweep_value.to_bits() == other.sweep_value.to_bits()
            && self.trials == other.trials
            && self.accuracy.to_bits() == other.accuracy.to_bits()
            && self.mean_rmse_pr.to_bits() == other.mean_rmse_pr.to_bits()
    }
}

/// Outcome of a single RANSAC run inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub value_index: usize,
    pub metric_index: usize,
    pub rmse_pr: f64,
    pub correct: bool,
    pub eval_time: Duration,
    pub index_build_time: Duration,
}

/// SplitMix64 finalizer; derives independent sub-seeds from the base seed.
pub fn derive_seed(base: u64, trial: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_SCENE: u64 = 0;
const STREAM_CORRS: u64 = 1;
const STREAM_NUISANCE: u64 = 2;
const STREAM_RANSAC: u64 = 3;

struct RunOutcome {
    rmse_pr: f64,
    rmse: f64,
    eval_time: Duration,
    index_build_time: Duration,
}

fn run_trial<T: Real>(
    cfg: &EvalConfig<T>,
    values: &[T],
    scene_cfg: &SceneConfig<T>,
    corr_cfg: &CorrespondenceConfig<T>,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let t = trial as u64;
    let mut scene_cfg = scene_cfg.clone();
    scene_cfg.seed = derive_seed(cfg.seed, t, STREAM_SCENE);
    let scene = generate_scene(&scene_cfg)?;
    let pr = scene.pr;
    let mut corr_cfg = *corr_cfg;
    corr_cfg.seed = derive_seed(cfg.seed, t, STREAM_CORRS);
    let ransac_seed = derive_seed(cfg.seed, t, STREAM_RANSAC);

    let mut records = Vec::with_capacity(values.len() * cfg.metrics.len());
    // runs that do not depend on the sweep value are shared across values
    let mut shared: Option<Vec<RunOutcome>> = None;
    for (value_index, &value) in values.iter().enumerate() {
        let runs = if cfg.sweep_axis == SweepAxis::DRmse && shared.is_some() {
            shared.take().expect("checked")
        } else {
            let degraded;
            let inputs_scene = if cfg.sweep_axis.alters_inputs() {
                let nuisance = cfg.sweep_axis.nuisance(value, cfg.hole_fraction);
                degraded = scene.degrade(nuisance, derive_seed(cfg.seed, t, STREAM_NUISANCE))?;
                &degraded
            } else {
                &scene
            };
            let mut this_corr = corr_cfg;
            if cfg.sweep_axis == SweepAxis::InlierRatio {
                this_corr.inlier_ratio = value;
            }
            let corrs = generate_correspondences(inputs_scene, &this_corr)?;

            let needs_index = cfg.metrics.iter().any(|m| !m.kind.is_correspondence_based());
            let (index, index_time) = if needs_index {
                let started = Instant::now();
                let index = NeighborIndex::build(&inputs_scene.target)?;
                (Some(index), started.elapsed())
            } else {
                (None, Duration::ZERO)
            };

            let mut runs = Vec::with_capacity(cfg.metrics.len());
            for template in &cfg.metrics {
                let mut template = *template;
                if cfg.sweep_axis == SweepAxis::T {
                    template.t_pr = value;
                }
                let spec = template.instantiate(pr)?;
                let mut rc = RansacConfig::new(spec, ransac_seed);
                rc.iterations = if cfg.sweep_axis == SweepAxis::Iterations {
                    value.round().as_f64().max(1.0) as usize
                } else {
                    cfg.iterations
                };
                let result = run_ransac(&rc, &corrs.set, Some(&inputs_scene.source), index.as_ref())?;
                let err = rmse(&result.best_transform, &scene.gt_pairs)?;
                runs.push(RunOutcome {
                    rmse_pr: (err / pr).as_f64(),
                    rmse: err.as_f64(),
                    eval_time: result.elapsed_eval_time,
                    index_build_time: if template.kind.is_correspondence_based() { Duration::ZERO } else { index_time },
                });
            }
            runs
        };
        let d_rmse = if cfg.sweep_axis == SweepAxis::DRmse { value } else { cfg.d_rmse_pr };
        for (metric_index, run) in runs.iter().enumerate() {
            records.push(TrialRecord {
                trial,
                value_index,
                metric_index,
                rmse_pr: run.rmse_pr,
                correct: is_correct(T::lit(run.rmse), d_rmse, pr),
                eval_time: run.eval_time,
                index_build_time: run.index_build_time,
            });
        }
        if cfg.sweep_axis == SweepAxis::DRmse {
            shared = Some(runs);
        }
    }
    Ok(records)
}

/// Runs every (trial, sweep value, metric) combination and returns the
/// per-run records, ordered by trial, then value, then metric.
pub fn run_trials<T: Real>(
    cfg: &EvalConfig<T>,
    scene_cfg: &SceneConfig<T>,
    corr_cfg: &CorrespondenceConfig<T>,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let values = cfg.sorted_values();
    let per_trial: Vec<Result<Vec<TrialRecord>>> = if cfg.parallel {
        (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &values, scene_cfg, corr_cfg, t)).collect()
    } else {
        (0..cfg.trials).map(|t| run_trial(cfg, &values, scene_cfg, corr_cfg, t)).collect()
    };
    let mut out = Vec::with_capacity(cfg.trials * values.len() * cfg.metrics.len());
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

/// Folds run records into rows ordered by metric, then ascending sweep value.
pub fn aggregate<T: Real>(cfg: &EvalConfig<T>, records: &[TrialRecord]) -> Vec<ExperimentRow> {
    let values = cfg.sorted_values();
    let mut rows = Vec::with_capacity(cfg.metrics.len() * values.len());
    for (mi, template) in cfg.metrics.iter().enumerate() {
        for (vi, value) in values.iter().enumerate() {
            let runs: Vec<&TrialRecord> =
                records.iter().filter(|r| r.metric_index == mi && r.value_index == vi).collect();
            let n = runs.len().max(1) as f64;
            let correct: Vec<&&TrialRecord> = runs.iter().filter(|r| r.correct).collect();
            let mean_rmse_pr = if correct.is_empty() {
                f64::NAN
            } else {
                correct.iter().map(|r| r.rmse_pr).sum::<f64>() / correct.len() as f64
            };
            rows.push(ExperimentRow {
                metric: template.kind,
                sweep_axis: cfg.sweep_axis,
                sweep_value: value.as_f64(),
                trials: runs.len(),
                accuracy: correct.len() as f64 / n,
                mean_rmse_pr,
                mean_eval_time_s: runs.iter().map(|r| r.eval_time.as_secs_f64()).sum::<f64>() / n,
                index_build_time_s: runs.iter().map(|r| r.index_build_time.as_secs_f64()).sum::<f64>() / n,
            });
        }
    }
    rows
}

/// Generates seeded inputs for every sweep value × metric × trial, runs
/// RANSAC, judges correctness and aggregates into rows.
pub fn run_experiment<T: Real>(
    cfg: &EvalConfig<T>,
    scene_cfg: &SceneConfig<T>,
    corr_cfg: &CorrespondenceConfig<T>,
) -> Result<Vec<ExperimentRow>> {
    let records = run_trials(cfg, scene_cfg, corr_cfg)?;
    Ok(aggregate(cfg, &records))
}

/// Wall-clock seconds per hypothesis spent scoring `hypotheses` with `spec`,
/// single-threaded. Hypothesis generation and index construction are not
/// included.
pub fn time_metric_evaluation<T: Real>(
    spec: &MetricSpec<T>,
    hypotheses: &[RigidTransform<T>],
    inputs: &EvalInputs<'_, T>,
) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(Error::InvalidInput("no hypotheses to time".into()));
    }
    let started = Instant::now();
    let mut sink = T::zero();
    for h in hypotheses {
        sink += inputs.score(spec, h)?.value;
    }
    let elapsed = started.elapsed();
    std::hint::black_box(sink);
    Ok(elapsed.as_secs_f64() / hypotheses.len() as f64)
}

/// Builds an index over `cloud` and reports how long it took.
pub fn time_index_build<T: Real>(cloud: &PointCloud<T>) -> Result<(NeighborIndex<T>, Duration)> {
    let started = Instant::now();
    let index = NeighborIndex::build(cloud)?;
    Ok((index, started.elapsed()))
}
