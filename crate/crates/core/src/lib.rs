//! Hypothesis-evaluation metrics for RANSAC-based 3D rigid registration.
//!
//! The crate scores 6-DoF pose hypotheses generated from putative
//! point correspondences. Alongside the classic inlier count it provides six
//! continuous correspondence scores (MAE, MSE, LOG-COSH, EXP, QUANTILE and
//! -QUANTILE) that favor hypotheses whose inliers fit tightly while treating
//! outliers alike, plus Huber, point-cloud-distance and overlap baselines.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evalbench;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod ransac;
pub mod report;
pub mod scalar;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use evalbench::{
    is_correct, rmse, run_experiment, time_metric_evaluation, EvalConfig, ExperimentRow, MetricTemplate, SweepAxis,
};
pub use geom::{cloud_resolution, estimate_rigid_transform, Point3, PointCloud, RigidTransform};
pub use metrics::{
    evaluate_hypothesis, evaluate_hypothesis_cloud, score_correspondence, transformation_error, Correspondence,
    CorrespondenceSet, HypothesisScore, MetricKind, MetricSpec,
};
pub use ransac::{run_ransac, RansacConfig, RegistrationResult};
pub use scalar::Real;
pub use spatial::{build_index, Neighbor, NeighborIndex};
pub use synth::{generate_correspondences, generate_scene, CorrespondenceConfig, SceneConfig, ScenePair, Shape};

pub type Point3f64 = Point3<f64>;
pub type PointCloud64 = PointCloud<f64>;
pub type RigidTransform64 = RigidTransform<f64>;
pub type Correspondence64 = Correspondence<f64>;
pub type CorrespondenceSet64 = CorrespondenceSet<f64>;
pub type MetricSpec64 = MetricSpec<f64>;
pub type NeighborIndex64 = NeighborIndex<f64>;
pub type RansacConfig64 = RansacConfig<f64>;
pub type RegistrationResult64 = RegistrationResult<f64>;
pub type SceneConfig64 = SceneConfig<f64>;
pub type ScenePair64 = ScenePair<f64>;
pub type CorrespondenceConfig64 = CorrespondenceConfig<f64>;
pub type EvalConfig64 = EvalConfig<f64>;

pub type PointCloud32 = PointCloud<f32>;
pub type RigidTransform32 = RigidTransform<f32>;
pub type MetricSpec32 = MetricSpec<f32>;
