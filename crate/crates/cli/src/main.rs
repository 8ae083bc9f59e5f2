use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regscore::evalbench::{EvalConfig, MetricTemplate, SweepAxis, DEFAULT_D_RMSE_PR, DEFAULT_TRIALS};
use regscore::io::{self, CloudFormat};
use regscore::metrics::{MetricKind, DEFAULT_M, DEFAULT_T_OVERLAP_PR, DEFAULT_T_PR};
use regscore::ransac::DEFAULT_ITERATIONS;
use regscore::report;
use regscore::synth::{Shape, DEFAULT_BLOB_DIAMETER, DEFAULT_SCENE_POINTS};
use regscore::{
    generate_correspondences, generate_scene, rmse, run_ransac, CorrespondenceConfig, CorrespondenceSet, Error,
    MetricSpec, NeighborIndex, PointCloud, RansacConfig, RigidTransform, SceneConfig,
};

#[derive(Parser)]
#[command(name = "regscore", version, about = "RANSAC hypothesis-evaluation metrics for 3D rigid registration")]
struct Cli {
    /// Worker threads for parallel trials and hypothesis scoring (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register one source/target pair with one metric
    Register(RegisterArgs),
    /// Run a seeded sweep experiment and write a CSV report
    Bench(BenchArgs),
    /// Write a synthetic scene, its ground truth and correspondences to files
    Synth(SynthArgs),
    /// Print point count, resolution and bounding box of a cloud
    Info(InfoArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// Inlier threshold t, in pr
    #[arg(long, default_value_t = DEFAULT_T_PR)]
    t: f64,
    /// QUANTILE / NEG-QUANTILE weight m
    #[arg(long, default_value_t = DEFAULT_M)]
    m: f64,
    /// Distance threshold for overlap-count, in pr
    #[arg(long, default_value_t = DEFAULT_T_OVERLAP_PR)]
    t_overlap: f64,
    /// RANSAC iterations
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    /// Base random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RegisterArgs {
    /// Source cloud (.xyz or .ply)
    #[arg(long)]
    source: PathBuf,
    /// Target cloud (.xyz or .ply)
    #[arg(long)]
    target: PathBuf,
    /// Correspondences, one "sx sy sz tx ty tz" line each; defaults to pairing points by index
    #[arg(long)]
    corrs: Option<PathBuf>,
    /// Metric name
    #[arg(long, default_value = "mae", value_parser = parse_metric)]
    metric: MetricKind,
    /// Ground-truth transform file (3x4 row-major) or "identity"; enables RMSE output
    #[arg(long)]
    gt: Option<String>,
    /// Correctness threshold d_rmse, in pr
    #[arg(long, default_value_t = DEFAULT_D_RMSE_PR)]
    d_rmse: f64,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args)]
struct SceneArgs {
    /// Points per synthetic cloud
    #[arg(long, default_value_t = DEFAULT_SCENE_POINTS)]
    points: usize,
    /// Use this cloud as the scene shape instead of a random blob
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Correspondences per scene
    #[arg(long, default_value_t = 1000)]
    correspondences: usize,
    /// Fraction of correspondences that are inliers
    #[arg(long, default_value_t = 0.1)]
    inlier_ratio: f64,
    /// Inlier noise sigma, in pr
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated metric names, reported in this order
    #[arg(long, value_delimiter = ',', value_parser = parse_metric, required = true)]
    metrics: Vec<MetricKind>,
    /// Sweep axis: t, iterations, d_rmse, inlier_ratio, noise, decimation-uniform, decimation-random, holes
    #[arg(long, value_parser = parse_axis)]
    sweep: SweepAxis,
    /// Sweep values as start:end:step (inclusive) or a comma list
    #[arg(long, value_parser = parse_values)]
    values: SweepValues,
    /// Trials per sweep value
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Correctness threshold d_rmse, in pr
    #[arg(long, default_value_t = DEFAULT_D_RMSE_PR)]
    d_rmse: f64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
    /// Cloud file format: xyz or ply
    #[arg(long, default_value = "xyz", value_parser = parse_format)]
    format: CloudFormat,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scene: SceneArgs,
}

#[derive(Args)]
struct InfoArgs {
    /// Cloud file (.xyz or .ply)
    path: PathBuf,
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<CloudFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone)]
struct SweepValues(Vec<f64>);

fn parse_values(s: &str) -> Result<SweepValues, String> {
    io::parse_sweep_values(s).map(SweepValues).map_err(|e| e.to_string())
}

fn read_cloud(path: &Path) -> regscore::Result<PointCloud<f64>> {
    io::parse_cloud_file(path, CloudFormat::from_path(path)?)
}

fn scene_configs(args: &SceneArgs, seed: u64) -> regscore::Result<(SceneConfig<f64>, CorrespondenceConfig<f64>)> {
    let mut scene = SceneConfig::new(seed);
    scene.n_points = args.points;
    scene.shape = match &args.cloud {
        Some(path) => Shape::File(read_cloud(path)?),
        None => Shape::RandomBlob { diameter: DEFAULT_BLOB_DIAMETER },
    };
    let corrs = CorrespondenceConfig {
        n_correspondences: args.correspondences,
        inlier_ratio: args.inlier_ratio,
        inlier_sigma_pr: args.sigma,
        seed,
    };
    Ok((scene, corrs))
}

fn register(args: &RegisterArgs) -> regscore::Result<()> {
    let source = read_cloud(&args.source)?;
    let target = read_cloud(&args.target)?;
    let corrs = match &args.corrs {
        Some(path) => io::parse_correspondences(&fs::read_to_string(path)?)?,
        None => CorrespondenceSet::aligned(&source, &target)?,
    };
    let pr = target.resolution()?;
    let th = &args.thresholds;
    let spec = MetricSpec::in_pr_units(args.metric, pr, th.t, th.m, th.t_overlap)?;
    let index = if args.metric.is_correspondence_based() { None } else { Some(NeighborIndex::build(&target)?) };
    let mut config = RansacConfig::new(spec, th.seed).with_iterations(th.iterations);
    config.parallel = true;
    let result = run_ransac(&config, &corrs, Some(&source), index.as_ref())?;

    print!("{}", io::format_transform(&result.best_transform));
    println!("metric {} score {}", args.metric, report::format_sig6(result.best_score.value));
    println!("best iteration {} of {}", result.best_iteration, result.hypotheses_evaluated);
    println!("pr {}", report::format_sig6(pr));
    if let Some(gt) = &args.gt {
        let gt: RigidTransform<f64> =
            if gt == "identity" { RigidTransform::identity() } else { io::parse_transform(&fs::read_to_string(gt)?)? };
        let pairs: Vec<_> = source.points().iter().map(|p| (*p, gt.apply(p))).collect();
        let err = rmse(&result.best_transform, &pairs)?;
        let correct = regscore::is_correct(err, args.d_rmse, pr);
        println!("rmse {} ({} pr) correct {correct}", report::format_sig6(err), report::format_sig6(err / pr));
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> regscore::Result<()> {
    let th = &args.thresholds;
    let metrics = args
        .metrics
        .iter()
        .map(|&kind| MetricTemplate { kind, t_pr: th.t, m: th.m, t_overlap_pr: th.t_overlap })
        .collect();
    let mut cfg = EvalConfig::new(metrics, args.sweep, args.values.0.clone(), th.seed);
    cfg.trials = args.trials;
    cfg.d_rmse_pr = args.d_rmse;
    cfg.iterations = th.iterations;
    let (scene, corrs) = scene_configs(&args.scene, th.seed)?;
    let rows = regscore::run_experiment(&cfg, &scene, &corrs)?;
    report::write_csv(&rows, BufWriter::new(File::create(&args.out)?))?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn synth(args: &SynthArgs) -> regscore::Result<()> {
    let (scene_cfg, corr_cfg) = scene_configs(&args.scene, args.seed)?;
    let scene = generate_scene(&scene_cfg)?;
    let corrs = generate_correspondences(&scene, &corr_cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    let ext = match args.format {
        CloudFormat::XyzAscii => "xyz",
        CloudFormat::PlyAscii => "ply",
    };
    io::write_cloud_file(&scene.source, &args.out_dir.join(format!("source.{ext}")), args.format)?;
    io::write_cloud_file(&scene.target, &args.out_dir.join(format!("target.{ext}")), args.format)?;
    fs::write(args.out_dir.join("gt.txt"), io::format_transform(&scene.gt))?;
    io::write_correspondences(&corrs.set, BufWriter::new(File::create(args.out_dir.join("correspondences.txt"))?))?;
    println!(
        "{} points, pr {}, {} correspondences ({} inliers) in {}",
        scene.target.len(),
        report::format_sig6(scene.pr),
        corrs.set.len(),
        corrs.inlier_count(),
        args.out_dir.display()
    );
    Ok(())
}

fn info(args: &InfoArgs) -> regscore::Result<()> {
    let cloud = read_cloud(&args.path)?;
    let (lo, hi) = cloud.bounding_box().ok_or(Error::EmptyCloud)?;
    println!("points {}", cloud.len());
    println!("pr {}", report::format_sig6(cloud.resolution()?));
    println!("min {} {} {}", lo.x, lo.y, lo.z);
    println!("max {} {} {}", hi.x, hi.y, hi.z);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match &cli.command {
        Command::Register(a) => register(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
        Command::Info(a) => info(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
