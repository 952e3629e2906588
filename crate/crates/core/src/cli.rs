//! Command-line front end. Every command writes its outputs and a
//! `manifest.txt` into `--out DIR`; `--manifest FILE --replay-out DIR`
//! reruns a recorded command and checks the outputs are byte-identical.
//!
//! Exit codes: 0 success, 2 invalid parameters or usage, 3 unparsable input,
//! 4 degenerate geometry, 5 I/O and anything else.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use nalgebra::Point3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::axes::{AxisKind, LraVariant, DEFAULT_LMA_RADIUS_MR, DEFAULT_RN_RADIUS_MR, DEFAULT_SUBSET_FRACTION};
use crate::baselines::{describe_spin_images, SpinImageParams};
use crate::error::{Error, Result};
use crate::eval::{self, AcceptanceRule, MatchingConfig};
use crate::featfile::{DescriptorKind, FeatureSet};
use crate::io::{csv_bytes, sha256_file, sha256_hex, write_atomic};
use crate::manifest::RunManifest;
use crate::nuisance::{parse_rate, NuisanceSpec, DEFAULT_TRANSLATION_EXTENT_MR};
use crate::ply::{load_ply, write_ply, PlyError, PlyFormat};
use crate::pointcloud::{IndexedCloud, PointCloud, RigidTransform};
use crate::register::{register_clouds, RansacParams, DEFAULT_CONFIDENCE};
use crate::sdass::{describe_keypoints, SdassParams};

pub const THREADS_ENV: &str = "SDASS_THREADS";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Parser)]
#[command(
    name = "sdass",
    version,
    about = "SDASS descriptor, nuisance generation and matching evaluation",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    /// Replay a recorded run.
    #[arg(long, requires = "replay_out")]
    manifest: Option<PathBuf>,
    /// Output directory for the replay.
    #[arg(long, requires = "manifest")]
    replay_out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh resolution of a cloud.
    Mr(MrArgs),
    /// Rigid motion, decimation and Gaussian noise.
    Perturb(PerturbArgs),
    /// Describe keypoints with SDASS or spin images.
    Describe(DescribeArgs),
    /// Match two feature files and score against a ground-truth transform.
    Match(MatchArgs),
    /// Repeatability of a local axis between two clouds.
    Axes(AxesArgs),
    /// Feature-based RANSAC registration.
    Register(RegisterArgs),
}

#[derive(Debug, Args)]
struct MrArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    input: PathBuf,
    /// Gaussian noise σ in mr units.
    #[arg(long, default_value_t = 0.0)]
    noise_mr: f64,
    /// Fraction of points kept, as `0.25` or `1/4`.
    #[arg(long, default_value = "1")]
    decimate: String,
    /// Seed of the random rigid motion; identity when absent.
    #[arg(long)]
    transform_seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long, default_value_t = 0)]
    decimate_seed: u64,
    /// Translation range of the random motion in mr units.
    #[arg(long, default_value_t = DEFAULT_TRANSLATION_EXTENT_MR)]
    translation_mr: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DescriptorArg {
    Sdass,
    Spin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LraArg {
    Sdass,
    Yang,
}

#[derive(Debug, Args)]
struct SdassFlags {
    #[arg(long, value_enum, default_value_t = DescriptorArg::Sdass)]
    descriptor: DescriptorArg,
    /// Support radius in mr units.
    #[arg(long, default_value_t = 20.0)]
    radius_mr: f64,
    #[arg(long, default_value_t = 5)]
    n_lh: usize,
    #[arg(long, default_value_t = 5)]
    n_pr: usize,
    #[arg(long, default_value_t = 15)]
    n_ld: usize,
    #[arg(long, default_value_t = DEFAULT_LMA_RADIUS_MR)]
    lma_mr: f64,
    #[arg(long, value_enum, default_value_t = LraArg::Sdass)]
    lra: LraArg,
    /// Direction-radius fraction for `--lra yang`.
    #[arg(long, default_value_t = DEFAULT_SUBSET_FRACTION)]
    subset_fraction: f64,
    /// Spin image bins per side.
    #[arg(long, default_value_t = 15)]
    spin_bins: usize,
}

impl SdassFlags {
    fn sdass(&self) -> SdassParams {
        SdassParams {
            support_radius_mr: self.radius_mr,
            n_lh: self.n_lh,
            n_pr: self.n_pr,
            n_ld: self.n_ld,
            lma_radius_mr: self.lma_mr,
            lra_variant: match self.lra {
                LraArg::Sdass => LraVariant::SdassFullRadius,
                LraArg::Yang => LraVariant::YangSubsetRadius {
                    fraction: self.subset_fraction,
                },
            },
        }
    }

    fn spin(&self) -> SpinImageParams {
        SpinImageParams {
            support_radius_mr: self.radius_mr,
            bins: self.spin_bins,
        }
    }
}

#[derive(Debug, Args)]
struct DescribeArgs {
    input: PathBuf,
    /// Text file of `x y z` keypoints, one per line.
    #[arg(long, conflicts_with = "sample")]
    keypoints: Option<PathBuf>,
    /// Sample this many cloud points as keypoints.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Take mr from this cloud (usually the model) instead of the input.
    #[arg(long)]
    mr_from: Option<PathBuf>,
    #[command(flatten)]
    params: SdassFlags,
    /// Also write features.csv.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Nndr,
    Distance,
}

#[derive(Debug, Args)]
struct MatchArgs {
    scene: PathBuf,
    model: PathBuf,
    /// Scene → model ground truth, 16 row-major values.
    gt: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_GEO_TOLERANCE_MR)]
    geo_tol_mr: f64,
    #[arg(long, value_enum, default_value_t = RuleArg::Nndr)]
    rule: RuleArg,
    #[arg(long, default_value_t = eval::DEFAULT_THRESHOLDS)]
    thresholds: usize,
    #[arg(long, default_value_t = eval::DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    LraSdass,
    LraYang,
    Lma,
    Rn,
}

#[derive(Debug, Args)]
struct AxesArgs {
    scene: PathBuf,
    model: PathBuf,
    gt: PathBuf,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Defaults: 20 for LRAs, 7 for LMA, 3 for RN.
    #[arg(long)]
    radius_mr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SUBSET_FRACTION)]
    subset_fraction: f64,
    #[arg(long, default_value_t = eval::DEFAULT_KEYPOINTS)]
    keypoints: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keypoint pair tolerance in mr units.
    #[arg(long, default_value_t = eval::DEFAULT_GEO_TOLERANCE_MR)]
    pair_tol_mr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    scene: PathBuf,
    model: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_KEYPOINTS)]
    keypoints: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: SdassFlags,
    #[arg(long, default_value_t = crate::register::DEFAULT_INLIER_EPS_MR)]
    inlier_eps_mr: f64,
    #[arg(long, default_value_t = crate::register::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    confidence: f64,
    /// Fraction of matches, lowest NNDR first, handed to RANSAC.
    #[arg(long, default_value_t = 0.3)]
    keep: f64,
    /// Optional ground truth to report rotation and translation errors.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mr(_) => "mr",
            Command::Perturb(_) => "perturb",
            Command::Describe(_) => "describe",
            Command::Match(_) => "match",
            Command::Axes(_) => "axes",
            Command::Register(_) => "register",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::Mr(a) => &a.out,
            Command::Perturb(a) => &a.out,
            Command::Describe(a) => &a.out,
            Command::Match(a) => &a.out,
            Command::Axes(a) => &a.out,
            Command::Register(a) => &a.out,
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::Mr(a) => vec![&a.input],
            Command::Perturb(a) => vec![&a.input],
            Command::Describe(a) => [Some(&a.input), a.keypoints.as_ref(), a.mr_from.as_ref()]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path)
                .collect(),
            Command::Match(a) => vec![&a.scene, &a.model, &a.gt],
            Command::Axes(a) => vec![&a.scene, &a.model, &a.gt],
            Command::Register(a) => [Some(&a.scene), Some(&a.model), a.gt.as_ref()]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path)
                .collect(),
        }
    }
}

/// What a command produced, before anything touches the disk.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    params: Vec<(String, String)>,
    stdout: String,
}

impl Outputs {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    fn params(&mut self, prefix: &str, pairs: Vec<(String, String)>) {
        for (k, v) in pairs {
            self.params.push((format!("{prefix}{k}"), v));
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// One header row and one value row.
fn summary_csv(fields: &[(&str, String)]) -> Result<Vec<u8>> {
    let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
    Ok(csv_bytes(&header, [fields.iter().map(|(_, v)| v.as_str())])?)
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    Ok(load_ply(path)?.into_cloud())
}

fn load_transform(path: &Path) -> Result<RigidTransform> {
    RigidTransform::parse_text(&fs::read_to_string(path)?)
}

fn parse_keypoints(text: &str) -> Result<Vec<Point3<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad keypoint value {t:?}")))
                })
                .collect::<Result<_>>()?;
            match v[..] {
                [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Point3::new(x, y, z)),
                _ => Err(Error::Parse(format!("expected three finite coordinates, got {l:?}"))),
            }
        })
        .collect()
}

fn sample_points(cloud: &PointCloud, n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.min(cloud.len());
    let mut idx = sample(&mut rng, cloud.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| *cloud.point(i)).collect()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn cmd_mr(a: &MrArgs) -> Result<Outputs> {
    let cloud = load_cloud(&a.input)?;
    let mr = cloud.resolution()?;
    let mut out = Outputs::default();
    out.file(
        "summary.csv",
        summary_csv(&[("points", cloud.len().to_string()), ("mr", num(mr))])?,
    );
    out.stdout = format!("{}\n", num(mr));
    Ok(out)
}

fn cmd_perturb(a: &PerturbArgs) -> Result<Outputs> {
    let cloud = load_cloud(&a.input)?;
    let mr = cloud.resolution()?;
    let spec = NuisanceSpec {
        noise_sigma_mr: a.noise_mr,
        decimation_rate: parse_rate(&a.decimate)?,
        transform_seed: a.transform_seed,
        noise_seed: a.noise_seed,
        decimation_seed: a.decimate_seed,
        translation_extent_mr: a.translation_mr,
    };
    let perturbed = spec.apply(&cloud, mr)?;
    let format = match a.format {
        FormatArg::Ascii => PlyFormat::Ascii,
        FormatArg::Binary => PlyFormat::BinaryLittleEndian,
    };
    let mut ply = Vec::new();
    write_ply(&mut ply, &perturbed.cloud, &[], format)?;
    let mut out = Outputs::default();
    out.params("nuisance.", spec.to_pairs());
    out.param("mr", num(mr));
    out.param("mr_source", "input");
    out.file("perturbed.ply", ply);
    out.file("gt.transform", perturbed.ground_truth().to_text().into_bytes());
    out.file(
        "summary.csv",
        summary_csv(&[
            ("input_points", cloud.len().to_string()),
            ("output_points", perturbed.cloud.len().to_string()),
            ("mr", num(mr)),
            ("noise_sigma_mr", num(spec.noise_sigma_mr)),
            ("decimation_rate", num(spec.decimation_rate)),
        ])?,
    );
    Ok(out)
}

fn cmd_describe(a: &DescribeArgs) -> Result<Outputs> {
    let cloud = load_cloud(&a.input)?;
    let (mr, mr_source) = match &a.mr_from {
        Some(p) => (load_cloud(p)?.resolution()?, "mr_from"),
        None => (cloud.resolution()?, "input"),
    };
    let keypoints = match (&a.keypoints, a.sample) {
        (Some(p), _) => parse_keypoints(&fs::read_to_string(p)?)?,
        (None, Some(n)) => sample_points(&cloud, n, a.seed),
        (None, None) => return Err(Error::InvalidParameter("give --keypoints FILE or --sample N".into())),
    };
    if keypoints.is_empty() {
        return Err(Error::InvalidParameter("no keypoints".into()));
    }
    let indexed = IndexedCloud::new(cloud);
    let mut out = Outputs::default();
    let (kind, pairs, len, described) = match a.params.descriptor {
        DescriptorArg::Sdass => {
            let p = a.params.sdass();
            (
                DescriptorKind::Sdass,
                p.to_pairs(),
                p.feature_len(),
                describe_keypoints(&indexed, &keypoints, &p, mr)?,
            )
        }
        DescriptorArg::Spin => {
            let p = a.params.spin();
            (
                DescriptorKind::SpinImage,
                p.to_pairs(),
                p.feature_len(),
                describe_spin_images(&indexed, &keypoints, &p, mr)?,
            )
        }
    };
    let params_text: String = pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    out.param("descriptor", kind);
    out.params("descriptor.", pairs);
    out.param("seed", a.seed);
    out.param("mr", num(mr));
    out.param("mr_source", mr_source);
    let set = FeatureSet::from_described(kind, params_text, mr, len, &described)?;
    let failed = set.records.len() - set.valid_count();
    if failed > 0 {
        warn!("{failed} of {} keypoints could not be described", set.records.len());
    }
    if a.csv {
        out.file("features.csv", set.to_csv_bytes()?);
    }
    out.file("features.feat", set.to_bytes());
    out.file(
        "summary.csv",
        summary_csv(&[
            ("descriptor", kind.to_string()),
            ("keypoints", set.records.len().to_string()),
            ("described", set.valid_count().to_string()),
            ("failed", failed.to_string()),
            ("feature_len", len.to_string()),
            ("mr", num(mr)),
        ])?,
    );
    Ok(out)
}

fn cmd_match(a: &MatchArgs) -> Result<Outputs> {
    let scene = FeatureSet::load(&a.scene)?;
    let model = FeatureSet::load(&a.model)?;
    if scene.kind != model.kind || scene.feature_len != model.feature_len {
        return Err(Error::InvalidParameter(format!(
            "feature files disagree: {} × {} vs {} × {}",
            scene.kind, scene.feature_len, model.kind, model.feature_len
        )));
    }
    let gt = load_transform(&a.gt)?;
    let mr = model.mr;
    let config = MatchingConfig {
        geo_tolerance: positive("--geo-tol-mr", a.geo_tol_mr)? * mr,
        n_thresholds: a.thresholds,
        rule: match a.rule {
            RuleArg::Nndr => AcceptanceRule::Nndr,
            RuleArg::Distance => AcceptanceRule::Distance,
        },
        top_k: a.top_k,
    };
    let report = eval::evaluate_matching(&scene.described(), &model.described(), &gt, &config)?;
    let mut out = Outputs::default();
    out.param("mr", num(mr));
    out.param("mr_source", "model");
    out.param("geo_tolerance", num(config.geo_tolerance));
    out.param("rule", format!("{:?}", config.rule).to_lowercase());
    out.param("thresholds", config.n_thresholds);
    out.param("top_k", config.top_k);
    let rows = report.curve.points.iter().map(|p| {
        [
            num(p.threshold),
            num(p.precision),
            num(p.recall),
            num(p.one_minus_precision()),
            p.accepted.to_string(),
        ]
    });
    out.file(
        "rpc.csv",
        csv_bytes(
            &["threshold", "precision", "recall", "one_minus_precision", "accepted"],
            rows,
        )?,
    );
    let corrs = &report.correspondences;
    out.file(
        "summary.csv",
        summary_csv(&[
            ("auc_pr", num(report.curve.auc_pr)),
            ("pcc", num(report.pcc.percentage)),
            ("pcc_used", report.pcc.used.to_string()),
            ("matches", corrs.len().to_string()),
            ("correct", corrs.correct_count().to_string()),
            ("ground_truth_pairs", corrs.ground_truth_pairs.to_string()),
            ("scene_failed", report.scene_failed.to_string()),
            ("model_failed", report.model_failed.to_string()),
            ("geo_tolerance", num(config.geo_tolerance)),
        ])?,
    );
    out.stdout = format!(
        "auc_pr={} pcc={}\n",
        num(report.curve.auc_pr),
        num(report.pcc.percentage)
    );
    Ok(out)
}

fn cmd_axes(a: &AxesArgs) -> Result<Outputs> {
    let scene = IndexedCloud::new(load_cloud(&a.scene)?);
    let model = IndexedCloud::new(load_cloud(&a.model)?);
    let gt = load_transform(&a.gt)?;
    let mr = model.resolution()?;
    let kind = match a.axis {
        AxisArg::LraSdass => AxisKind::Lra {
            radius_mr: a.radius_mr.unwrap_or(20.0),
            variant: LraVariant::SdassFullRadius,
        },
        AxisArg::LraYang => AxisKind::Lra {
            radius_mr: a.radius_mr.unwrap_or(20.0),
            variant: LraVariant::YangSubsetRadius {
                fraction: a.subset_fraction,
            },
        },
        AxisArg::Lma => AxisKind::Lma {
            radius_mr: a.radius_mr.unwrap_or(DEFAULT_LMA_RADIUS_MR),
        },
        AxisArg::Rn => AxisKind::RnNormal {
            radius_mr: a.radius_mr.unwrap_or(DEFAULT_RN_RADIUS_MR),
        },
    };
    let radius_mr = match kind {
        AxisKind::Lra { radius_mr, .. } | AxisKind::Lma { radius_mr } | AxisKind::RnNormal { radius_mr } => radius_mr,
    };
    positive("--radius-mr", radius_mr)?;
    let pair_tol = positive("--pair-tol-mr", a.pair_tol_mr)? * mr;
    let pairs = eval::sample_keypoint_pairs(&scene, &model, &gt, a.keypoints, a.seed, pair_tol)?;
    let report = eval::axis_repeatability(&scene, &model, &pairs, kind, mr)?;
    let mut out = Outputs::default();
    out.param("axis", kind.label());
    out.param("radius_mr", num(radius_mr));
    out.param("seed", a.seed);
    out.param("mr", num(mr));
    out.param("mr_source", "model");
    out.param("pair_tolerance", num(pair_tol));
    let mean = report.errors.iter().sum::<f64>() / report.errors.len() as f64;
    out.file(
        "axes.csv",
        csv_bytes(
            &["angle_error_deg"],
            report.errors.iter().map(|e| [num(e.to_degrees())]),
        )?,
    );
    out.file(
        "summary.csv",
        summary_csv(&[
            ("axis", kind.label().to_string()),
            ("radius_mr", num(radius_mr)),
            ("repeatability", num(report.repeatability)),
            ("mean_error_deg", num(mean.to_degrees())),
            ("pairs", report.pairs.to_string()),
            ("requested", a.keypoints.to_string()),
            ("evaluated", report.errors.len().to_string()),
            ("excluded", report.excluded.to_string()),
        ])?,
    );
    out.stdout = format!("repeatability={}\n", num(report.repeatability));
    Ok(out)
}

fn cmd_register(a: &RegisterArgs) -> Result<Outputs> {
    if a.params.descriptor != DescriptorArg::Sdass {
        return Err(Error::InvalidParameter(
            "register supports the sdass descriptor only".into(),
        ));
    }
    let scene = IndexedCloud::new(load_cloud(&a.scene)?);
    let model = IndexedCloud::new(load_cloud(&a.model)?);
    let mr = model.resolution()?;
    let params = a.params.sdass();
    let ransac = RansacParams {
        inlier_eps: positive("--inlier-eps-mr", a.inlier_eps_mr)? * mr,
        max_iters: a.max_iters,
        seed: a.seed,
        confidence: a.confidence,
    };
    let reg = register_clouds(&scene, &model, a.keypoints, &params, &ransac, mr, a.keep)?;
    let mut out = Outputs::default();
    out.params("descriptor.", params.to_pairs());
    out.param("seed", a.seed);
    out.param("mr", num(mr));
    out.param("mr_source", "model");
    out.param("inlier_eps", num(ransac.inlier_eps));
    out.param("max_iters", ransac.max_iters);
    out.param("confidence", num(ransac.confidence));
    out.param("keep", num(a.keep));
    let r = &reg.result;
    let mut fields = vec![
        ("correspondences", reg.correspondences.len().to_string()),
        ("inliers", r.inliers.len().to_string()),
        ("rms_residual", num(r.rms_residual)),
        ("iterations", r.iterations_used.to_string()),
    ];
    if let Some(gt) = &a.gt {
        let gt = load_transform(gt)?;
        fields.push((
            "rotation_error_deg",
            num(r.transform.rotation_angle_to(&gt).to_degrees()),
        ));
        fields.push((
            "translation_error_mr",
            num((r.transform.translation() - gt.translation()).norm() / mr),
        ));
    }
    out.file("registration.transform", r.transform.to_text().into_bytes());
    out.file("summary.csv", summary_csv(&fields)?);
    out.stdout = r.transform.to_text();
    Ok(out)
}

fn execute(cmd: &Command) -> Result<Outputs> {
    match cmd {
        Command::Mr(a) => cmd_mr(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Describe(a) => cmd_describe(a),
        Command::Match(a) => cmd_match(a),
        Command::Axes(a) => cmd_axes(a),
        Command::Register(a) => cmd_register(a),
    }
}

/// Drops `--out DIR` and makes input paths absolute.
fn record_args(tokens: &[String], inputs: &[(String, PathBuf)]) -> Vec<String> {
    let absolute = |t: &str| {
        inputs
            .iter()
            .find(|(raw, _)| raw == t)
            .map(|(_, abs)| abs.display().to_string())
    };
    let mut args = Vec::new();
    let mut it = tokens.iter();
    while let Some(t) = it.next() {
        if t == "--out" {
            it.next();
        } else if t.starts_with("--out=") {
        } else if let Some((flag, value)) = t.split_once('=').filter(|(f, _)| f.starts_with("--")) {
            args.push(absolute(value).map_or_else(|| t.clone(), |abs| format!("{flag}={abs}")));
        } else {
            args.push(absolute(t).unwrap_or_else(|| t.clone()));
        }
    }
    args
}

/// Runs `cmd`, writes outputs and the manifest, returns the manifest.
fn run_command(cmd: &Command, tokens: &[String]) -> Result<RunManifest> {
    let mut inputs = Vec::new();
    let mut hashes = Vec::new();
    for p in cmd.inputs() {
        let abs = fs::canonicalize(p)?;
        hashes.push((abs.display().to_string(), sha256_file(&abs)?));
        inputs.push((p.to_string_lossy().into_owned(), abs));
    }
    let outputs = execute(cmd)?;
    let dir = cmd.out();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in &outputs.files {
        write_atomic(&dir.join(name), bytes)?;
        written.push((name.clone(), sha256_hex(bytes)));
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: cmd.name().to_string(),
        args: record_args(tokens, &inputs),
        inputs: hashes,
        params: outputs.params,
        outputs: written,
    };
    write_atomic(&dir.join(MANIFEST_FILE), manifest.to_text()?.as_bytes())?;
    print!("{}", outputs.stdout);
    Ok(manifest)
}

/// Reruns the command recorded in `manifest_path` into `out_dir` and checks
/// every recorded output is reproduced byte for byte.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let recorded = RunManifest::parse(&fs::read_to_string(manifest_path)?)?;
    if recorded.tool_version != env!("CARGO_PKG_VERSION") {
        warn!(
            "manifest written by version {}, replaying with {}",
            recorded.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for (path, sha) in &recorded.inputs {
        if &sha256_file(Path::new(path))? != sha {
            return Err(Error::ReplayMismatch(format!(
                "input {path} changed since the run was recorded"
            )));
        }
    }
    let mut tokens = recorded.args.clone();
    tokens.push("--out".into());
    tokens.push(out_dir.display().to_string());
    let argv = std::iter::once("sdass".to_string()).chain(tokens.iter().cloned());
    let cli =
        Cli::try_parse_from(argv).map_err(|e| Error::Manifest(format!("recorded arguments do not parse: {e}")))?;
    let cmd = cli
        .command
        .ok_or_else(|| Error::Manifest("manifest records no command".into()))?;
    let fresh = run_command(&cmd, &tokens)?;
    let differing: Vec<&str> = recorded
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.contains(o))
        .map(|(name, _)| name.as_str())
        .collect();
    if !differing.is_empty() {
        return Err(Error::ReplayMismatch(format!(
            "outputs differ: {}",
            differing.join(", ")
        )));
    }
    Ok(fresh)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) => 2,
        Error::Ply(PlyError::Io(_)) => 5,
        Error::Ply(_) | Error::Parse(_) | Error::FeatureFile(_) | Error::Manifest(_) | Error::Csv(_) => 3,
        e if e.is_degenerate() => 4,
        _ => 5,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DegenerateInput(_) => "degenerate_input",
        Error::DegenerateKeypoint(_) => "degenerate_keypoint",
        Error::EmptyFeature => "empty_feature",
        Error::DegenerateOutput(_) => "degenerate_output",
        Error::UnsupportedInput(_) => "unsupported_input",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::RegistrationFailure(_) => "registration_failure",
        Error::Ply(PlyError::Io(_)) => "io",
        Error::Ply(_) => "ply",
        Error::FeatureFile(_) => "feature_file",
        Error::Parse(_) => "parse",
        Error::Manifest(_) => "manifest",
        Error::ReplayMismatch(_) => "replay_mismatch",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize =
            v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
            })?;
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialized; {THREADS_ENV} ignored");
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            eprintln!("error kind=usage message={}", first.trim_start_matches("error: "));
            eprint!("{}", e.render());
            return 2;
        }
    };
    let result = configure_threads().and_then(|_| match (&cli.manifest, &cli.replay_out, &cli.command) {
        (Some(m), Some(out), _) => replay(m, out).map(|_| ()),
        (None, None, Some(cmd)) => {
            let tokens: Vec<String> = argv.iter().skip(1).map(|t| t.to_string_lossy().into_owned()).collect();
            run_command(cmd, &tokens).map(|_| ())
        }
        _ => Err(Error::InvalidParameter(
            "give a subcommand or --manifest FILE --replay-out DIR".into(),
        )),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "error kind={} message={}",
                error_kind(&e),
                e.to_string().replace('\n', " ")
            );
            exit_code(&e)
        }
    }
}

pub fn main() -> ! {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run(std::env::args_os()))
}
