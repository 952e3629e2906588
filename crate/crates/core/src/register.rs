//! Rigid registration from correspondences: closed-form least squares
//! (Kabsch) wrapped in a seeded RANSAC loop.

use log::debug;
use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{match_features, CorrespondenceSet};
use crate::pointcloud::{IndexedCloud, RigidTransform};
use crate::sdass::{describe_keypoints, SdassParams};

pub const DEFAULT_INLIER_EPS_MR: f64 = 2.0;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

const CHUNK: usize = 64;

/// Least-squares rotation and translation taking `scene[i]` onto `model[i]`.
pub fn estimate_rigid(scene: &[Point3<f64>], model: &[Point3<f64>]) -> Result<RigidTransform> {
    if scene.len() != model.len() {
        return Err(Error::InvalidParameter(format!(
            "point lists differ in length ({} vs {})",
            scene.len(),
            model.len()
        )));
    }
    if scene.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "rigid fit needs 3 pairs, got {}",
            scene.len()
        )));
    }
    let n = scene.len() as f64;
    let cs = scene.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cm = model.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let h = scene.iter().zip(model).fold(Matrix3::zeros(), |acc, (s, m)| {
        acc + (s.coords - cs) * (m.coords - cm).transpose()
    });
    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateInput("collinear or coincident points".into()));
    }
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = cm - rotation * cs;
    RigidTransform::new(rotation, translation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Absolute inlier distance.
    pub inlier_eps: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once this probability of having drawn an all-inlier sample is reached.
    pub confidence: f64,
}

impl RansacParams {
    pub fn with_mr(mr: f64, seed: u64) -> Self {
        RansacParams {
            inlier_eps: DEFAULT_INLIER_EPS_MR * mr,
            max_iters: DEFAULT_MAX_ITERS,
            seed,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_eps > 0.0 && self.inlier_eps.is_finite()) {
            return Err(Error::InvalidParameter("inlier eps must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max iterations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter("confidence must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Scene → model.
    pub transform: RigidTransform,
    /// Indices into the correspondence list.
    pub inliers: Vec<usize>,
    pub rms_residual: f64,
    pub iterations_used: usize,
}

fn rms(t: &RigidTransform, scene: &[Point3<f64>], model: &[Point3<f64>], idx: &[usize]) -> f64 {
    let sum: f64 = idx
        .iter()
        .map(|&i| (t.apply(&scene[i]) - model[i]).norm_squared())
        .sum();
    (sum / idx.len() as f64).sqrt()
}

struct Hypothesis {
    index: usize,
    inliers: Vec<usize>,
    rms: f64,
}

impl Hypothesis {
    fn beats(&self, other: &Hypothesis) -> bool {
        other
            .inliers
            .len()
            .cmp(&self.inliers.len())
            .then(self.rms.total_cmp(&other.rms))
            .then(self.index.cmp(&other.index))
            .is_lt()
    }
}

fn required_iterations(inlier_ratio: f64, confidence: f64) -> f64 {
    let good = inlier_ratio.powi(3);
    if good >= 1.0 {
        return 1.0;
    }
    if good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - good).ln()
}

/// RANSAC over index-aligned point pairs.
pub fn ransac_pairs(scene: &[Point3<f64>], model: &[Point3<f64>], params: &RansacParams) -> Result<RegistrationResult> {
    params.validate()?;
    if scene.len() != model.len() {
        return Err(Error::InvalidParameter("point lists differ in length".into()));
    }
    let n = scene.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "RANSAC needs 3 correspondences, got {n}"
        )));
    }
    let eps_sq = params.inlier_eps * params.inlier_eps;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Hypothesis> = None;
    let mut used = 0;
    while used < params.max_iters {
        let count = CHUNK.min(params.max_iters - used);
        let samples: Vec<Vec<usize>> = (0..count).map(|_| sample(&mut rng, n, 3).into_vec()).collect();
        let scored: Vec<Option<Hypothesis>> = samples
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                let sp: Vec<_> = s.iter().map(|&i| scene[i]).collect();
                let mp: Vec<_> = s.iter().map(|&i| model[i]).collect();
                let t = estimate_rigid(&sp, &mp).ok()?;
                let inliers: Vec<usize> = (0..n)
                    .filter(|&i| (t.apply(&scene[i]) - model[i]).norm_squared() <= eps_sq)
                    .collect();
                if inliers.is_empty() {
                    return None;
                }
                let rms = rms(&t, scene, model, &inliers);
                Some(Hypothesis {
                    index: used + k,
                    inliers,
                    rms,
                })
            })
            .collect();
        used += count;
        for h in scored.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| h.beats(b)) {
                best = Some(h);
            }
        }
        if let Some(b) = &best {
            if (used as f64) >= required_iterations(b.inliers.len() as f64 / n as f64, params.confidence) {
                break;
            }
        }
    }
    let best = best
        .filter(|b| b.inliers.len() >= 3)
        .ok_or_else(|| Error::RegistrationFailure(format!("no hypothesis reached 3 inliers in {used} iterations")))?;
    debug!(
        "RANSAC best hypothesis {} with {} inliers",
        best.index,
        best.inliers.len()
    );
    let sp: Vec<_> = best.inliers.iter().map(|&i| scene[i]).collect();
    let mp: Vec<_> = best.inliers.iter().map(|&i| model[i]).collect();
    let transform = estimate_rigid(&sp, &mp)?;
    Ok(RegistrationResult {
        rms_residual: rms(&transform, scene, model, &best.inliers),
        transform,
        inliers: best.inliers,
        iterations_used: used,
    })
}

/// RANSAC over feature correspondences between scene and model keypoints.
pub fn ransac_register(
    corrs: &CorrespondenceSet,
    scene_keypoints: &[Point3<f64>],
    model_keypoints: &[Point3<f64>],
    params: &RansacParams,
) -> Result<RegistrationResult> {
    let mut scene = Vec::with_capacity(corrs.len());
    let mut model = Vec::with_capacity(corrs.len());
    for m in &corrs.matches {
        let (Some(s), Some(t)) = (scene_keypoints.get(m.scene), model_keypoints.get(m.model)) else {
            return Err(Error::InvalidParameter(format!(
                "match ({}, {}) outside keypoint lists",
                m.scene, m.model
            )));
        };
        scene.push(*s);
        model.push(*t);
    }
    ransac_pairs(&scene, &model, params)
}

/// Output of [`register_clouds`].
#[derive(Debug, Clone, PartialEq)]
pub struct CloudRegistration {
    pub result: RegistrationResult,
    pub correspondences: CorrespondenceSet,
    pub scene_keypoints: Vec<Point3<f64>>,
    pub model_keypoints: Vec<Point3<f64>>,
}

/// Describes `keypoints` random points of each cloud with SDASS, matches
/// them, keeps the fraction `keep` with the lowest NNDR and runs RANSAC.
pub fn register_clouds(
    scene: &IndexedCloud,
    model: &IndexedCloud,
    keypoints: usize,
    params: &SdassParams,
    ransac: &RansacParams,
    mr: f64,
    keep: f64,
) -> Result<CloudRegistration> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidParameter("keep fraction must lie in (0, 1]".into()));
    }
    let pick = |cloud: &IndexedCloud, seed: u64| -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cloud.cloud().len();
        let mut idx = sample(&mut rng, n, keypoints.min(n)).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| *cloud.cloud().point(i)).collect()
    };
    let split = |described: Vec<crate::sdass::Described>| {
        described
            .into_iter()
            .filter_map(|d| d.feature.ok().map(|f| (d.keypoint, f)))
            .unzip::<_, _, Vec<_>, Vec<_>>()
    };
    let (scene_kps, scene_feats) = split(describe_keypoints(scene, &pick(scene, ransac.seed), params, mr)?);
    let (model_kps, model_feats) = split(describe_keypoints(
        model,
        &pick(model, ransac.seed.wrapping_add(1)),
        params,
        mr,
    )?);
    let mut corrs = match_features(&scene_feats, &model_feats)?;
    let mut order: Vec<usize> = (0..corrs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&corrs.matches[a], &corrs.matches[b]);
        ma.nndr().total_cmp(&mb.nndr()).then(ma.scene.cmp(&mb.scene))
    });
    order.truncate(((corrs.len() as f64 * keep).ceil() as usize).max(3.min(corrs.len())));
    order.sort_unstable();
    corrs.matches = order.into_iter().map(|i| corrs.matches[i]).collect();
    let result = ransac_register(&corrs, &scene_kps, &model_kps, ransac)?;
    Ok(CloudRegistration {
        result,
        correspondences: corrs,
        scene_keypoints: scene_kps,
        model_keypoints: model_kps,
    })
}
