//! Evaluation protocol: ground-truth keypoint pairs, descriptor matching,
//! recall vs 1-precision curves, AUC_pr, PCC, and axis repeatability.

use std::cmp::Ordering;

use log::warn;
use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::axes::{self, AxisKind};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::pointcloud::{IndexedCloud, RigidTransform};
use crate::sdass::{Described, FeatureVector};

pub const DEFAULT_GEO_TOLERANCE_MR: f64 = 2.0;
pub const DEFAULT_THRESHOLDS: usize = 100;
pub const DEFAULT_TOP_K: usize = 200;
pub const DEFAULT_KEYPOINTS: usize = 1000;

/// Index-aligned scene/model keypoints related by a known transform.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointPairSet {
    pub scene_keypoints: Vec<Point3<f64>>,
    pub model_keypoints: Vec<Point3<f64>>,
    pub scene_indices: Vec<usize>,
    pub model_indices: Vec<usize>,
    /// Scene → model.
    pub transform: RigidTransform,
    pub tolerance: f64,
    pub requested: usize,
}

impl KeypointPairSet {
    pub fn len(&self) -> usize {
        self.scene_keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene_keypoints.is_empty()
    }

    /// How many requested pairs could not be found, if any.
    pub fn shortfall(&self) -> Option<usize> {
        (self.len() < self.requested).then(|| self.requested - self.len())
    }

    /// `‖transform(scene_i) − model_i‖` for every pair.
    pub fn residuals(&self) -> Vec<f64> {
        self.scene_keypoints
            .iter()
            .zip(&self.model_keypoints)
            .map(|(s, m)| (self.transform.apply(s) - m).norm())
            .collect()
    }

    /// Keeps the pairs for which `keep(i)` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let flags: Vec<bool> = (0..self.len()).map(&mut keep).collect();
        let filter = |v: &mut Vec<_>| {
            let mut it = flags.iter();
            v.retain(|_| *it.next().unwrap());
        };
        filter(&mut self.scene_keypoints);
        filter(&mut self.model_keypoints);
        let mut it = flags.iter();
        self.scene_indices.retain(|_| *it.next().unwrap());
        let mut it = flags.iter();
        self.model_indices.retain(|_| *it.next().unwrap());
    }
}

/// Draws scene points without replacement, maps each through `transform`,
/// and pairs it with the nearest model point when that lies within
/// `tolerance`. Sampling continues until `n` pairs are found or the scene
/// runs out.
pub fn sample_keypoint_pairs(
    scene: &IndexedCloud,
    model: &IndexedCloud,
    transform: &RigidTransform,
    n: usize,
    seed: u64,
    tolerance: f64,
) -> Result<KeypointPairSet> {
    let mut order: Vec<usize> = (0..scene.cloud().len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pairs = KeypointPairSet {
        scene_keypoints: Vec::new(),
        model_keypoints: Vec::new(),
        scene_indices: Vec::new(),
        model_indices: Vec::new(),
        transform: *transform,
        tolerance,
        requested: n,
    };
    for i in order {
        if pairs.len() == n {
            break;
        }
        let s = scene.cloud().point(i);
        let (j, dist) = model
            .index()
            .nearest(&transform.apply(s))
            .expect("model cloud is non-empty");
        if dist <= tolerance {
            pairs.scene_keypoints.push(*s);
            pairs.model_keypoints.push(*model.cloud().point(j));
            pairs.scene_indices.push(i);
            pairs.model_indices.push(j);
        }
    }
    if let Some(missing) = pairs.shortfall() {
        warn!(
            "only {} of {n} keypoint pairs within tolerance ({missing} short)",
            pairs.len()
        );
    }
    Ok(pairs)
}

/// Scene feature `scene` matched to its nearest model feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub scene: usize,
    pub model: usize,
    pub distance: f64,
    /// Distance to the second-nearest model feature, if there is one.
    pub second_distance: Option<f64>,
}

impl Match {
    /// Nearest / second-nearest distance ratio. Zero when the match is exact;
    /// one when there is no second neighbor.
    pub fn nndr(&self) -> f64 {
        match self.second_distance {
            _ if self.distance == 0.0 => 0.0,
            Some(second) if second > 0.0 => self.distance / second,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub matches: Vec<Match>,
    /// Per-match correctness, present once labeled.
    pub labels: Option<Vec<bool>>,
    /// Scene keypoints that have a true counterpart among the model keypoints.
    pub ground_truth_pairs: usize,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn correct_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&c| c).count())
    }
}

/// Matches every scene feature to its L2-nearest model feature through a
/// k-d tree in descriptor space.
pub fn match_features(scene: &[FeatureVector], model: &[FeatureVector]) -> Result<CorrespondenceSet> {
    if scene.is_empty() || model.is_empty() {
        return Err(Error::DegenerateInput("cannot match empty feature sets".into()));
    }
    let dim = model[0].len();
    if let Some(bad) = scene.iter().chain(model).find(|f| f.len() != dim) {
        return Err(Error::InvalidParameter(format!(
            "feature lengths differ ({} vs {dim})",
            bad.len()
        )));
    }
    let tree = KdTree::new(dim, model.iter().flat_map(|f| f.values().iter().copied()).collect());
    let matches = scene
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let nn = tree.nearest(f.values(), 2, None);
            Match {
                scene: i,
                model: nn[0].index,
                distance: nn[0].dist_sq.sqrt(),
                second_distance: nn.get(1).map(|n| n.dist_sq.sqrt()),
            }
        })
        .collect();
    Ok(CorrespondenceSet {
        matches,
        labels: None,
        ground_truth_pairs: 0,
    })
}

/// Labels each match by keypoint positions: correct iff
/// `‖transform(scene_i) − model_j‖ ≤ geo_tolerance`. Also counts how many
/// scene keypoints have any model keypoint within that tolerance.
pub fn label_matches_by_position(
    mut corrs: CorrespondenceSet,
    scene_keypoints: &[Point3<f64>],
    model_keypoints: &[Point3<f64>],
    transform: &RigidTransform,
    geo_tolerance: f64,
) -> Result<CorrespondenceSet> {
    for m in &corrs.matches {
        if m.scene >= scene_keypoints.len() || m.model >= model_keypoints.len() {
            return Err(Error::InvalidParameter(format!(
                "match ({}, {}) outside keypoint lists",
                m.scene, m.model
            )));
        }
    }
    let mapped: Vec<Point3<f64>> = scene_keypoints.iter().map(|p| transform.apply(p)).collect();
    corrs.labels = Some(
        corrs
            .matches
            .iter()
            .map(|m| (mapped[m.scene] - model_keypoints[m.model]).norm() <= geo_tolerance)
            .collect(),
    );
    corrs.ground_truth_pairs = if model_keypoints.is_empty() {
        0
    } else {
        let tree = KdTree::new(3, model_keypoints.iter().flat_map(|p| [p.x, p.y, p.z]).collect());
        mapped
            .iter()
            .filter(|p| tree.nearest(p.coords.as_slice(), 1, None)[0].dist_sq.sqrt() <= geo_tolerance)
            .count()
    };
    Ok(corrs)
}

pub fn label_matches(
    corrs: CorrespondenceSet,
    pairs: &KeypointPairSet,
    geo_tolerance: f64,
) -> Result<CorrespondenceSet> {
    label_matches_by_position(
        corrs,
        &pairs.scene_keypoints,
        &pairs.model_keypoints,
        &pairs.transform,
        geo_tolerance,
    )
}

/// Statistic swept to accept or reject matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcceptanceRule {
    /// Nearest / second-nearest distance ratio, thresholds over `(0, 1]`.
    #[default]
    Nndr,
    /// Raw feature distance, thresholds over `(0, max distance]`.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpcPoint {
    pub threshold: f64,
    pub accepted: usize,
    pub precision: f64,
    pub recall: f64,
}

impl RpcPoint {
    pub fn one_minus_precision(&self) -> f64 {
        1.0 - self.precision
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcCurve {
    /// One point per threshold, in increasing threshold order.
    pub points: Vec<RpcPoint>,
    pub auc_pr: f64,
}

/// Sweeps `n_thresholds` evenly spaced acceptance thresholds.
///
/// At each threshold, precision is correct/accepted and recall is
/// correct/ground-truth pairs; an empty accepted set counts as precision 1,
/// recall 0. AUC_pr is the trapezoidal area under recall plotted against
/// 1 − precision over `[0, 1]`. The curve is padded at 1 − precision = 0 with
/// the recall of the strictest non-empty threshold and at 1 − precision = 1
/// with the recall of the loosest threshold.
pub fn rpc_curve(corrs: &CorrespondenceSet, n_thresholds: usize, rule: AcceptanceRule) -> Result<RpcCurve> {
    let labels = corrs
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("correspondences must be labeled before building an RPC".into()))?;
    if corrs.is_empty() {
        return Err(Error::DegenerateInput("no correspondences".into()));
    }
    if n_thresholds == 0 {
        return Err(Error::InvalidParameter("need at least one threshold".into()));
    }
    let stats: Vec<f64> = corrs
        .matches
        .iter()
        .map(|m| match rule {
            AcceptanceRule::Nndr => m.nndr(),
            AcceptanceRule::Distance => m.distance,
        })
        .collect();
    let top = match rule {
        AcceptanceRule::Nndr => 1.0,
        AcceptanceRule::Distance => stats.iter().copied().fold(0.0, f64::max),
    };
    let gt = corrs.ground_truth_pairs;
    let points: Vec<RpcPoint> = (1..=n_thresholds)
        .map(|k| {
            let threshold = if k == n_thresholds {
                top
            } else {
                top * k as f64 / n_thresholds as f64
            };
            let (mut accepted, mut correct) = (0usize, 0usize);
            for (s, &ok) in stats.iter().zip(labels) {
                if *s <= threshold {
                    accepted += 1;
                    correct += ok as usize;
                }
            }
            let precision = if accepted == 0 {
                1.0
            } else {
                correct as f64 / accepted as f64
            };
            let recall = if gt == 0 {
                0.0
            } else {
                (correct as f64 / gt as f64).min(1.0)
            };
            RpcPoint {
                threshold,
                accepted,
                precision,
                recall,
            }
        })
        .collect();
    let auc_pr = area_under_rpc(&points);
    Ok(RpcCurve { points, auc_pr })
}

fn area_under_rpc(points: &[RpcPoint]) -> f64 {
    let non_empty: Vec<&RpcPoint> = points.iter().filter(|p| p.accepted > 0).collect();
    let (Some(strictest), Some(loosest)) = (non_empty.first(), non_empty.last()) else {
        return 0.0;
    };
    let mut xy: Vec<(f64, f64)> = non_empty.iter().map(|p| (p.one_minus_precision(), p.recall)).collect();
    xy.push((0.0, strictest.recall));
    xy.push((1.0, loosest.recall));
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let area: f64 = xy.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    area.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PccResult {
    /// Percentage in `[0, 100]`.
    pub percentage: f64,
    pub used: usize,
    pub correct: usize,
    /// Set when fewer than `top_k` matches were available.
    pub shortfall: Option<usize>,
}

/// Percentage of correct correspondences among the `top_k` matches with the
/// smallest feature distance (ties broken by scene index).
pub fn pcc(corrs: &CorrespondenceSet, top_k: usize) -> Result<PccResult> {
    let labels = corrs
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("correspondences must be labeled before computing PCC".into()))?;
    let mut order: Vec<usize> = (0..corrs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&corrs.matches[a], &corrs.matches[b]);
        ma.distance.total_cmp(&mb.distance).then(ma.scene.cmp(&mb.scene))
    });
    let used = top_k.min(order.len());
    let correct = order[..used].iter().filter(|&&i| labels[i]).count();
    let shortfall = (used < top_k).then(|| top_k - used);
    if let Some(s) = shortfall {
        warn!("PCC over {used} matches, {s} short of top-{top_k}");
    }
    Ok(PccResult {
        percentage: if used == 0 {
            0.0
        } else {
            100.0 * correct as f64 / used as f64
        },
        used,
        correct,
        shortfall,
    })
}

/// Settings for [`evaluate_matching`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingConfig {
    pub geo_tolerance: f64,
    pub n_thresholds: usize,
    pub rule: AcceptanceRule,
    pub top_k: usize,
}

impl MatchingConfig {
    pub fn with_mr(mr: f64) -> Self {
        MatchingConfig {
            geo_tolerance: DEFAULT_GEO_TOLERANCE_MR * mr,
            n_thresholds: DEFAULT_THRESHOLDS,
            rule: AcceptanceRule::Nndr,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingReport {
    pub correspondences: CorrespondenceSet,
    pub curve: RpcCurve,
    pub pcc: PccResult,
    pub scene_described: usize,
    pub model_described: usize,
    pub scene_failed: usize,
    pub model_failed: usize,
}

/// Matches described scene keypoints against described model keypoints,
/// labels by position under `transform` (scene → model), and computes the
/// RPC and PCC. Keypoints whose description failed are excluded and counted.
pub fn evaluate_matching(
    scene: &[Described],
    model: &[Described],
    transform: &RigidTransform,
    config: &MatchingConfig,
) -> Result<MatchingReport> {
    let split = |set: &[Described]| {
        let mut kps = Vec::new();
        let mut feats = Vec::new();
        for d in set {
            if let Ok(f) = &d.feature {
                kps.push(d.keypoint);
                feats.push(f.clone());
            }
        }
        (kps, feats)
    };
    let (scene_kps, scene_feats) = split(scene);
    let (model_kps, model_feats) = split(model);
    let corrs = match_features(&scene_feats, &model_feats)?;
    let corrs = label_matches_by_position(corrs, &scene_kps, &model_kps, transform, config.geo_tolerance)?;
    let curve = rpc_curve(&corrs, config.n_thresholds, config.rule)?;
    let pcc = pcc(&corrs, config.top_k)?;
    Ok(MatchingReport {
        correspondences: corrs,
        curve,
        pcc,
        scene_described: scene_kps.len(),
        model_described: model_kps.len(),
        scene_failed: scene.len() - scene_kps.len(),
        model_failed: model.len() - model_kps.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatabilityReport {
    pub repeatability: f64,
    /// Angle errors (radians) of the evaluated pairs.
    pub errors: Vec<f64>,
    /// Pairs skipped because either side had a degenerate axis.
    pub excluded: usize,
    pub pairs: usize,
}

/// Computes `kind` at both ends of each keypoint pair, rotates the scene axis
/// into the model frame and reports the fraction of angle errors below 5°.
pub fn axis_repeatability(
    scene: &IndexedCloud,
    model: &IndexedCloud,
    pairs: &KeypointPairSet,
    kind: AxisKind,
    mr: f64,
) -> Result<RepeatabilityReport> {
    let results: Vec<Option<f64>> = (0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let s = kind.compute(scene, &pairs.scene_keypoints[i], mr).ok()?;
            let m = kind.compute(model, &pairs.model_keypoints[i], mr).ok()?;
            Some(axes::angle_error(&s.rotated_by(&pairs.transform), &m))
        })
        .collect();
    let errors: Vec<f64> = results.iter().flatten().copied().collect();
    let excluded = results.len() - errors.len();
    if excluded > 0 {
        warn!(
            "{excluded} keypoint pairs excluded with degenerate {} axes",
            kind.label()
        );
    }
    Ok(RepeatabilityReport {
        repeatability: axes::repeatability(&errors, axes::REPEATABILITY_THRESHOLD)?,
        errors,
        excluded,
        pairs: pairs.len(),
    })
}

/// Samples `n` keypoint pairs and runs [`axis_repeatability`] on them.
#[allow(clippy::too_many_arguments)]
pub fn axis_repeatability_study(
    scene: &IndexedCloud,
    model: &IndexedCloud,
    transform: &RigidTransform,
    kind: AxisKind,
    n: usize,
    seed: u64,
    mr: f64,
    pair_tolerance: f64,
) -> Result<RepeatabilityReport> {
    let pairs = sample_keypoint_pairs(scene, model, transform, n, seed, pair_tolerance)?;
    axis_repeatability(scene, model, &pairs, kind, mr)
}

impl PartialOrd for Match {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.distance
                .total_cmp(&other.distance)
                .then(self.scene.cmp(&other.scene)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axes::LraVariant;
    use crate::nuisance::{add_gaussian_noise, random_rigid_transform};
    use crate::pointcloud::{apply_transform, PointCloud};
    use crate::synthetic;
    use rand::Rng;

    fn labeled(ratios_and_labels: &[(f64, bool)]) -> CorrespondenceSet {
        CorrespondenceSet {
            matches: ratios_and_labels
                .iter()
                .enumerate()
                .map(|(i, &(r, _))| Match {
                    scene: i,
                    model: i,
                    distance: r * 2.0,
                    second_distance: Some(2.0),
                })
                .collect(),
            labels: Some(ratios_and_labels.iter().map(|&(_, l)| l).collect()),
            ground_truth_pairs: ratios_and_labels.len(),
        }
    }

    fn random_features(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<FeatureVector> {
        (0..n)
            .map(|_| FeatureVector::from_counts((0..dim).map(|_| rng.random::<f64>()).collect()).unwrap())
            .collect()
    }

    #[test]
    fn sampling_identical_clouds_has_zero_residual() {
        let cloud = IndexedCloud::new(synthetic::bumpy_sphere(2000, 10.0, 1));
        let pairs = sample_keypoint_pairs(&cloud, &cloud, &RigidTransform::identity(), 100, 4, 0.0).unwrap();
        assert_eq!(pairs.len(), 100);
        assert!(pairs.residuals().iter().all(|&r| r == 0.0));
        assert_eq!(pairs.scene_indices, pairs.model_indices);
        assert_eq!(pairs.shortfall(), None);
    }

    #[test]
    fn sampling_with_transform_matches_linear_scan() {
        let model = synthetic::bumpy_sphere(1500, 10.0, 3);
        let mr = model.resolution().unwrap();
        let t = random_rigid_transform(9, 5.0);
        let scene = add_gaussian_noise(&apply_transform(&model, &t), 0.3, mr, 2);
        let (scene, model) = (IndexedCloud::new(scene), IndexedCloud::new(model));
        let gt = t.inverse();
        let pairs = sample_keypoint_pairs(&scene, &model, &gt, 200, 5, 2.0 * mr).unwrap();
        for (k, s) in pairs.scene_keypoints.iter().enumerate() {
            let mapped = gt.apply(s);
            let brute = model
                .points()
                .iter()
                .map(|q| (q - mapped).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((pairs.residuals()[k] - brute).abs() < 1e-9);
        }
        let strict = sample_keypoint_pairs(&scene, &model, &gt, 200, 5, 0.0).unwrap();
        assert!(strict.is_empty());
        assert_eq!(strict.shortfall(), Some(200));
    }

    #[test]
    fn self_match_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let feats = random_features(30, 16, &mut rng);
        let corrs = match_features(&feats, &feats).unwrap();
        for (i, m) in corrs.matches.iter().enumerate() {
            assert_eq!((m.scene, m.model, m.distance), (i, i, 0.0));
        }
        let single = &feats[..1];
        assert!(match_features(&feats, single)
            .unwrap()
            .matches
            .iter()
            .all(|m| m.model == 0 && m.second_distance.is_none()));
        assert!(match_features(&[], &feats).is_err());
    }

    #[test]
    fn matching_equals_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scene = random_features(50, 20, &mut rng);
        let model = random_features(50, 20, &mut rng);
        let corrs = match_features(&scene, &model).unwrap();
        for (i, s) in scene.iter().enumerate() {
            let mut d: Vec<(f64, usize)> = model
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    (
                        s.values()
                            .iter()
                            .zip(m.values())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>(),
                        j,
                    )
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            assert_eq!(corrs.matches[i].model, d[0].1);
            assert_eq!(corrs.matches[i].distance, d[0].0.sqrt());
            assert_eq!(corrs.matches[i].second_distance, Some(d[1].0.sqrt()));
        }
    }

    #[test]
    fn labeling_cases() {
        let kps: Vec<Point3<f64>> = (0..5).map(|i| Point3::new(i as f64 * 10.0, 0.0, 0.0)).collect();
        let identity = RigidTransform::identity();
        let ident = CorrespondenceSet {
            matches: (0..5)
                .map(|i| Match {
                    scene: i,
                    model: i,
                    distance: 0.0,
                    second_distance: None,
                })
                .collect(),
            labels: None,
            ground_truth_pairs: 0,
        };
        let all = label_matches_by_position(ident.clone(), &kps, &kps, &identity, 0.5).unwrap();
        assert_eq!(all.correct_count(), 5);
        assert_eq!(all.ground_truth_pairs, 5);

        let mut permuted = ident.clone();
        for m in &mut permuted.matches {
            m.model = (m.scene + 1) % 5;
        }
        let none = label_matches_by_position(permuted, &kps, &kps, &identity, 0.0).unwrap();
        assert_eq!(none.correct_count(), 0);

        let mixed = CorrespondenceSet {
            matches: vec![
                Match {
                    scene: 0,
                    model: 0,
                    distance: 0.1,
                    second_distance: None,
                },
                Match {
                    scene: 1,
                    model: 2,
                    distance: 0.1,
                    second_distance: None,
                },
                Match {
                    scene: 2,
                    model: 2,
                    distance: 0.1,
                    second_distance: None,
                },
            ],
            labels: None,
            ground_truth_pairs: 0,
        };
        let shift = RigidTransform::new(nalgebra::Matrix3::identity(), nalgebra::Vector3::new(3.0, 0.0, 0.0)).unwrap();
        let out = label_matches_by_position(mixed.clone(), &kps, &kps, &shift, 4.0).unwrap();
        let expected: Vec<bool> = mixed
            .matches
            .iter()
            .map(|m| (shift.apply(&kps[m.scene]) - kps[m.model]).norm() <= 4.0)
            .collect();
        assert_eq!(out.labels.unwrap(), expected);
    }

    #[test]
    fn rpc_all_correct_and_all_wrong() {
        let right = labeled(&[(0.2, true), (0.5, true), (0.9, true)]);
        let curve = rpc_curve(&right, 100, AcceptanceRule::Nndr).unwrap();
        assert_eq!(curve.auc_pr, 1.0);
        let last = curve.points.last().unwrap();
        assert_eq!((last.one_minus_precision(), last.recall), (0.0, 1.0));

        let wrong = labeled(&[(0.2, false), (0.5, false), (0.9, false)]);
        assert_eq!(rpc_curve(&wrong, 100, AcceptanceRule::Nndr).unwrap().auc_pr, 0.0);
    }

    #[test]
    fn rpc_matches_hand_enumeration() {
        let set = labeled(&[
            (0.1, true),
            (0.2, true),
            (0.3, false),
            (0.4, true),
            (0.55, true),
            (0.6, false),
            (0.7, false),
            (0.8, true),
            (0.9, false),
            (1.0, false),
        ]);
        let curve = rpc_curve(&set, 4, AcceptanceRule::Nndr).unwrap();
        let expected = [
            (0.25, 2, 1.0, 0.2),
            (0.5, 4, 0.75, 0.3),
            (0.75, 7, 4.0 / 7.0, 0.4),
            (1.0, 10, 0.5, 0.5),
        ];
        for (p, e) in curve.points.iter().zip(expected) {
            assert_eq!(p.threshold, e.0);
            assert_eq!(p.accepted, e.1);
            assert!((p.precision - e.2).abs() < 1e-15);
            assert!((p.recall - e.3).abs() < 1e-15);
        }
        // trapezoids over (0,.2) (.25,.3) (3/7,.4) (.5,.5) padded to (1,.5)
        assert!((curve.auc_pr - 57.0 / 140.0).abs() < 1e-12);
    }

    #[test]
    fn empty_threshold_convention() {
        let set = labeled(&[(0.6, true), (0.9, false)]);
        let curve = rpc_curve(&set, 2, AcceptanceRule::Nndr).unwrap();
        assert_eq!(curve.points[0].accepted, 0);
        assert_eq!((curve.points[0].precision, curve.points[0].recall), (1.0, 0.0));
        let unlabeled = CorrespondenceSet { labels: None, ..set };
        assert!(rpc_curve(&unlabeled, 2, AcceptanceRule::Nndr).is_err());
    }

    #[test]
    fn distance_rule_sweeps_raw_distances() {
        let set = labeled(&[(0.1, true), (0.5, false), (1.0, true)]);
        let curve = rpc_curve(&set, 2, AcceptanceRule::Distance).unwrap();
        assert_eq!(curve.points[0].threshold, 1.0);
        assert_eq!(curve.points[0].accepted, 2);
        assert_eq!(curve.points[1].accepted, 3);
    }

    #[test]
    fn pcc_cases() {
        let right = labeled(&[(0.2, true), (0.5, true)]);
        let r = pcc(&right, 200).unwrap();
        assert_eq!(r.percentage, 100.0);
        assert_eq!(r.shortfall, Some(198));
        let wrong = labeled(&[(0.2, false), (0.5, false)]);
        assert_eq!(pcc(&wrong, 1).unwrap().percentage, 0.0);
        let mixed = labeled(&[(0.9, true), (0.1, false), (0.5, true), (0.3, true)]);
        let r = pcc(&mixed, 2).unwrap();
        assert_eq!((r.used, r.correct, r.percentage), (2, 1, 50.0));
    }

    #[test]
    fn repeatability_of_identical_clouds_is_one() {
        let cloud = IndexedCloud::new(synthetic::bumpy_sphere(3000, 10.0, 7));
        let mr = cloud.resolution().unwrap();
        for kind in [
            AxisKind::Lma { radius_mr: 7.0 },
            AxisKind::Lra {
                radius_mr: 10.0,
                variant: LraVariant::SdassFullRadius,
            },
        ] {
            let rep = axis_repeatability_study(&cloud, &cloud, &RigidTransform::identity(), kind, 100, 1, mr, 2.0 * mr)
                .unwrap();
            assert_eq!(rep.repeatability, 1.0);
            assert_eq!(rep.errors.len() + rep.excluded, 100);
        }
        let t = random_rigid_transform(3, 10.0 * mr);
        let moved = IndexedCloud::new(apply_transform(cloud.cloud(), &t));
        let rep = axis_repeatability_study(
            &moved,
            &cloud,
            &t.inverse(),
            AxisKind::RnNormal { radius_mr: 3.0 },
            100,
            2,
            mr,
            1e-6 * mr,
        )
        .unwrap();
        assert_eq!(rep.repeatability, 1.0);
    }

    #[test]
    fn evaluate_matching_excludes_failures() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]]).unwrap();
        let f = |v: Vec<f64>| FeatureVector::from_counts(v);
        let scene = vec![
            Described {
                keypoint: *cloud.point(0),
                feature: f(vec![1.0, 0.0]),
            },
            Described {
                keypoint: *cloud.point(1),
                feature: Err(Error::EmptyFeature),
            },
        ];
        let model = vec![
            Described {
                keypoint: *cloud.point(0),
                feature: f(vec![1.0, 0.0]),
            },
            Described {
                keypoint: *cloud.point(1),
                feature: f(vec![0.0, 1.0]),
            },
        ];
        let report = evaluate_matching(
            &scene,
            &model,
            &RigidTransform::identity(),
            &MatchingConfig::with_mr(1.0),
        )
        .unwrap();
        assert_eq!((report.scene_failed, report.model_failed), (1, 0));
        assert_eq!(report.correspondences.correct_count(), 1);
        assert_eq!(report.curve.auc_pr, 1.0);
    }
}
