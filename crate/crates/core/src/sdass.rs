//! The SDASS descriptor.
//!
//! The support sphere around a keypoint is expressed in a frame whose +z axis
//! is the keypoint's LRA. Its circumscribing cylinder is cut into `n_lh`
//! slabs along the axis and `n_pr` annuli in the projected radial
//! direction. Each cell holds an `n_ld`-bin histogram of the angles between
//! the keypoint LRA and the LMAs of the support points falling in the cell.
//! Cells lying entirely outside the sphere are dropped and the concatenated
//! histogram is normalized to unit sum.
//!
//! Flattening order: height slab (outermost), then radial annulus, then
//! angle bin. Cell and bin indices in this module are 1-based.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;

use crate::axes::{self, Axis, LraVariant, DEFAULT_LMA_RADIUS_MR};
use crate::error::{Error, Result};
use crate::pointcloud::{IndexedCloud, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdassParams {
    pub support_radius_mr: f64,
    /// Slabs along the LRA.
    pub n_lh: usize,
    /// Annuli in the projected radial direction.
    pub n_pr: usize,
    /// Deviation-angle bins over `[0, π]`.
    pub n_ld: usize,
    pub lma_radius_mr: f64,
    pub lra_variant: LraVariant,
}

impl Default for SdassParams {
    fn default() -> Self {
        SdassParams {
            support_radius_mr: 20.0,
            n_lh: 5,
            n_pr: 5,
            n_ld: 15,
            lma_radius_mr: DEFAULT_LMA_RADIUS_MR,
            lra_variant: LraVariant::SdassFullRadius,
        }
    }
}

impl SdassParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_lh == 0 || self.n_pr == 0 || self.n_ld == 0 {
            return Err(Error::InvalidParameter("SDASS bin counts must be at least 1".into()));
        }
        if !(self.support_radius_mr > 0.0 && self.support_radius_mr.is_finite()) {
            return Err(Error::InvalidParameter("support radius must be positive".into()));
        }
        if !(self.lma_radius_mr > 0.0 && self.lma_radius_mr.is_finite()) {
            return Err(Error::InvalidParameter("LMA radius must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        redundant_bin_mask(self.n_lh, self.n_pr, self.n_ld).feature_len()
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let lra = match self.lra_variant {
            LraVariant::SdassFullRadius => "sdass".to_string(),
            LraVariant::YangSubsetRadius { fraction } => format!("yang:{fraction:?}"),
        };
        vec![
            ("support_radius_mr".into(), format!("{:?}", self.support_radius_mr)),
            ("n_lh".into(), self.n_lh.to_string()),
            ("n_pr".into(), self.n_pr.to_string()),
            ("n_ld".into(), self.n_ld.to_string()),
            ("lma_radius_mr".into(), format!("{:?}", self.lma_radius_mr)),
            ("lra".into(), lra),
        ]
    }
}

/// A normalized, non-negative histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Normalizes raw counts to unit sum. All-zero counts are an
    /// [`Error::EmptyFeature`].
    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::EmptyFeature);
        }
        Ok(FeatureVector {
            values: counts.into_iter().map(|c| c / total).collect(),
        })
    }

    /// Wraps stored values as-is (e.g. read back from a feature file).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "feature entries must be finite and non-negative".into(),
            ));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l2_distance(&self, other: &FeatureVector) -> f64 {
        crate::kdtree::squared_distance(&self.values, &other.values).sqrt()
    }
}

/// Rigid map sending the keypoint to the origin and its LRA to +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrameTransform {
    origin: Point3<f64>,
    /// Rows are the local x, y, z axes in world coordinates.
    basis: Matrix3<f64>,
}

impl LocalFrameTransform {
    pub fn new(keypoint: &Point3<f64>, lra: &Axis) -> Self {
        let z = *lra.direction();
        // seed the in-plane axis with the world axis least aligned with z
        let helper = match z.iamin() {
            0 => Vector3::x(),
            1 => Vector3::y(),
            _ => Vector3::z(),
        };
        let x = (helper - z * helper.dot(&z)).normalize();
        let y = z.cross(&x);
        LocalFrameTransform {
            origin: *keypoint,
            basis: Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]),
        }
    }

    pub fn to_local(&self, q: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.basis * (q - self.origin))
    }

    pub fn as_rigid(&self) -> RigidTransform {
        RigidTransform::new(self.basis, -(self.basis * self.origin.coords)).expect("local basis is orthonormal")
    }
}

/// Expresses `points` in the keypoint's local frame.
pub fn transform_to_local(points: &[Point3<f64>], p: &Point3<f64>, lra: &Axis) -> Vec<Point3<f64>> {
    let frame = LocalFrameTransform::new(p, lra);
    points.iter().map(|q| frame.to_local(q)).collect()
}

/// `(I_lh, I_pr)`, both 1-based. An index that evaluates to 0 (exactly on
/// the lower boundary) is clamped to 1; anything past the last cell is
/// clamped to the last cell.
pub fn bin_indices(local: &Point3<f64>, radius: f64, n_lh: usize, n_pr: usize) -> (usize, usize) {
    let i_lh = ((radius + local.z) * n_lh as f64 / (2.0 * radius)).ceil();
    let rho = (local.x * local.x + local.y * local.y).sqrt();
    let i_pr = (rho * n_pr as f64 / radius).ceil();
    (clamp_index(i_lh, n_lh), clamp_index(i_pr, n_pr))
}

fn clamp_index(raw: f64, n: usize) -> usize {
    if raw <= 1.0 {
        1
    } else if raw >= n as f64 {
        n
    } else {
        raw as usize
    }
}

/// Angle between the keypoint LRA and a neighbor's LMA, in `[0, π]`.
pub fn deviation_angle(lra: &Axis, lma: &Axis) -> f64 {
    axes::angle_error(lra, lma)
}

/// 1-based angle bin for `angle` in `[0, π]`; `π` falls in the last bin.
pub fn angle_bin(angle: f64, n_ld: usize) -> usize {
    clamp_index((angle * n_ld as f64 / PI).ceil(), n_ld)
}

/// Which subdivision cells of the cylinder lie wholly outside the sphere.
///
/// A cell is redundant when even its point nearest the center satisfies
/// `h² + ρ² ≥ R²`. The test is scale-free, so it is evaluated in exact
/// integer arithmetic from the counts alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundantMask {
    n_lh: usize,
    n_pr: usize,
    n_ld: usize,
    redundant: Vec<bool>,
    /// Full flat index → compact index, `None` for dropped bins.
    slots: Vec<Option<usize>>,
    feature_len: usize,
}

impl RedundantMask {
    pub fn is_redundant(&self, i_lh: usize, i_pr: usize) -> bool {
        self.redundant[(i_lh - 1) * self.n_pr + (i_pr - 1)]
    }

    pub fn redundant_cells(&self) -> Vec<(usize, usize)> {
        (1..=self.n_lh)
            .flat_map(|h| (1..=self.n_pr).map(move |r| (h, r)))
            .filter(|&(h, r)| self.is_redundant(h, r))
            .collect()
    }

    /// Number of dropped histogram entries.
    pub fn redundant_bins(&self) -> usize {
        self.full_len() - self.feature_len
    }

    pub fn full_len(&self) -> usize {
        self.n_lh * self.n_pr * self.n_ld
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    /// Flat index into the full (unmasked) histogram.
    pub fn full_index(&self, i_lh: usize, i_pr: usize, i_ld: usize) -> usize {
        ((i_lh - 1) * self.n_pr + (i_pr - 1)) * self.n_ld + (i_ld - 1)
    }

    /// Index into the compact feature, `None` for a redundant cell.
    pub fn compact_index(&self, i_lh: usize, i_pr: usize, i_ld: usize) -> Option<usize> {
        self.slots[self.full_index(i_lh, i_pr, i_ld)]
    }

    /// Drops the masked entries of a full-length histogram.
    pub fn compact(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.full_len());
        full.iter()
            .zip(&self.slots)
            .filter(|(_, s)| s.is_some())
            .map(|(v, _)| *v)
            .collect()
    }
}

pub fn redundant_bin_mask(n_lh: usize, n_pr: usize, n_ld: usize) -> RedundantMask {
    let mut redundant = Vec::with_capacity(n_lh * n_pr);
    let (nl, np) = (n_lh as i64, n_pr as i64);
    for i_lh in 1..=nl {
        // slab edges in units of R / n_lh
        let (lo, hi) = (-nl + 2 * (i_lh - 1), -nl + 2 * i_lh);
        let min_h = if lo <= 0 && hi >= 0 { 0 } else { lo.abs().min(hi.abs()) };
        for i_pr in 1..=np {
            let min_r = i_pr - 1;
            let lhs = (min_h * np).pow(2) + (min_r * nl).pow(2);
            redundant.push(lhs >= (nl * np).pow(2));
        }
    }
    let mut slots = Vec::with_capacity(n_lh * n_pr * n_ld);
    let mut next = 0;
    for &r in &redundant {
        for _ in 0..n_ld {
            if r {
                slots.push(None);
            } else {
                slots.push(Some(next));
                next += 1;
            }
        }
    }
    RedundantMask {
        n_lh,
        n_pr,
        n_ld,
        redundant,
        slots,
        feature_len: next,
    }
}

/// Per-point LMAs of one cloud at one radius, computed on first request.
/// Safe to share across threads; every slot is written at most once.
#[derive(Debug)]
pub struct LmaCache {
    mr: f64,
    radius_mr: f64,
    slots: Vec<OnceLock<Option<Axis>>>,
}

impl LmaCache {
    pub fn new(point_count: usize, mr: f64, radius_mr: f64) -> Self {
        LmaCache {
            mr,
            radius_mr,
            slots: (0..point_count).map(|_| OnceLock::new()).collect(),
        }
    }

    /// LMA at cloud point `index`; `None` when its neighborhood is degenerate.
    pub fn get(&self, cloud: &IndexedCloud, index: usize) -> Option<Axis> {
        *self.slots[index]
            .get_or_init(|| axes::compute_lma(cloud, cloud.cloud().point(index), self.mr, self.radius_mr).ok())
    }

    pub fn computed(&self) -> usize {
        self.slots.iter().filter(|s| s.get().is_some()).count()
    }
}

/// Bookkeeping from one descriptor evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SupportStats {
    pub support_points: usize,
    pub accumulated: usize,
    /// Support points skipped because their own LMA was degenerate.
    pub degenerate_lma: usize,
    /// Points landing in a redundant cell through rounding at the sphere surface.
    pub outside_sphere: usize,
}

/// Reusable SDASS evaluator over one cloud; shares an LMA cache across
/// keypoints.
#[derive(Debug)]
pub struct SdassDescriber<'a> {
    cloud: &'a IndexedCloud,
    params: SdassParams,
    mr: f64,
    mask: RedundantMask,
    lma: LmaCache,
}

impl<'a> SdassDescriber<'a> {
    pub fn new(cloud: &'a IndexedCloud, params: SdassParams, mr: f64) -> Result<Self> {
        params.validate()?;
        if !(mr > 0.0 && mr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mesh resolution must be positive, got {mr}"
            )));
        }
        Ok(SdassDescriber {
            cloud,
            params,
            mr,
            mask: redundant_bin_mask(params.n_lh, params.n_pr, params.n_ld),
            lma: LmaCache::new(cloud.cloud().len(), mr, params.lma_radius_mr),
        })
    }

    pub fn params(&self) -> &SdassParams {
        &self.params
    }

    pub fn mask(&self) -> &RedundantMask {
        &self.mask
    }

    pub fn describe(&self, keypoint: &Point3<f64>) -> Result<FeatureVector> {
        self.describe_with_stats(keypoint).map(|(f, _)| f)
    }

    pub fn describe_with_stats(&self, keypoint: &Point3<f64>) -> Result<(FeatureVector, SupportStats)> {
        let p = &self.params;
        let radius = p.support_radius_mr * self.mr;
        let lra = axes::compute_lra(self.cloud, keypoint, radius, p.lra_variant)?;
        let frame = LocalFrameTransform::new(keypoint, &lra);
        let support = self.cloud.neighbors(keypoint, radius);

        let mut hist = vec![0.0; self.mask.feature_len()];
        let mut stats = SupportStats {
            support_points: support.len(),
            ..SupportStats::default()
        };
        for &k in &support {
            let Some(lma) = self.lma.get(self.cloud, k) else {
                stats.degenerate_lma += 1;
                continue;
            };
            let local = frame.to_local(self.cloud.cloud().point(k));
            let (i_lh, i_pr) = bin_indices(&local, radius, p.n_lh, p.n_pr);
            let i_ld = angle_bin(deviation_angle(&lra, &lma), p.n_ld);
            match self.mask.compact_index(i_lh, i_pr, i_ld) {
                Some(slot) => {
                    hist[slot] += 1.0;
                    stats.accumulated += 1;
                }
                None => stats.outside_sphere += 1,
            }
        }
        Ok((FeatureVector::from_counts(hist)?, stats))
    }
}

/// SDASS feature at one keypoint.
pub fn compute_sdass(
    cloud: &IndexedCloud,
    keypoint: &Point3<f64>,
    params: &SdassParams,
    mr: f64,
) -> Result<FeatureVector> {
    SdassDescriber::new(cloud, *params, mr)?.describe(keypoint)
}

/// Outcome for one keypoint of a batch.
#[derive(Debug)]
pub struct Described {
    pub keypoint: Point3<f64>,
    pub feature: Result<FeatureVector>,
}

/// Describes every keypoint in parallel. Output order follows `keypoints`;
/// per-keypoint failures are recorded in place.
pub fn describe_keypoints(
    cloud: &IndexedCloud,
    keypoints: &[Point3<f64>],
    params: &SdassParams,
    mr: f64,
) -> Result<Vec<Described>> {
    let describer = SdassDescriber::new(cloud, *params, mr)?;
    Ok(keypoints
        .par_iter()
        .map(|kp| Described {
            keypoint: *kp,
            feature: describer.describe(kp),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::random_rigid_transform;
    use crate::pointcloud::{apply_transform, PointCloud};
    use crate::synthetic;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_feature_length() {
        let mask = redundant_bin_mask(5, 5, 15);
        assert_eq!(mask.redundant_bins(), 30);
        assert_eq!(mask.feature_len(), 345);
        assert_eq!(mask.redundant_cells(), vec![(1, 5), (5, 5)]);
        assert_eq!(SdassParams::default().feature_len(), 345);
        assert_eq!(redundant_bin_mask(1, 1, 15).redundant_bins(), 0);
    }

    #[test]
    fn mask_agrees_with_cell_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n_lh, n_pr) in [(5, 5), (3, 4), (6, 2), (7, 7), (2, 9)] {
            let mask = redundant_bin_mask(n_lh, n_pr, 3);
            let r = 1.0;
            for i_lh in 1..=n_lh {
                for i_pr in 1..=n_pr {
                    let h0 = -r + (i_lh - 1) as f64 * 2.0 * r / n_lh as f64;
                    let r0 = (i_pr - 1) as f64 * r / n_pr as f64;
                    let inside = (0..10_000).any(|_| {
                        let h = h0 + rng.random::<f64>() * 2.0 * r / n_lh as f64;
                        let rho = r0 + rng.random::<f64>() * r / n_pr as f64;
                        h * h + rho * rho < r * r
                    });
                    assert_eq!(
                        mask.is_redundant(i_lh, i_pr),
                        !inside,
                        "cell ({i_lh},{i_pr}) of {n_lh}x{n_pr}"
                    );
                }
            }
        }
    }

    #[test]
    fn bin_index_examples() {
        assert_eq!(bin_indices(&Point3::new(0.0, 0.0, 0.0), 20.0, 5, 5), (3, 1));
        assert_eq!(bin_indices(&Point3::new(0.0, 0.0, -20.0), 20.0, 5, 5), (1, 1));
        assert_eq!(bin_indices(&Point3::new(20.0, 0.0, 20.0), 20.0, 5, 5), (5, 5));
        assert_eq!(bin_indices(&Point3::new(0.0, 12.0, 20.0 + 1e-12), 20.0, 5, 5), (5, 3));
    }

    #[test]
    fn deviation_angles_and_bins() {
        assert_eq!(deviation_angle(&Axis::z(), &Axis::z()), 0.0);
        assert_eq!(deviation_angle(&Axis::z(), &-Axis::z()), PI);
        assert!((deviation_angle(&Axis::z(), &Axis::x()) - PI / 2.0).abs() < 1e-15);
        assert_eq!(angle_bin(0.0, 15), 1);
        assert_eq!(angle_bin(PI, 15), 15);
        assert_eq!(angle_bin(PI / 15.0 + 1e-9, 15), 2);
    }

    #[test]
    fn local_frame_examples() {
        let pts = vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-4.0, 0.5, -1.0)];
        let out = transform_to_local(&pts, &Point3::origin(), &Axis::z());
        for (q, l) in pts.iter().zip(&out) {
            assert_eq!(l.z, q.z);
            assert!(((l.x * l.x + l.y * l.y) - (q.x * q.x + q.y * q.y)).abs() < 1e-12);
        }
        let p = Point3::new(3.0, -1.0, 2.0);
        let lra = Axis::new(Vector3::new(1.0, 2.0, -0.5)).unwrap();
        assert_eq!(transform_to_local(&[p], &p, &lra)[0], Point3::origin());
        let frame = LocalFrameTransform::new(&p, &lra).as_rigid();
        assert!((frame.rotate(lra.direction()) - Vector3::z()).norm() < 1e-9);
    }

    #[test]
    fn local_coordinates_match_direct_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = Point3::new(rng.random(), rng.random(), rng.random());
            let lra = Axis::new(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ))
            .unwrap();
            let pts: Vec<Point3<f64>> = (0..50)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect();
            for (q, l) in pts.iter().zip(transform_to_local(&pts, &p, &lra)) {
                let d = q - p;
                let height = d.dot(lra.direction());
                let radial = (d - lra.direction() * height).norm();
                assert!((l.z - height).abs() < 1e-9);
                assert!(((l.x * l.x + l.y * l.y).sqrt() - radial).abs() < 1e-9);
                assert!((l.coords.norm() - d.norm()).abs() < 1e-9);
            }
        }
    }

    fn test_surface() -> (IndexedCloud, f64) {
        let cloud = synthetic::bumpy_sphere(4000, 10.0, 21);
        let mr = cloud.resolution().unwrap();
        (IndexedCloud::new(cloud), mr)
    }

    fn small_params() -> SdassParams {
        SdassParams {
            support_radius_mr: 8.0,
            lma_radius_mr: 4.0,
            ..SdassParams::default()
        }
    }

    #[test]
    fn default_feature_is_normalized() {
        let (cloud, mr) = test_surface();
        let f = compute_sdass(&cloud, cloud.cloud().point(0), &SdassParams::default(), mr).unwrap();
        assert_eq!(f.len(), 345);
        assert!((f.sum() - 1.0).abs() < 1e-9);
        assert!(f.values().iter().all(|&v| v >= 0.0));
    }

    /// Independent evaluation: linear scans, no spatial index, no cache,
    /// full-length histogram, local coordinates from dot products.
    fn naive_sdass(points: &[Point3<f64>], kp: &Point3<f64>, params: &SdassParams, mr: f64) -> Vec<f64> {
        let radius = params.support_radius_mr * mr;
        let within = |c: &Point3<f64>, r: f64| -> Vec<Point3<f64>> {
            points
                .iter()
                .filter(|q| (*q - c).norm_squared() <= r * r)
                .copied()
                .collect()
        };
        let axis_at = |c: &Point3<f64>, r: f64| -> Option<Vector3<f64>> {
            let nb = within(c, r);
            if nb.len() < 3 {
                return None;
            }
            let cov = axes::covariance_matrix(&nb).ok()?;
            let v = *axes::min_eigvec(&cov).direction();
            let s: Vector3<f64> = nb.iter().map(|q| q - c).sum();
            Some(if v.dot(&s) >= 0.0 { v } else { -v })
        };
        let lra = axis_at(kp, radius).unwrap();
        let (nl, np, nd) = (params.n_lh, params.n_pr, params.n_ld);
        let mut full = vec![0.0; nl * np * nd];
        for q in within(kp, radius) {
            let Some(lma) = axis_at(&q, params.lma_radius_mr * mr) else {
                continue;
            };
            let d = q - kp;
            let h = d.dot(&lra);
            let rho = (d - lra * h).norm();
            let ih = (((radius + h) * nl as f64 / (2.0 * radius)).ceil() as usize).clamp(1, nl);
            let ir = ((rho * np as f64 / radius).ceil() as usize).clamp(1, np);
            let ang = lra.dot(&lma).clamp(-1.0, 1.0).acos();
            let ia = ((ang * nd as f64 / PI).ceil() as usize).clamp(1, nd);
            full[((ih - 1) * np + ir - 1) * nd + ia - 1] += 1.0;
        }
        let mask = redundant_bin_mask(nl, np, nd);
        for cell in mask.redundant_cells() {
            for a in 1..=nd {
                assert_eq!(full[mask.full_index(cell.0, cell.1, a)], 0.0);
            }
        }
        let kept = mask.compact(&full);
        let total: f64 = kept.iter().sum();
        kept.into_iter().map(|v| v / total).collect()
    }

    #[test]
    fn matches_naive_pipeline() {
        let cloud = synthetic::bumpy_sphere(500, 10.0, 2);
        let mr = cloud.resolution().unwrap();
        let indexed = IndexedCloud::new(cloud.clone());
        let params = small_params();
        for k in [0, 77, 250, 499] {
            let kp = cloud.point(k);
            let fast = compute_sdass(&indexed, kp, &params, mr).unwrap();
            let naive = naive_sdass(cloud.points(), kp, &params, mr);
            assert_eq!(fast.len(), naive.len());
            for (a, b) in fast.values().iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rigid_invariance() {
        let (cloud, mr) = test_surface();
        let t = random_rigid_transform(3, 50.0);
        let moved = IndexedCloud::new(apply_transform(cloud.cloud(), &t));
        let params = small_params();
        for k in (0..4000).step_by(400) {
            let p = cloud.cloud().point(k);
            let a = compute_sdass(&cloud, p, &params, mr).unwrap();
            let b = compute_sdass(&moved, &t.apply(p), &params, mr).unwrap();
            assert!(a.l2_distance(&b) <= 1e-6);
        }
    }

    #[test]
    fn duplicated_points_leave_feature_unchanged() {
        let (cloud, mr) = test_surface();
        let mut doubled = cloud.points().to_vec();
        doubled.extend_from_slice(cloud.points());
        let doubled = IndexedCloud::new(PointCloud::new(doubled).unwrap());
        let params = small_params();
        for k in [5, 1234, 3999] {
            let p = cloud.cloud().point(k);
            let a = compute_sdass(&cloud, p, &params, mr).unwrap();
            let b = compute_sdass(&doubled, p, &params, mr).unwrap();
            assert!(a.l2_distance(&b) <= 1e-9);
        }
    }

    #[test]
    fn batch_matches_single_calls_and_is_deterministic() {
        let (cloud, mr) = test_surface();
        let params = small_params();
        let kps: Vec<Point3<f64>> = (0..4000).step_by(173).map(|i| *cloud.cloud().point(i)).collect();
        let batch = describe_keypoints(&cloud, &kps, &params, mr).unwrap();
        let again = describe_keypoints(&cloud, &kps, &params, mr).unwrap();
        assert_eq!(batch.len(), kps.len());
        for ((b, a), kp) in batch.iter().zip(&again).zip(&kps) {
            assert_eq!(b.keypoint, *kp);
            let single = compute_sdass(&cloud, kp, &params, mr).unwrap();
            assert_eq!(b.feature.as_ref().unwrap(), &single);
            assert_eq!(a.feature.as_ref().unwrap(), &single);
        }
        let one = describe_keypoints(&cloud, &kps[..1], &params, mr).unwrap();
        assert_eq!(one[0].feature.as_ref().unwrap(), batch[0].feature.as_ref().unwrap());
    }

    #[test]
    fn failures_are_recorded_per_keypoint() {
        let (cloud, mr) = test_surface();
        let far = Point3::new(1e6, 0.0, 0.0);
        let out = describe_keypoints(&cloud, &[far, *cloud.cloud().point(0)], &small_params(), mr).unwrap();
        assert!(matches!(out[0].feature, Err(Error::DegenerateKeypoint(_))));
        assert!(out[1].feature.is_ok());
        assert!(SdassDescriber::new(
            &cloud,
            SdassParams {
                n_ld: 0,
                ..SdassParams::default()
            },
            mr
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Spinning the local frame about the LRA only changes azimuth, which
        /// the binning ignores.
        #[test]
        fn azimuth_independence(spin in 0.0f64..(2.0 * PI), k in 0usize..4000) {
            let (cloud, mr) = test_surface();
            let params = small_params();
            let radius = params.support_radius_mr * mr;
            let kp = cloud.cloud().point(k);
            let lra = axes::compute_lra(&cloud, kp, radius, params.lra_variant).unwrap();
            let frame = LocalFrameTransform::new(kp, &lra);
            let (s, c) = spin.sin_cos();
            for i in cloud.neighbors(kp, radius) {
                let l = frame.to_local(cloud.cloud().point(i));
                let turned = Point3::new(c * l.x - s * l.y, s * l.x + c * l.y, l.z);
                let a = bin_indices(&l, radius, params.n_lh, params.n_pr);
                let b = bin_indices(&turned, radius, params.n_lh, params.n_pr);
                // rotation keeps rho to ~1e-15; only exact boundary hits could differ
                let rho = (l.x * l.x + l.y * l.y).sqrt() * params.n_pr as f64 / radius;
                if (rho - rho.round()).abs() > 1e-9 {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
