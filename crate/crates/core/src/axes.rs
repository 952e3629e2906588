//! Local axes from neighborhood scatter: the local reference axis (LRA) at a
//! keypoint, the local minimum axis (LMA) at every support point, and the
//! small-radius normal (RN) used as a comparison baseline.
//!
//! All three share one construction: the direction is the eigenvector of the
//! smallest eigenvalue of the neighborhood scatter matrix, and the sign is
//! chosen so the axis points toward the bulk of the neighbors, i.e.
//! `v · Σ (q_i − p) ≥ 0`.

use std::fmt;
use std::ops::Neg;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::eigen;
use crate::error::{Error, Result};
use crate::pointcloud::{IndexedCloud, RigidTransform};

/// 5°, the cut-off below which an angle error counts as repeatable.
pub const REPEATABILITY_THRESHOLD: f64 = 5.0 * std::f64::consts::PI / 180.0;

pub const DEFAULT_LMA_RADIUS_MR: f64 = 7.0;
pub const DEFAULT_RN_RADIUS_MR: f64 = 3.0;
pub const DEFAULT_SUBSET_FRACTION: f64 = 1.0 / 3.0;

/// Unit-length direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis(Vector3<f64>);

impl Axis {
    /// Normalizes `v`; rejects zero or non-finite vectors.
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidParameter(
                "axis direction must be a non-zero finite vector".into(),
            ));
        }
        Ok(Axis(v / n))
    }

    pub fn x() -> Self {
        Axis(Vector3::x())
    }

    pub fn y() -> Self {
        Axis(Vector3::y())
    }

    pub fn z() -> Self {
        Axis(Vector3::z())
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, other: &Axis) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn rotated_by(&self, t: &RigidTransform) -> Axis {
        Axis(t.rotate(&self.0).normalize())
    }
}

impl Neg for Axis {
    type Output = Axis;

    fn neg(self) -> Axis {
        Axis(-self.0)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0.x, self.0.y, self.0.z)
    }
}

/// How the LRA picks the neighborhood for its direction. The sign always
/// uses every neighbor inside the support radius.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LraVariant {
    /// Direction and sign from the full support radius.
    #[default]
    SdassFullRadius,
    /// Direction from `fraction × radius`, sign from the full radius
    /// (the z-axis of Yang et al.'s frame).
    YangSubsetRadius { fraction: f64 },
}

impl LraVariant {
    pub fn yang() -> Self {
        LraVariant::YangSubsetRadius {
            fraction: DEFAULT_SUBSET_FRACTION,
        }
    }

    fn direction_radius(&self, radius: f64) -> f64 {
        match self {
            LraVariant::SdassFullRadius => radius,
            LraVariant::YangSubsetRadius { fraction } => radius * fraction,
        }
    }
}

/// Unnormalized scatter `Σ (q_i − q̄)(q_i − q̄)ᵀ`.
pub fn covariance_matrix(points: &[Point3<f64>]) -> Result<Matrix3<f64>> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "covariance needs at least 3 points, got {}",
            points.len()
        )));
    }
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / points.len() as f64;
    Ok(points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - centroid;
        acc + d * d.transpose()
    }))
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric matrix.
/// The sign is not meaningful; see [`disambiguate_sign`].
pub fn min_eigvec(m: &Matrix3<f64>) -> Axis {
    Axis(eigen::min_eigenvector(m))
}

/// Flips `v` unless it already satisfies `v · Σ (q_i − p) ≥ 0`.
pub fn disambiguate_sign(v: Axis, p: &Point3<f64>, neighbors: &[Point3<f64>]) -> Axis {
    let sum = neighbors.iter().fold(Vector3::zeros(), |acc, q| acc + (q - p));
    if v.0.dot(&sum) >= 0.0 {
        v
    } else {
        -v
    }
}

fn gather(cloud: &IndexedCloud, indices: &[usize]) -> Vec<Point3<f64>> {
    indices.iter().map(|&i| *cloud.cloud().point(i)).collect()
}

fn scatter_axis(cloud: &IndexedCloud, p: &Point3<f64>, direction_radius: f64, sign_radius: f64) -> Result<Axis> {
    let dir_idx = cloud.neighbors(p, direction_radius);
    if dir_idx.len() < 3 {
        return Err(Error::DegenerateKeypoint(format!(
            "{} neighbors within {direction_radius}, need 3",
            dir_idx.len()
        )));
    }
    let dir_pts = gather(cloud, &dir_idx);
    let cov = covariance_matrix(&dir_pts)?;
    if cov.trace() <= 0.0 {
        return Err(Error::DegenerateKeypoint("neighborhood has zero scatter".into()));
    }
    let v = min_eigvec(&cov);
    if sign_radius == direction_radius {
        Ok(disambiguate_sign(v, p, &dir_pts))
    } else {
        let sign_pts = gather(cloud, &cloud.neighbors(p, sign_radius));
        Ok(disambiguate_sign(v, p, &sign_pts))
    }
}

/// Local reference axis at `p` with support radius `radius` (absolute units).
pub fn compute_lra(cloud: &IndexedCloud, p: &Point3<f64>, radius: f64, variant: LraVariant) -> Result<Axis> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "support radius must be positive, got {radius}"
        )));
    }
    if let LraVariant::YangSubsetRadius { fraction } = variant {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subset fraction must lie in (0, 1], got {fraction}"
            )));
        }
    }
    scatter_axis(cloud, p, variant.direction_radius(radius), radius)
}

/// Local minimum axis: the full-radius construction at `radius_mr × mr`.
pub fn compute_lma(cloud: &IndexedCloud, p: &Point3<f64>, mr: f64, radius_mr: f64) -> Result<Axis> {
    compute_lra(cloud, p, radius_mr * mr, LraVariant::SdassFullRadius)
}

/// Radius-neighbor normal; same construction as the LMA with a small radius.
pub fn compute_rn_normal(cloud: &IndexedCloud, p: &Point3<f64>, mr: f64, radius_mr: f64) -> Result<Axis> {
    compute_lma(cloud, p, mr, radius_mr)
}

/// Angle between two axes in `[0, π]`.
pub fn angle_error(v1: &Axis, v2: &Axis) -> f64 {
    v1.0.cross(&v2.0).norm().atan2(v1.dot(v2))
}

/// Fraction of `errors` strictly below `threshold`.
pub fn repeatability(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::DegenerateInput("repeatability of an empty error list".into()));
    }
    Ok(errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64)
}

/// A local axis construction with its radius in mr units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind {
    Lra { radius_mr: f64, variant: LraVariant },
    Lma { radius_mr: f64 },
    RnNormal { radius_mr: f64 },
}

impl AxisKind {
    pub fn compute(&self, cloud: &IndexedCloud, p: &Point3<f64>, mr: f64) -> Result<Axis> {
        match *self {
            AxisKind::Lra { radius_mr, variant } => compute_lra(cloud, p, radius_mr * mr, variant),
            AxisKind::Lma { radius_mr } => compute_lma(cloud, p, mr, radius_mr),
            AxisKind::RnNormal { radius_mr } => compute_rn_normal(cloud, p, mr, radius_mr),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AxisKind::Lra {
                variant: LraVariant::SdassFullRadius,
                ..
            } => "lra-sdass",
            AxisKind::Lra { .. } => "lra-yang",
            AxisKind::Lma { .. } => "lma",
            AxisKind::RnNormal { .. } => "rn",
        }
    }
}
