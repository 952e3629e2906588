//! Spin-image baseline oriented by the keypoint LRA.
//!
//! Each support point maps to `(α, β)`: its distance from the line through
//! the keypoint along the LRA, and its signed height along the LRA. The pairs
//! are accumulated into a `bins × bins` grid over `α ∈ [0, R]`,
//! `β ∈ [−R, R]` (β rows, α columns) and normalized to unit sum.

use nalgebra::Point3;
use rayon::prelude::*;

use crate::axes::{self, Axis, LraVariant};
use crate::error::{Error, Result};
use crate::pointcloud::IndexedCloud;
use crate::sdass::{Described, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinImageParams {
    pub support_radius_mr: f64,
    pub bins: usize,
}

impl Default for SpinImageParams {
    fn default() -> Self {
        SpinImageParams {
            support_radius_mr: 20.0,
            bins: 15,
        }
    }
}

impl SpinImageParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidParameter("spin image needs at least one bin".into()));
        }
        if !(self.support_radius_mr > 0.0 && self.support_radius_mr.is_finite()) {
            return Err(Error::InvalidParameter("support radius must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.bins * self.bins
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("support_radius_mr".into(), format!("{:?}", self.support_radius_mr)),
            ("bins".into(), self.bins.to_string()),
        ]
    }
}

fn grid_bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let raw = ((value - lo) / (hi - lo) * bins as f64).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(bins - 1)
    }
}

pub fn compute_spin_image(
    cloud: &IndexedCloud,
    keypoint: &Point3<f64>,
    lra: &Axis,
    params: &SpinImageParams,
    mr: f64,
) -> Result<FeatureVector> {
    params.validate()?;
    let radius = params.support_radius_mr * mr;
    let axis = lra.direction();
    let mut grid = vec![0.0; params.feature_len()];
    for i in cloud.neighbors(keypoint, radius) {
        let d = cloud.cloud().point(i) - keypoint;
        let beta = d.dot(axis);
        let alpha = (d - axis * beta).norm();
        let row = grid_bin(beta, -radius, radius, params.bins);
        let col = grid_bin(alpha, 0.0, radius, params.bins);
        grid[row * params.bins + col] += 1.0;
    }
    FeatureVector::from_counts(grid)
}

/// Spin images for a batch, each oriented by a full-radius LRA.
pub fn describe_spin_images(
    cloud: &IndexedCloud,
    keypoints: &[Point3<f64>],
    params: &SpinImageParams,
    mr: f64,
) -> Result<Vec<Described>> {
    params.validate()?;
    let radius = params.support_radius_mr * mr;
    Ok(keypoints
        .par_iter()
        .map(|kp| Described {
            keypoint: *kp,
            feature: axes::compute_lra(cloud, kp, radius, LraVariant::SdassFullRadius)
                .and_then(|lra| compute_spin_image(cloud, kp, &lra, params, mr)),
        })
        .collect())
}
