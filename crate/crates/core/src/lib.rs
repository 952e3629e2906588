//! SDASS: a local surface descriptor built from deviation angles between a
//! keypoint's local reference axis (LRA) and the local minimum axes (LMA) of
//! its neighbors, histogrammed over a height × projected-radius subdivision
//! of the support sphere.
//!
//! Besides the descriptor the crate carries what is needed to evaluate it:
//! nuisance generation (noise, decimation, rigid motion), axis repeatability
//! studies, feature matching with RPC / AUC_pr / PCC, a spin-image baseline,
//! RANSAC registration, PLY and feature-file I/O, and a command line with
//! replayable run manifests.
//!
//! All lengths handed to the descriptor and evaluation code are expressed in
//! multiples of the mesh resolution `mr` (mean nearest-neighbor spacing).
//!
//! ```
//! use sdass::{synthetic, IndexedCloud, SdassParams, compute_sdass};
//!
//! let cloud = synthetic::bumpy_sphere(4000, 10.0, 1);
//! let mr = cloud.resolution().unwrap();
//! let cloud = IndexedCloud::new(cloud);
//! let params = SdassParams { support_radius_mr: 8.0, ..SdassParams::default() };
//! let f = compute_sdass(&cloud, &cloud.cloud().point(0).clone(), &params, mr).unwrap();
//! assert_eq!(f.len(), 345);
//! assert!((f.sum() - 1.0).abs() < 1e-9);
//! ```

pub mod axes;
pub mod baselines;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod featfile;
pub mod io;
pub mod kdtree;
pub mod manifest;
pub mod nuisance;
pub mod ply;
pub mod pointcloud;
pub mod register;
pub mod sdass;
pub mod synthetic;

pub use axes::{compute_lma, compute_lra, compute_rn_normal, Axis, AxisKind, LraVariant};
pub use baselines::{compute_spin_image, describe_spin_images, SpinImageParams};
pub use error::{Error, Result};
pub use eval::{
    evaluate_matching, label_matches, match_features, pcc, rpc_curve, sample_keypoint_pairs, CorrespondenceSet,
    KeypointPairSet, RpcCurve,
};
pub use featfile::{DescriptorKind, FeatureSet};
pub use nuisance::NuisanceSpec;
pub use pointcloud::{IndexedCloud, PointCloud, RigidTransform, TriangleMesh};
pub use register::{estimate_rigid, ransac_register, RansacParams, RegistrationResult};
pub use sdass::{compute_sdass, describe_keypoints, FeatureVector, SdassDescriber, SdassParams};
