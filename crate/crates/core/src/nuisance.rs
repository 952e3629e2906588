//! Seeded nuisances: Gaussian noise, random point decimation and random
//! rigid motions. Every function is a pure function of its inputs and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pointcloud::{apply_transform, PointCloud, RigidTransform};

pub const DEFAULT_TRANSLATION_EXTENT_MR: f64 = 10.0;

/// Adds independent `N(0, (sigma_mr·mr)²)` noise to every coordinate.
pub fn add_gaussian_noise(cloud: &PointCloud, sigma_mr: f64, mr: f64, seed: u64) -> PointCloud {
    let sigma = sigma_mr * mr;
    if sigma == 0.0 {
        return cloud.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("noise sigma must be finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            let d = Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            Point3::from(p.coords + d)
        })
        .collect();
    PointCloud::new(points).expect("noisy cloud stays finite")
}

/// Keeps a uniformly random subset of `floor(rate·n)` points in their
/// original order.
pub fn decimate(cloud: &PointCloud, rate: f64, seed: u64) -> Result<PointCloud> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decimation rate must lie in (0, 1], got {rate}"
        )));
    }
    if rate == 1.0 {
        return Ok(cloud.clone());
    }
    let n = cloud.len();
    // tolerate representation error in rates such as 0.3
    let keep = (rate * n as f64 + 1e-9).floor() as usize;
    if keep == 0 {
        return Err(Error::DegenerateOutput(format!(
            "decimating {n} points at rate {rate} leaves none"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    indices.sort_unstable();
    cloud.select(&indices)
}

/// Uniformly random rotation (Shoemake's quaternion construction) with a
/// translation uniform in `[-extent, extent]³`.
pub fn random_rigid_transform(seed: u64, translation_extent: f64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        b * (2.0 * PI * u3).cos(),
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
    );
    let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    let mut t = || {
        if translation_extent > 0.0 {
            rng.random_range(-translation_extent..=translation_extent)
        } else {
            0.0
        }
    };
    let translation = Vector3::new(t(), t(), t());
    RigidTransform::new(rotation, translation).expect("unit quaternion yields a proper rotation")
}

/// Parses a decimation rate written as a decimal (`0.25`) or a fraction (`1/4`).
pub fn parse_rate(text: &str) -> Result<f64> {
    let bad = || Error::InvalidParameter(format!("bad decimation rate {text:?}"));
    let rate = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if rate > 0.0 && rate <= 1.0 {
        Ok(rate)
    } else {
        Err(bad())
    }
}

/// A replayable perturbation: rigid motion, then decimation, then noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSpec {
    pub noise_sigma_mr: f64,
    pub decimation_rate: f64,
    /// `None` leaves the cloud in place.
    pub transform_seed: Option<u64>,
    pub noise_seed: u64,
    pub decimation_seed: u64,
    pub translation_extent_mr: f64,
}

impl Default for NuisanceSpec {
    fn default() -> Self {
        NuisanceSpec {
            noise_sigma_mr: 0.0,
            decimation_rate: 1.0,
            transform_seed: None,
            noise_seed: 0,
            decimation_seed: 0,
            translation_extent_mr: DEFAULT_TRANSLATION_EXTENT_MR,
        }
    }
}

/// Output of [`NuisanceSpec::apply`].
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub cloud: PointCloud,
    /// The motion applied to the input.
    pub applied: RigidTransform,
}

impl Perturbed {
    /// Maps the perturbed cloud back onto the input (scene → model).
    pub fn ground_truth(&self) -> RigidTransform {
        self.applied.inverse()
    }
}

impl NuisanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma_mr >= 0.0 && self.noise_sigma_mr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma_mr
            )));
        }
        if !(self.decimation_rate > 0.0 && self.decimation_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "decimation rate must lie in (0, 1], got {}",
                self.decimation_rate
            )));
        }
        if !(self.translation_extent_mr >= 0.0 && self.translation_extent_mr.is_finite()) {
            return Err(Error::InvalidParameter("translation extent must be >= 0".into()));
        }
        Ok(())
    }

    /// `mr` scales both the noise and the translation extent.
    pub fn apply(&self, cloud: &PointCloud, mr: f64) -> Result<Perturbed> {
        self.validate()?;
        let applied = match self.transform_seed {
            Some(seed) => random_rigid_transform(seed, self.translation_extent_mr * mr),
            None => RigidTransform::identity(),
        };
        let moved = apply_transform(cloud, &applied);
        let kept = decimate(&moved, self.decimation_rate, self.decimation_seed)?;
        let cloud = add_gaussian_noise(&kept, self.noise_sigma_mr, mr, self.noise_seed);
        Ok(Perturbed { cloud, applied })
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("noise_sigma_mr".into(), format!("{:?}", self.noise_sigma_mr)),
            ("decimation_rate".into(), format!("{:?}", self.decimation_rate)),
            (
                "transform_seed".into(),
                self.transform_seed
                    .map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
            ("noise_seed".into(), self.noise_seed.to_string()),
            ("decimation_seed".into(), self.decimation_seed.to_string()),
            (
                "translation_extent_mr".into(),
                format!("{:?}", self.translation_extent_mr),
            ),
            ("order".into(), "transform,decimate,noise".into()),
        ]
    }

    /// Parses the `key=value` lines written by [`Display`](fmt::Display).
    pub fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {l:?}")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("missing key {k}")))
        };
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
        let int = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
        let spec = NuisanceSpec {
            noise_sigma_mr: num("noise_sigma_mr")?,
            decimation_rate: parse_rate(get("decimation_rate")?)?,
            transform_seed: match get("transform_seed")? {
                "none" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| Error::Parse("bad value for transform_seed".into()))?,
                ),
            },
            noise_seed: int("noise_seed")?,
            decimation_seed: int("decimation_seed")?,
            translation_extent_mr: num("translation_extent_mr")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for NuisanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_pairs() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use std::collections::HashSet;

    fn cloud(n: usize) -> PointCloud {
        synthetic::fibonacci_sphere(n, 5.0)
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = cloud(100);
        assert_eq!(add_gaussian_noise(&c, 0.0, 1.0, 7), c);
    }

    #[test]
    fn noise_is_seeded() {
        let c = cloud(100);
        assert_eq!(add_gaussian_noise(&c, 0.3, 1.0, 7), add_gaussian_noise(&c, 0.3, 1.0, 7));
        assert_ne!(add_gaussian_noise(&c, 0.3, 1.0, 7), add_gaussian_noise(&c, 0.3, 1.0, 8));
    }

    #[test]
    fn noise_standard_deviation() {
        let c = PointCloud::new(vec![Point3::origin(); 10_000]).unwrap();
        let mr = 2.0;
        let noisy = add_gaussian_noise(&c, 0.5, mr, 99);
        for axis in 0..3 {
            let vals: Vec<f64> = noisy.points().iter().map(|p| p[axis]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            // sampling error of the std estimate is ~0.7% at n = 10^4
            assert!((var.sqrt() / (0.5 * mr) - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn decimation_counts() {
        let c = cloud(1000);
        assert_eq!(decimate(&c, 1.0, 3).unwrap(), c);
        let half = decimate(&c, 0.5, 3).unwrap();
        assert_eq!(half.len(), 500);
        let original: HashSet<[u64; 3]> = c
            .points()
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        assert!(half
            .points()
            .iter()
            .all(|p| original.contains(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])));
        assert_eq!(decimate(&c, 0.5, 3).unwrap(), half);
        assert!(matches!(decimate(&cloud(5), 0.1, 3), Err(Error::DegenerateOutput(_))));
        assert!(decimate(&c, 0.0, 3).is_err());
        assert!(decimate(&c, 1.5, 3).is_err());
    }

    #[test]
    fn decimation_coarsens_resolution() {
        let c = synthetic::random_sphere(20_000, 5.0, 8);
        let sparse = decimate(&c, 0.1, 11).unwrap();
        // brute-force nearest-neighbor mean on the decimated cloud
        let pts = sparse.points();
        let mut total = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let best = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        let brute = total / pts.len() as f64;
        assert!((sparse.resolution().unwrap() - brute).abs() < 1e-12);
        let ratio = brute / c.resolution().unwrap();
        assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn random_transforms_are_valid_and_seeded() {
        let t = random_rigid_transform(5, 10.0);
        assert!(RigidTransform::new(*t.rotation(), *t.translation()).is_ok());
        assert_eq!(t, random_rigid_transform(5, 10.0));
        assert!(t.translation().iter().all(|c| c.abs() <= 10.0));
        assert_eq!(*random_rigid_transform(5, 0.0).translation(), Vector3::zeros());
    }

    #[test]
    fn rotation_axes_have_no_preferred_octant() {
        let mut counts = [0usize; 8];
        let n = 10_000;
        for seed in 0..n {
            let t = random_rigid_transform(seed as u64, 1.0);
            let axis = UnitQuaternion::from_matrix(t.rotation())
                .axis()
                .expect("non-trivial rotation");
            let octant = (axis.x > 0.0) as usize | ((axis.y > 0.0) as usize) << 1 | ((axis.z > 0.0) as usize) << 2;
            counts[octant] += 1;
        }
        let expected = n as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 7 degrees of freedom, 0.01 significance
        assert!(chi2 < 18.475, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn spec_round_trip_and_apply() {
        let spec = NuisanceSpec {
            noise_sigma_mr: 0.3,
            decimation_rate: 0.25,
            transform_seed: Some(42),
            noise_seed: 1,
            decimation_seed: 2,
            translation_extent_mr: 10.0,
        };
        assert_eq!(NuisanceSpec::parse(&spec.to_string()).unwrap(), spec);
        let c = cloud(400);
        let a = spec.apply(&c, 0.1).unwrap();
        let b = spec.apply(&c, 0.1).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.cloud.len(), 100);
        let unchanged = NuisanceSpec::default().apply(&c, 0.1).unwrap();
        assert_eq!(unchanged.cloud, c);
        assert_eq!(parse_rate("1/8").unwrap(), 0.125);
        assert!(parse_rate("3/2").is_err());
    }
}
