//! Point clouds, triangle meshes, rigid transforms and spatial queries.
//!
//! All coordinates stay in the units of the source data. Algorithm
//! parameters elsewhere in the crate are expressed in multiples of the mesh
//! resolution (`mr`, the mean nearest-neighbor spacing) and converted at the
//! call site.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    resolution: OnceLock<f64>,
}

impl PointCloud {
    /// Wraps `points`, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateInput("point cloud has no points".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(PointCloud {
            points,
            resolution: OnceLock::new(),
        })
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &Point3<f64> {
        &self.points[index]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }

    /// Mesh resolution, computed on first use and cached.
    pub fn resolution(&self) -> Result<f64> {
        if let Some(&mr) = self.resolution.get() {
            return Ok(mr);
        }
        let mr = mean_nearest_neighbor_distance(&self.points)?;
        Ok(*self.resolution.get_or_init(|| mr))
    }

    /// Returns the subset at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        PointCloud::new(indices.iter().map(|&i| self.points[i]).collect())
    }
}

impl PartialEq for PointCloud {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

fn mean_nearest_neighbor_distance(points: &[Point3<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput("mesh resolution needs at least 2 points".into()));
    }
    let tree = tree_over(points);
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.nearest(p.coords.as_slice(), 1, Some(i));
            nn[0].dist_sq.sqrt()
        })
        .sum();
    Ok(total / points.len() as f64)
}

/// Mean distance from each point to its nearest other point (the `mr` unit).
pub fn estimate_mesh_resolution(cloud: &PointCloud) -> Result<f64> {
    cloud.resolution()
}

fn tree_over(points: &[Point3<f64>]) -> KdTree {
    KdTree::new(3, points.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
}

/// Radius and nearest-neighbor queries over a fixed set of 3D points.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    tree: KdTree,
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        SpatialIndex {
            tree: tree_over(cloud.points()),
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Indices within `radius` (inclusive) of `center`, ascending.
    pub fn radius_neighbors(&self, center: &Point3<f64>, radius: f64) -> Vec<usize> {
        if radius < 0.0 {
            return Vec::new();
        }
        self.tree.within_radius(center.coords.as_slice(), radius)
    }

    /// Closest indexed point and its distance.
    pub fn nearest(&self, center: &Point3<f64>) -> Option<(usize, f64)> {
        self.tree
            .nearest(center.coords.as_slice(), 1, None)
            .first()
            .map(|n| (n.index, n.dist_sq.sqrt()))
    }

    /// The `k` closest points as `(index, distance)`, ties broken by index.
    pub fn k_nearest(&self, center: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        self.tree
            .nearest(center.coords.as_slice(), k, None)
            .into_iter()
            .map(|n| (n.index, n.dist_sq.sqrt()))
            .collect()
    }
}

/// Free-function form of [`SpatialIndex::radius_neighbors`].
pub fn radius_neighbors(index: &SpatialIndex, center: &Point3<f64>, radius: f64) -> Vec<usize> {
    index.radius_neighbors(center, radius)
}

/// A cloud together with its spatial index.
#[derive(Debug, Clone)]
pub struct IndexedCloud {
    cloud: PointCloud,
    index: SpatialIndex,
}

impl IndexedCloud {
    pub fn new(cloud: PointCloud) -> Self {
        let index = SpatialIndex::new(&cloud);
        IndexedCloud { cloud, index }
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn points(&self) -> &[Point3<f64>] {
        self.cloud.points()
    }

    pub fn neighbors(&self, center: &Point3<f64>, radius: f64) -> Vec<usize> {
        self.index.radius_neighbors(center, radius)
    }

    pub fn resolution(&self) -> Result<f64> {
        self.cloud.resolution()
    }
}

impl From<PointCloud> for IndexedCloud {
    fn from(cloud: PointCloud) -> Self {
        IndexedCloud::new(cloud)
    }
}

/// Proper rigid motion `x ↦ rotation·x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite translation".into()));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Row-major 4×4 homogeneous matrix.
    #[rustfmt::skip]
    pub fn to_homogeneous(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    /// Inverse of [`to_homogeneous`](Self::to_homogeneous). Rotations that
    /// are orthonormal only to within `1e-4` (e.g. printed with few decimals)
    /// are projected onto the nearest rotation.
    pub fn from_homogeneous(m: &[f64; 16]) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("transform has non-finite entries".into()));
        }
        if m[12].abs() > 1e-9 || m[13].abs() > 1e-9 || m[14].abs() > 1e-9 || (m[15] - 1.0).abs() > 1e-9 {
            return Err(Error::Parse("last row of a rigid transform must be 0 0 0 1".into()));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        let rotation = if check_rotation(&rotation, ROTATION_TOLERANCE).is_ok() {
            rotation
        } else {
            check_rotation(&rotation, 1e-4)?;
            nearest_rotation(&rotation)
        };
        RigidTransform::new(rotation, translation)
    }

    /// Parses 16 whitespace-separated values (row-major 4×4).
    pub fn parse_text(text: &str) -> Result<Self> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad transform value {tok:?}")))
            })
            .collect::<Result<_>>()?;
        let m: [f64; 16] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::Parse(format!("expected 16 transform values, got {}", v.len())))?;
        Self::from_homogeneous(&m)
    }

    /// Four lines of four values each; round-trips through [`parse_text`](Self::parse_text).
    pub fn to_text(&self) -> String {
        let m = self.to_homogeneous();
        let mut out = String::new();
        for row in m.chunks(4) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !r.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite rotation".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if ortho > tol || (det - 1.0).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "not a proper rotation (orthonormality error {ortho:e}, det {det})"
        )));
    }
    Ok(())
}

pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points().iter().map(|p| t.apply(p)).collect(),
        resolution: OnceLock::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    cloud: PointCloud,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(cloud: PointCloud, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = cloud.len();
        for (f, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvalidParameter(format!(
                    "triangle {f} references a vertex outside 0..{n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidParameter(format!("triangle {f} is degenerate")));
            }
        }
        Ok(TriangleMesh { cloud, triangles })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn into_parts(self) -> (PointCloud, Vec<[usize; 3]>) {
        (self.cloud, self.triangles)
    }
}

/// Vertices incident to an edge used by exactly one triangle.
pub fn detect_boundary_points(mesh: &TriangleMesh) -> Result<BTreeSet<usize>> {
    if mesh.triangles().is_empty() {
        return Err(Error::UnsupportedInput(
            "boundary detection needs triangle connectivity".into(),
        ));
    }
    let mut edge_use: HashMap<(usize, usize), u32> = HashMap::new();
    for tri in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *edge_use.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    Ok(edge_use
        .into_iter()
        .filter(|&(_, count)| count == 1)
        .flat_map(|((a, b), _)| [a, b])
        .collect())
}

/// Indices farther than `radius` from every boundary point, ascending.
pub fn inner_region(cloud: &PointCloud, boundary: &BTreeSet<usize>, radius: f64) -> Vec<usize> {
    if boundary.is_empty() {
        return (0..cloud.len()).collect();
    }
    let boundary_points: Vec<Point3<f64>> = boundary.iter().map(|&i| *cloud.point(i)).collect();
    let tree = tree_over(&boundary_points);
    let r2 = radius * radius;
    (0..cloud.len())
        .filter(|i| !boundary.contains(i))
        .filter(|&i| tree.nearest(cloud.point(i).coords.as_slice(), 1, None)[0].dist_sq > r2)
        .collect()
}
