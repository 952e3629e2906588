//! Seeded synthetic surfaces for experiments, examples and tests.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::{PointCloud, TriangleMesh};

fn fibonacci_directions(n: usize) -> impl Iterator<Item = Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

/// Near-uniform sphere sampling on a Fibonacci lattice.
pub fn fibonacci_sphere(n: usize, radius: f64) -> PointCloud {
    PointCloud::new(fibonacci_directions(n).map(|d| Point3::from(d * radius)).collect())
        .expect("fibonacci sphere is finite and non-empty")
}

/// Independent uniform samples on a sphere.
pub fn random_sphere(n: usize, radius: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n2: f64 = v.norm_squared();
        if n2 > 1e-6 && n2 <= 1.0 {
            points.push(Point3::from(v / n2.sqrt() * radius));
        }
    }
    PointCloud::new(points).expect("random sphere is finite and non-empty")
}

#[derive(Debug, Clone)]
struct Bump {
    center: Vector3<f64>,
    amplitude: f64,
    width: f64,
}

/// A closed star-shaped blob: a sphere whose radius is modulated by random
/// Gaussian bumps and dents, sampled on a Fibonacci lattice. Every local
/// patch looks different, which makes it a reasonable matching target.
pub fn bumpy_sphere(n: usize, radius: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<Bump> = (0..24)
        .map(|_| {
            let center = loop {
                let v: Vector3<f64> = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n2 = v.norm_squared();
                if n2 > 1e-3 && n2 <= 1.0 {
                    break v / n2.sqrt();
                }
            };
            Bump {
                center,
                amplitude: rng.random_range(-0.12..0.12),
                width: rng.random_range(0.03..0.2),
            }
        })
        .collect();
    let points = fibonacci_directions(n)
        .map(|d| {
            let scale: f64 = 1.0
                + bumps
                    .iter()
                    .map(|b| b.amplitude * (-(1.0 - d.dot(&b.center)) / b.width).exp())
                    .sum::<f64>();
            Point3::from(d * radius * scale)
        })
        .collect();
    PointCloud::new(points).expect("bumpy sphere is finite and non-empty")
}

/// Area-uniform random samples on a torus around the z axis.
pub fn torus(n: usize, major: f64, minor: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let u = rng.random_range(0.0..2.0 * PI);
        let v = rng.random_range(0.0..2.0 * PI);
        // accept with probability proportional to the local area element
        let w: f64 = rng.random_range(0.0..major + minor);
        if w > major + minor * v.cos() {
            continue;
        }
        let ring = major + minor * v.cos();
        points.push(Point3::new(ring * u.cos(), ring * u.sin(), minor * v.sin()));
    }
    PointCloud::new(points).expect("torus is finite and non-empty")
}

/// `nx × ny` grid in the z = 0 plane, triangulated with two triangles per cell.
pub fn grid_mesh(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut tris = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let a = j * nx + i;
            tris.push([a, a + 1, a + nx + 1]);
            tris.push([a, a + nx + 1, a + nx]);
        }
    }
    TriangleMesh::new(PointCloud::new(pts).expect("grid is non-empty"), tris).expect("grid triangles are valid")
}
