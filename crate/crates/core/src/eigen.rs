//! Eigen-decomposition of 3×3 symmetric matrices by cyclic Jacobi rotations.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Vector3};

const MAX_SWEEPS: usize = 64;

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

impl SymmetricEigen3 {
    pub fn min_vector(&self) -> Vector3<f64> {
        self.vectors[0]
    }

    /// `max_i ‖m·v_i − λ_i·v_i‖`.
    pub fn max_residual(&self, m: &Matrix3<f64>) -> f64 {
        (0..3)
            .map(|i| (m * self.vectors[i] - self.vectors[i] * self.values[i]).norm())
            .fold(0.0, f64::max)
    }
}

/// Decomposes the symmetric part of `m`.
///
/// Eigenvalues that agree to within `1e-12` of the spectral scale count as
/// tied; tied eigenvectors are ordered by their absolute components,
/// lexicographically ascending. Each vector's largest-magnitude component is
/// made positive.
pub fn symmetric_eigen(m: &Matrix3<f64>) -> SymmetricEigen3 {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix3::<f64>::identity();

    for _ in 0..MAX_SWEEPS {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
        if off == 0.0 || off <= f64::EPSILON * f64::EPSILON * diag * 1e-4 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            rotate(&mut a, &mut v, p, q);
        }
    }

    let scale = (0..3).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tie = 1e-12 * scale;
    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (a[(i, i)], canonical_sign(v.column(i).into_owned())))
        .collect();
    pairs.sort_by(|x, y| {
        if (x.0 - y.0).abs() <= tie {
            abs_lex(&x.1, &y.1)
        } else {
            x.0.total_cmp(&y.0)
        }
    });
    SymmetricEigen3 {
        values: [pairs[0].0, pairs[1].0, pairs[2].0],
        vectors: [pairs[0].1, pairs[1].1, pairs[2].1],
    }
}

/// Unit eigenvector of the smallest eigenvalue.
pub fn min_eigenvector(m: &Matrix3<f64>) -> Vector3<f64> {
    symmetric_eigen(m).min_vector()
}

fn rotate(a: &mut Matrix3<f64>, v: &mut Matrix3<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // A ← Jᵀ A J with J the Givens rotation in the (p, q) plane
    for k in 0..3 {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..3 {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..3 {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let v = v.normalize();
    let imax = v.iamax();
    if v[imax] < 0.0 {
        -v
    } else {
        v
    }
}

fn abs_lex(x: &Vector3<f64>, y: &Vector3<f64>) -> Ordering {
    (0..3)
        .map(|i| x[i].abs().total_cmp(&y[i].abs()))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
