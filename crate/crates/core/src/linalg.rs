//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;

pub fn norm_inf(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Largest deviation of the Gram matrix of `vs` from the identity.
pub fn orthonormality_defect(vs: &[Vector]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.dot(b) - target).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt against `basis` (assumed orthonormal), applied twice.
pub fn orthogonalize_against(v: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(v);
            v.axpy(-c, b, 1.0);
        }
    }
}

/// Builds an orthonormal basis of the orthogonal complement of `normals` in R^d.
///
/// `normals` must already be orthonormal.
pub fn complement_basis(d: usize, normals: &[Vector]) -> Vec<Vector> {
    let target = d - normals.len();
    let mut basis: Vec<Vector> = Vec::with_capacity(target);
    let mut all: Vec<Vector> = normals.to_vec();
    // Candidate axes in order of least overlap with the normal space.
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| {
        let wa: f64 = normals.iter().map(|n| n[a] * n[a]).sum();
        let wb: f64 = normals.iter().map(|n| n[b] * n[b]).sum();
        wa.partial_cmp(&wb).unwrap_or(std::cmp::Ordering::Equal)
    });
    for i in axes {
        if basis.len() == target {
            break;
        }
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        orthogonalize_against(&mut e, &all);
        let n = e.norm();
        if n > 1e-8 {
            e /= n;
            all.push(e.clone());
            basis.push(e);
        }
    }
    basis
}

/// Symmetric part of a square matrix.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Relative difference with an absolute floor, used by finite-difference checks.
pub fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    let scale = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() / scale
}
