//! Smallest eigenpairs of the Hessian.
//!
//! [`min_modes`] is matrix-free: it only calls `hessian_vec`. Small problems
//! (reduced dimension at most [`DENSE_SWITCH`]) are assembled and solved
//! densely since a block of three search directions would span the space
//! anyway. Larger problems use a blocked Rayleigh-Ritz iteration on
//! `[X, R, P]` (LOBPCG without a preconditioner).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{orthogonalize_against, symmetrize, Vector};
use crate::manifold::TangentSpace;
use crate::par::{self, Execution};
use crate::potentials::PotentialModel;

/// Reduced dimensions up to this size are solved densely.
pub const DENSE_SWITCH: usize = 16;
/// Default cap for [`dense_eigensolve`].
pub const DEFAULT_DENSE_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenConfig {
    /// Residual tolerance relative to `max(1, |θ|max)` of the current Ritz values.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { tol: 1e-10, max_iters: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinModeResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vector>,
    /// Absolute residuals `‖Hv − λv‖` (projected when constrained).
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    /// Set when a gap among the returned pairs, or to the next Ritz value,
    /// is below `1e-8` times the spectral scale.
    pub near_degenerate: bool,
}

impl MinModeResult {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Full spectrum from an explicitly assembled Hessian.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, in the same order.
    pub eigenvectors: DMatrix<f64>,
}

impl DenseSpectrum {
    /// Number of eigenvalues below `-tol · max(1, |λ|max)`.
    pub fn negative_count(&self, tol: f64) -> usize {
        let scale = self.eigenvalues.iter().fold(1.0_f64, |m, l| m.max(l.abs()));
        self.eigenvalues.iter().filter(|&&l| l < -tol * scale).count()
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> DenseSpectrum {
    let eig = SymmetricEigen::new(symmetrize(&m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let n = m.nrows();
    let mut vecs = DMatrix::zeros(n, order.len());
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    DenseSpectrum {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vecs,
    }
}

/// Assembles `∇²V(x)` column by column from Hessian-vector products.
pub fn dense_hessian(p: &PotentialModel, x: &Vector, exec: Execution) -> Result<DMatrix<f64>> {
    check_dim(p.dim(), x.len())?;
    let d = p.dim();
    let cols = par::map_range(exec, d, |i| {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        p.surface().hessian_vec(x, &e)
    });
    Ok(symmetrize(&DMatrix::from_columns(&cols)))
}

/// Full ascending spectrum of `∇²V(x)`; refuses dimensions above `cap`.
pub fn dense_eigensolve(p: &PotentialModel, x: &Vector, cap: usize) -> Result<DenseSpectrum> {
    if p.dim() > cap {
        return Err(SaddleError::DenseCapExceeded { dim: p.dim(), cap });
    }
    Ok(sorted_eigen(dense_hessian(p, x, Execution::default())?))
}

/// Spectrum of `Qᵀ ∇²V(x) Q` for the orthonormal tangent basis `Q`.
/// Eigenvectors are returned in ambient coordinates.
pub fn dense_eigensolve_projected(
    p: &PotentialModel,
    x: &Vector,
    tangent: &TangentSpace,
    cap: usize,
) -> Result<DenseSpectrum> {
    if p.dim() > cap {
        return Err(SaddleError::DenseCapExceeded { dim: p.dim(), cap });
    }
    let h = dense_hessian(p, x, Execution::default())?;
    let q = tangent.matrix();
    let reduced = sorted_eigen(q.transpose() * &h * &q);
    Ok(DenseSpectrum {
        eigenvalues: reduced.eigenvalues,
        eigenvectors: q * reduced.eigenvectors,
    })
}

/// The `m` smallest eigenpairs of the Hessian at `x`, optionally restricted to
/// a tangent space. `warm` vectors (ambient coordinates) seed the iteration.
pub fn min_modes(
    p: &PotentialModel,
    x: &Vector,
    m: usize,
    warm: Option<&[Vector]>,
    cfg: &EigenConfig,
    tangent: Option<&TangentSpace>,
) -> Result<MinModeResult> {
    check_dim(p.dim(), x.len())?;
    if !(cfg.tol > 0.0) {
        return Err(SaddleError::InvalidParameter("eigensolver tol must be positive".into()));
    }
    let n = tangent.map_or(p.dim(), |t| t.dim());
    if m == 0 || m > n {
        return Err(SaddleError::TooManyModes { requested: m, available: n });
    }
    let surface = p.surface();
    let op = |z: &Vector| -> Vector {
        match tangent {
            Some(t) => t.restrict(&surface.hessian_vec(x, &t.lift(z))),
            None => surface.hessian_vec(x, z),
        }
    };
    let seeds: Vec<Vector> = warm
        .unwrap_or(&[])
        .iter()
        .map(|v| {
            check_dim(p.dim(), v.len())?;
            Ok(match tangent {
                Some(t) => t.restrict(v),
                None => v.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let reduced = if n <= DENSE_SWITCH {
        dense_modes(&op, n, m)
    } else {
        block_rayleigh_ritz(&op, n, m, &seeds, cfg)
    };
    let lift = |r: MinModeResult| -> MinModeResult {
        match tangent {
            Some(t) => MinModeResult {
                eigenvectors: r.eigenvectors.iter().map(|z| t.lift(z)).collect(),
                ..r
            },
            None => r,
        }
    };
    match reduced {
        Ok(r) => Ok(lift(r)),
        Err(SaddleError::EigenNotConverged { iterations, residual, best }) => Err(SaddleError::EigenNotConverged {
            iterations,
            residual,
            best: Box::new(lift(*best)),
        }),
        Err(e) => Err(e),
    }
}

fn spectral_scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0_f64, |m, l| m.max(l.abs()))
}

fn degenerate(values: &[f64], m: usize, scale: f64) -> bool {
    let upto = (m + 1).min(values.len());
    values[..upto].windows(2).any(|w| (w[1] - w[0]).abs() < 1e-8 * scale)
}

fn dense_modes<F: Fn(&Vector) -> Vector>(op: &F, n: usize, m: usize) -> Result<MinModeResult> {
    let cols: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            op(&e)
        })
        .collect();
    let spec = sorted_eigen(DMatrix::from_columns(&cols));
    let scale = spectral_scale(&spec.eigenvalues);
    let vectors: Vec<Vector> = (0..m).map(|k| spec.eigenvectors.column(k).into_owned()).collect();
    let residual_norms = vectors
        .iter()
        .zip(&spec.eigenvalues)
        .map(|(v, &l)| (op(v) - v * l).norm())
        .collect();
    Ok(MinModeResult {
        eigenvalues: spec.eigenvalues[..m].to_vec(),
        eigenvectors: vectors,
        residual_norms,
        iterations: 1,
        near_degenerate: degenerate(&spec.eigenvalues, m, scale),
    })
}

/// Orthonormalizes `cols` in place (keeping the first `keep` untouched, they
/// must already be orthonormal) and applies the same combinations to `acols`.
/// Nearly dependent columns are dropped.
fn orthonormalize_tracked(cols: &mut Vec<Vector>, acols: &mut Vec<Vector>, keep: usize) {
    let mut out_c: Vec<Vector> = cols[..keep].to_vec();
    let mut out_a: Vec<Vector> = acols[..keep].to_vec();
    for (c, a) in cols.drain(keep..).zip(acols.drain(keep..)) {
        let before = c.norm();
        if before == 0.0 {
            continue;
        }
        let (mut c, mut a) = (c / before, a / before);
        for _ in 0..2 {
            for (b, ab) in out_c.iter().zip(&out_a) {
                let k = b.dot(&c);
                c.axpy(-k, b, 1.0);
                a.axpy(-k, ab, 1.0);
            }
        }
        let after = c.norm();
        if after > 1e-10 {
            out_c.push(c / after);
            out_a.push(a / after);
        }
    }
    *cols = out_c;
    *acols = out_a;
}

fn block_rayleigh_ritz<F: Fn(&Vector) -> Vector>(
    op: &F,
    n: usize,
    m: usize,
    seeds: &[Vector],
    cfg: &EigenConfig,
) -> Result<MinModeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut x: Vec<Vector> = Vec::with_capacity(m);
    for s in seeds.iter().take(m) {
        let mut v = s.clone();
        orthogonalize_against(&mut v, &x);
        let nv = v.norm();
        if nv > 1e-8 {
            x.push(v / nv);
        }
    }
    while x.len() < m {
        let mut v = Vector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        orthogonalize_against(&mut v, &x);
        let nv = v.norm();
        if nv > 1e-8 {
            x.push(v / nv);
        }
    }
    let mut ax: Vec<Vector> = x.iter().map(|v| op(v)).collect();
    let mut p: Vec<Vector> = Vec::new();
    let mut ap: Vec<Vector> = Vec::new();
    let mut theta = vec![0.0; m];
    let mut ritz_all: Vec<f64> = Vec::new();
    let mut residuals = vec![f64::INFINITY; m];

    for it in 0..=cfg.max_iters {
        // Rayleigh-Ritz on the current search space.
        let mut s = x.clone();
        let mut a_s = ax.clone();
        if it > 0 {
            let r: Vec<Vector> = (0..m).map(|k| &ax[k] - &x[k] * theta[k]).collect();
            let ar: Vec<Vector> = r.iter().map(|v| op(v)).collect();
            s.extend(r);
            a_s.extend(ar);
            s.extend(p.iter().cloned());
            a_s.extend(ap.iter().cloned());
        }
        orthonormalize_tracked(&mut s, &mut a_s, if it > 0 { m } else { 0 });
        let k = s.len();
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (s[i].dot(&a_s[j]) + s[j].dot(&a_s[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let spec = sorted_eigen(g);
        ritz_all = spec.eigenvalues.clone();
        let c = spec.eigenvectors;
        let combine = |basis: &[Vector], from: usize, col: usize| -> Vector {
            let mut out = Vector::zeros(n);
            for (i, b) in basis.iter().enumerate().skip(from) {
                out.axpy(c[(i, col)], b, 1.0);
            }
            out
        };
        let new_x: Vec<Vector> = (0..m).map(|j| combine(&s, 0, j)).collect();
        let new_ax: Vec<Vector> = (0..m).map(|j| combine(&a_s, 0, j)).collect();
        if k > m {
            p = (0..m).map(|j| combine(&s, m.min(x.len()), j)).collect();
            ap = (0..m).map(|j| combine(&a_s, m.min(x.len()), j)).collect();
        }
        x = new_x;
        ax = new_ax;
        theta = spec.eigenvalues[..m].to_vec();

        let scale = spectral_scale(&ritz_all);
        residuals = (0..m).map(|j| (&ax[j] - &x[j] * theta[j]).norm()).collect();
        if residuals.iter().all(|&r| r <= cfg.tol * scale) {
            // Confirm with fresh products before accepting.
            ax = x.iter().map(|v| op(v)).collect();
            theta = (0..m).map(|j| x[j].dot(&ax[j])).collect();
            residuals = (0..m).map(|j| (&ax[j] - &x[j] * theta[j]).norm()).collect();
            if residuals.iter().all(|&r| r <= cfg.tol * scale) {
                return Ok(MinModeResult {
                    eigenvalues: theta,
                    eigenvectors: x,
                    residual_norms: residuals,
                    iterations: it,
                    near_degenerate: degenerate(&ritz_all, m, scale),
                });
            }
        }
    }
    let scale = spectral_scale(&ritz_all);
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    Err(SaddleError::EigenNotConverged {
        iterations: cfg.max_iters,
        residual: worst,
        best: Box::new(MinModeResult {
            eigenvalues: theta,
            eigenvectors: x,
            residual_norms: residuals,
            iterations: cfg.max_iters,
            near_degenerate: degenerate(&ritz_all, m, scale),
        }),
    })
}
