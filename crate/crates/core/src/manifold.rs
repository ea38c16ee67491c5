//! Equality-constrained manifolds embedded in R^d.
//!
//! The tangent space at `x` is the orthogonal complement of the constraint
//! gradients. Only the unit sphere has closed-form geodesics; the generic
//! retraction projects back along the normal space with Gauss-Newton steps.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::DenseSpectrum;
use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{complement_basis, orthogonalize_against, symmetrize, Vector};
use crate::objective::ModifiedObjective;
use crate::par::Execution;
use crate::potentials::PotentialModel;
use crate::subsolve::{SubsolveConfig, SubsolveResult};

/// Feasibility tolerance for points handed to manifold operations.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Orthonormal basis `Q` of a tangent space, stored as columns.
#[derive(Debug, Clone)]
pub struct TangentSpace {
    basis: Vec<Vector>,
    ambient: usize,
}

impl TangentSpace {
    pub fn from_basis(basis: Vec<Vector>, ambient: usize) -> Self {
        TangentSpace { basis, ambient }
    }

    /// Tangent dimension `d − p`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    /// `Qᵀ u`: coordinates in the tangent basis.
    pub fn restrict(&self, u: &Vector) -> Vector {
        Vector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(u)))
    }

    /// `Q z`.
    pub fn lift(&self, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.ambient);
        for (b, &c) in self.basis.iter().zip(z.iter()) {
            out.axpy(c, b, 1.0);
        }
        out
    }

    /// Orthogonal projection `Q Qᵀ u`.
    pub fn project(&self, u: &Vector) -> Vector {
        self.lift(&self.restrict(u))
    }
}

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// One equality constraint `c(x) = 0` with its gradient.
#[derive(Clone)]
pub struct Constraint {
    value: ScalarFn,
    gradient: VectorFn,
}

impl Constraint {
    pub fn new<F, G>(value: F, gradient: G) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Constraint { value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retraction {
    /// `x ↦ x / ‖x‖` (unit sphere only).
    Normalize,
    /// Gauss-Newton projection along the constraint normals.
    NormalProjection,
}

#[derive(Clone)]
pub struct ManifoldSpec {
    name: String,
    dim: usize,
    constraints: Vec<Constraint>,
    retraction: Retraction,
}

impl fmt::Debug for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("constraints", &self.constraints.len())
            .field("retraction", &self.retraction)
            .finish()
    }
}

impl ManifoldSpec {
    pub fn new(name: &str, dim: usize, constraints: Vec<Constraint>, retraction: Retraction) -> Self {
        ManifoldSpec { name: name.to_string(), dim, constraints, retraction }
    }

    /// The unit sphere `‖x‖² − 1 = 0` in R^d.
    pub fn sphere(dim: usize) -> Self {
        let c = Constraint::new(|x: &Vector| x.norm_squared() - 1.0, |x: &Vector| x * 2.0);
        ManifoldSpec::new("sphere", dim, vec![c], Retraction::Normalize)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_sphere(&self) -> bool {
        self.retraction == Retraction::Normalize
    }

    /// `max |c_i(x)|`.
    pub fn residual(&self, x: &Vector) -> f64 {
        self.constraints.iter().fold(0.0, |m, c| m.max(c.value(x).abs()))
    }

    pub fn check_feasible(&self, x: &Vector, tol: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let r = self.residual(x);
        if r > tol {
            Err(SaddleError::OffManifold { residual: r })
        } else {
            Ok(())
        }
    }

    /// Orthonormalized constraint gradients; errors on rank deficiency.
    pub fn normal_basis(&self, x: &Vector) -> Result<Vec<Vector>> {
        let mut out: Vec<Vector> = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let g = c.gradient(x);
            let before = g.norm();
            let mut g = g;
            orthogonalize_against(&mut g, &out);
            let after = g.norm();
            if before == 0.0 || after <= 1e-10 * before.max(1.0) {
                return Err(SaddleError::RankDeficient);
            }
            out.push(g / after);
        }
        Ok(out)
    }

    pub fn tangent_space(&self, x: &Vector) -> Result<TangentSpace> {
        self.check_feasible(x, FEASIBILITY_TOL)?;
        let normals = self.normal_basis(x)?;
        Ok(TangentSpace::from_basis(complement_basis(self.dim, &normals), self.dim))
    }

    /// Removes the normal component of `u` at the feasible point `x`.
    pub fn tangent_project(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check_feasible(x, FEASIBILITY_TOL)?;
        check_dim(self.dim, u.len())?;
        let normals = self.normal_basis(x)?;
        let mut out = u.clone();
        orthogonalize_against(&mut out, &normals);
        Ok(out)
    }

    /// Maps `x + step` back onto the manifold.
    pub fn retract(&self, x: &Vector, step: &Vector) -> Result<Vector> {
        let y = x + step;
        match self.retraction {
            Retraction::Normalize => {
                let n = y.norm();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(SaddleError::Retraction("cannot normalize a zero vector".into()));
                }
                Ok(y / n)
            }
            Retraction::NormalProjection => self.project_to_manifold(y),
        }
    }

    fn project_to_manifold(&self, mut y: Vector) -> Result<Vector> {
        let p = self.constraints.len();
        for _ in 0..50 {
            let c = DVector::from_iterator(p, self.constraints.iter().map(|k| k.value(&y)));
            if c.amax() <= 1e-14 {
                return Ok(y);
            }
            let grads: Vec<Vector> = self.constraints.iter().map(|k| k.gradient(&y)).collect();
            let j = DMatrix::from_columns(&grads);
            let jtj = j.transpose() * &j;
            let lambda = jtj
                .lu()
                .solve(&c)
                .ok_or_else(|| SaddleError::Retraction("singular constraint Jacobian".into()))?;
            y -= j * lambda;
        }
        if self.residual(&y) <= 1e-12 {
            Ok(y)
        } else {
            Err(SaddleError::Retraction("Gauss-Newton projection did not converge".into()))
        }
    }

    /// Spectrum of the Riemannian Hessian `Qᵀ(∇²V − Σ μᵢ∇²cᵢ)Q` at `x`, with
    /// multipliers `μ` from the least-squares fit `∇V ≈ Σ μᵢ∇cᵢ`. Used to
    /// classify constrained stationary points.
    pub fn riemannian_spectrum(&self, p: &PotentialModel, x: &Vector) -> Result<DenseSpectrum> {
        let t = self.tangent_space(x)?;
        let g = p.gradient(x)?;
        let grads: Vec<Vector> = self.constraints.iter().map(|k| k.gradient(x)).collect();
        let j = DMatrix::from_columns(&grads);
        let mu = (j.transpose() * &j)
            .lu()
            .solve(&(j.transpose() * &g))
            .ok_or(SaddleError::RankDeficient)?;
        let h = crate::eigen::dense_hessian(p, x, Execution::Sequential)?;
        let d = self.dim;
        // Constraint Hessians by central differences of their gradients.
        let mut hc = DMatrix::zeros(d, d);
        let step = 1e-6;
        for (k, c) in self.constraints.iter().enumerate() {
            for i in 0..d {
                let mut e = Vector::zeros(d);
                e[i] = step;
                let col = (c.gradient(&(x + &e)) - c.gradient(&(x - &e))) / (2.0 * step);
                for r in 0..d {
                    hc[(r, i)] += mu[k] * col[r];
                }
            }
        }
        let q = t.matrix();
        let reduced = symmetrize(&(q.transpose() * (h - symmetrize(&hc)) * &q));
        let eig = nalgebra::SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut vecs = DMatrix::zeros(d, order.len());
        for (k, &i) in order.iter().enumerate() {
            vecs.set_column(k, &(&q * eig.eigenvectors.column(i)));
        }
        Ok(DenseSpectrum {
            eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            eigenvectors: vecs,
        })
    }
}

/// Nearest point to `y` on the great circle `ξ(θ) = x cos θ + v sin θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicProjection {
    pub theta: f64,
    pub point: Vector,
    /// `y` is equidistant from the whole circle; `θ = π/2` was chosen.
    pub tie: bool,
}

/// Geodesic projection on S² (or any S^{d−1}): `θ_y = arctan(⟨v,y⟩/⟨x,y⟩)` or
/// that plus π, whichever is closer to `y`.
pub fn sphere_geodesic_project(x: &Vector, v: &Vector, y: &Vector) -> Result<GeodesicProjection> {
    check_dim(x.len(), v.len())?;
    check_dim(x.len(), y.len())?;
    for (name, w) in [("x", x), ("v", v), ("y", y)] {
        if (w.norm() - 1.0).abs() > 1e-10 {
            return Err(SaddleError::InvalidParameter(format!("{name} must be a unit vector")));
        }
    }
    if x.dot(v).abs() > 1e-10 {
        return Err(SaddleError::InvalidParameter("v must be tangent at x".into()));
    }
    let (theta, tie) = geodesic_angle(x.dot(y), v.dot(y));
    Ok(GeodesicProjection { theta, point: x * theta.cos() + v * theta.sin(), tie })
}

/// One constrained subproblem of the manifold scheme: tangent-space descent
/// on `l` from the feasible `y0`, retracting after every step.
pub fn solve_constrained_subproblem(
    l: &ModifiedObjective,
    m: &ManifoldSpec,
    y0: &Vector,
    cfg: &SubsolveConfig,
) -> Result<SubsolveResult> {
    crate::subsolve::minimize_on_manifold(l, m, y0, cfg)
}

/// Branch selection for `θ_y` from `a = ⟨x,y⟩`, `b = ⟨v,y⟩`.
pub(crate) fn geodesic_angle(a: f64, b: f64) -> (f64, bool) {
    if a == 0.0 && b == 0.0 {
        return (PI / 2.0, true);
    }
    let base = (b / a).atan();
    let closeness = |t: f64| a * t.cos() + b * t.sin();
    let theta = if closeness(base) >= closeness(base + PI) { base } else { base + PI };
    // Normalize to (−π, π].
    let theta = if theta > PI { theta - 2.0 * PI } else { theta };
    (theta, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v3(a: f64, b: f64, c: f64) -> Vector {
        Vector::from_vec(vec![a, b, c])
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
        let v = Vector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
        v.normalize()
    }

    #[test]
    fn sphere_projection_removes_radial_part() {
        let s = ManifoldSpec::sphere(3);
        let p = s.tangent_project(&v3(1.0, 0.0, 0.0), &v3(1.0, 1.0, 0.0)).unwrap();
        assert!((p - v3(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_tangent() {
        let s = ManifoldSpec::sphere(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_unit(&mut rng, 3);
            let u = Vector::from_fn(3, |_, _| rng.gen::<f64>() * 4.0 - 2.0);
            let pu = s.tangent_project(&x, &u).unwrap();
            let ppu = s.tangent_project(&x, &pu).unwrap();
            assert!((&pu - &ppu).norm() < 1e-12);
            assert!((x.dot(&pu) * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let s = ManifoldSpec::sphere(3);
        assert!(matches!(
            s.tangent_project(&v3(1.1, 0.0, 0.0), &v3(0.0, 1.0, 0.0)),
            Err(SaddleError::OffManifold { .. })
        ));
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let c1 = Constraint::new(|x: &Vector| x[0], |_x: &Vector| v3(1.0, 0.0, 0.0));
        let c2 = Constraint::new(|x: &Vector| 2.0 * x[0], |_x: &Vector| v3(2.0, 0.0, 0.0));
        let m = ManifoldSpec::new("plane", 3, vec![c1, c2], Retraction::NormalProjection);
        assert!(matches!(m.normal_basis(&v3(0.0, 1.0, 0.0)), Err(SaddleError::RankDeficient)));
    }

    #[test]
    fn retraction_lands_on_sphere() {
        let s = ManifoldSpec::sphere(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_unit(&mut rng, 3);
            let step = Vector::from_fn(3, |_, _| rng.gen::<f64>() - 0.5);
            let y = s.retract(&x, &step).unwrap();
            assert!(s.residual(&y) <= 1e-12);
        }
        assert!(s.retract(&v3(1.0, 0.0, 0.0), &v3(-1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn generic_retraction_agrees_with_normalization() {
        let c = Constraint::new(|x: &Vector| x.norm_squared() - 1.0, |x: &Vector| x * 2.0);
        let g = ManifoldSpec::new("sphere_generic", 3, vec![c], Retraction::NormalProjection);
        let y = g.retract(&v3(1.0, 0.0, 0.0), &v3(0.0, 0.3, 0.0)).unwrap();
        assert!(g.residual(&y) <= 1e-12);
        // Gauss-Newton along the normal keeps the direction of x + step.
        let expected = v3(1.0, 0.3, 0.0).normalize();
        assert!((y - expected).norm() < 1e-10);
    }

    #[test]
    fn geodesic_projection_trivial_cases() {
        let x = v3(1.0, 0.0, 0.0);
        let v = v3(0.0, 1.0, 0.0);
        let p = sphere_geodesic_project(&x, &v, &x).unwrap();
        assert_eq!(p.theta, 0.0);
        assert!((p.point - &x).norm() < 1e-15);
        let p = sphere_geodesic_project(&x, &v, &v).unwrap();
        assert!((p.theta - PI / 2.0).abs() < 1e-15);
        assert!((p.point - &v).norm() < 1e-15);
        let p = sphere_geodesic_project(&x, &v, &v3(0.0, 0.0, 1.0)).unwrap();
        assert!(p.tie);
        assert!((p.theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_projection_beats_brute_force_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let x = random_unit(&mut rng, 3);
            let mut v = random_unit(&mut rng, 3);
            v -= &x * x.dot(&v);
            let v = v.normalize();
            let y = random_unit(&mut rng, 3);
            let p = sphere_geodesic_project(&x, &v, &y).unwrap();
            // Dense sweep over θ ∈ [−π, π).
            let n = 1_000_000;
            let (a, b) = (x.dot(&y), v.dot(&y));
            let (mut best_t, mut best_d) = (0.0, f64::INFINITY);
            for k in 0..n {
                let t = -PI + 2.0 * PI * k as f64 / n as f64;
                let d = (a * t.cos() + b * t.sin()).clamp(-1.0, 1.0).acos();
                if d < best_d {
                    best_d = d;
                    best_t = t;
                }
            }
            let diff = (p.theta - best_t).abs();
            let diff = diff.min(2.0 * PI - diff);
            assert!(diff < 1e-5, "θ = {}, sweep = {}", p.theta, best_t);
            let d = p.point.dot(&y).clamp(-1.0, 1.0).acos();
            assert!(d <= best_d + 1e-12);
        }
    }

    #[test]
    fn riemannian_spectrum_at_sphere_saddle() {
        let p = crate::potentials::SphereQuadratic.into_model();
        let s = ManifoldSpec::sphere(3);
        let spec = s.riemannian_spectrum(&p, &v3(0.0, 1.0, 0.0)).unwrap();
        assert!((spec.eigenvalues[0] + 2.0).abs() < 1e-6);
        assert!((spec.eigenvalues[1] - 2.0).abs() < 1e-6);
        assert_eq!(spec.negative_count(1e-8), 1);
        let spec = s.riemannian_spectrum(&p, &v3(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(spec.negative_count(1e-8), 0);
    }
}
