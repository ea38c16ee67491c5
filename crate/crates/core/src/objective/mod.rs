//! The per-iteration modified objective `L(y; x, v, α, β)`.
//!
//! Three constructions share one type:
//!
//! * flat index-1: `(1−α)V(y) + αV(x + Π⊥(y−x)) − βV(x + Π(y−x))`, `Π = vvᵀ`;
//! * index-m: the same with one `(α_s, β_s)` pair per nonempty subset `s` of
//!   the `m` directions and `Π_s` the projector onto their span;
//! * sphere: `Π⊥` and `Π` are replaced by nearest-point maps onto great circles
//!   through the anchor (or by the naive retraction of the flat projection).
//!
//! Only projectors enter, so every construction is invariant under flipping
//! the sign of any direction.

mod flat;
mod index_m;
mod sphere;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{orthonormality_defect, symmetrize, Vector};
use crate::manifold::FEASIBILITY_TOL;
use crate::potentials::PotentialModel;

pub use index_m::{IndexMCoefficients, SubsetCoefficient};
pub use sphere::{GeodesicFrame, SphereProjection};

/// A smooth function with gradient and Hessian-vector action, as seen by the
/// inner minimizers. Arguments are assumed to have the right length.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &Vector) -> f64;
    fn gradient(&self, y: &Vector) -> Vector;
    fn hessian_vec(&self, y: &Vector, u: &Vector) -> Vector;
    /// Magnitude that sets the roundoff level of `value` near `y`, where the
    /// value there is `f`.
    fn roundoff_scale(&self, _y: &Vector, f: f64) -> f64 {
        f.abs()
    }
}

/// Assembles the Hessian of `obj` at `y` from unit-vector products.
pub fn dense_objective_hessian(obj: &dyn Objective, y: &Vector) -> DMatrix<f64> {
    let d = obj.dim();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        h.set_column(i, &obj.hessian_vec(y, &e));
    }
    symmetrize(&h)
}

/// Plain `V`, so the same minimizers can relax configurations.
pub struct EnergyObjective<'a>(pub &'a PotentialModel);

impl Objective for EnergyObjective<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, y: &Vector) -> f64 {
        self.0.surface().energy(y)
    }
    fn gradient(&self, y: &Vector) -> Vector {
        self.0.surface().gradient(y)
    }
    fn hessian_vec(&self, y: &Vector, u: &Vector) -> Vector {
        self.0.surface().hessian_vec(y, u)
    }
}

/// `(α, β)` for the index-1 constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl Coefficients {
    /// `V + W₁`: reflect `V` on the hyperplane through `x` normal to `v`.
    pub const W1: Coefficients = Coefficients { alpha: 2.0, beta: 0.0 };
    /// `V + W₂`: reverse `V` along the ray through `x` in direction `v`.
    pub const W2: Coefficients = Coefficients { alpha: 0.0, beta: 2.0 };
    /// `(2V + W₁ + W₂)/2`.
    pub const MIX: Coefficients = Coefficients { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Self {
        Coefficients { alpha, beta }
    }

    pub fn sum(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.beta.is_finite() && self.sum() > 1.0 {
            Ok(())
        } else {
            Err(SaddleError::CoefficientCondition { sum: self.sum() })
        }
    }

    /// Same `α : β` split with the sum rescaled to `target`.
    pub fn with_sum(&self, target: f64) -> Coefficients {
        let s = self.sum();
        Coefficients { alpha: self.alpha * target / s, beta: self.beta * target / s }
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients::MIX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Flat,
    IndexM,
    ManifoldGeodesic,
    ManifoldRetraction,
}

#[derive(Debug, Clone)]
enum Kind {
    Flat(flat::Flat),
    IndexM(index_m::IndexM),
    Sphere(sphere::Sphere),
}

/// `L(·; x, …)`, immutable once built.
#[derive(Debug, Clone)]
pub struct ModifiedObjective {
    potential: PotentialModel,
    anchor: Vector,
    kind: Kind,
    /// `Σ|weight| · |V(x)|`: the terms of `L` nearly cancel, so their size,
    /// not `|L|`, bounds the roundoff in a value.
    scale: f64,
}

fn anchor_scale(p: &PotentialModel, x: &Vector, weights: impl IntoIterator<Item = f64>) -> f64 {
    let w: f64 = weights.into_iter().map(f64::abs).sum();
    w * p.surface().energy(x).abs()
}

fn check_unit(v: &Vector) -> Result<()> {
    let deviation = (v.norm() - 1.0).abs();
    if deviation > 1e-10 {
        Err(SaddleError::NotOrthonormal { deviation })
    } else {
        Ok(())
    }
}

/// Flat index-1 objective anchored at `x` with unit direction `v`.
pub fn build_flat(
    p: &PotentialModel,
    x: &Vector,
    v: &Vector,
    coefficients: Coefficients,
) -> Result<ModifiedObjective> {
    check_dim(p.dim(), x.len())?;
    check_dim(p.dim(), v.len())?;
    coefficients.validate()?;
    check_unit(v)?;
    Ok(ModifiedObjective {
        potential: p.clone(),
        anchor: x.clone(),
        kind: Kind::Flat(flat::Flat { v: v.clone(), c: coefficients }),
        scale: anchor_scale(p, x, [1.0 - coefficients.alpha, coefficients.alpha, coefficients.beta]),
    })
}

/// Index-m objective over all nonempty subsets of the orthonormal `dirs`.
pub fn build_index_m(
    p: &PotentialModel,
    x: &Vector,
    dirs: &[Vector],
    coefficients: &IndexMCoefficients,
) -> Result<ModifiedObjective> {
    check_dim(p.dim(), x.len())?;
    for d in dirs {
        check_dim(p.dim(), d.len())?;
    }
    let deviation = orthonormality_defect(dirs);
    if dirs.is_empty() || deviation > 1e-10 {
        return Err(SaddleError::NotOrthonormal { deviation });
    }
    coefficients.validate(dirs.len())?;
    let alpha_total: f64 = coefficients.terms.iter().map(|t| t.alpha).sum();
    let weights = coefficients.terms.iter().flat_map(|t| [t.alpha, t.beta]).chain([1.0 - alpha_total]);
    Ok(ModifiedObjective {
        potential: p.clone(),
        anchor: x.clone(),
        kind: Kind::IndexM(index_m::IndexM::new(dirs.to_vec(), coefficients)),
        scale: anchor_scale(p, x, weights),
    })
}

/// Sphere objective: `(1−α)V(y) + αV(P_ṽ(y)) − βV(P_v(y))` where `P_w` maps
/// onto the great circle through `x` with tangent `w`.
pub fn build_manifold(
    p: &PotentialModel,
    frame: &GeodesicFrame,
    coefficients: Coefficients,
    projection: SphereProjection,
) -> Result<ModifiedObjective> {
    check_dim(p.dim(), frame.anchor().len())?;
    coefficients.validate()?;
    Ok(ModifiedObjective {
        potential: p.clone(),
        anchor: frame.anchor().clone(),
        kind: Kind::Sphere(sphere::Sphere { frame: frame.clone(), c: coefficients, projection }),
        scale: anchor_scale(p, frame.anchor(), [1.0 - coefficients.alpha, coefficients.alpha, coefficients.beta]),
    })
}

impl ModifiedObjective {
    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn potential(&self) -> &PotentialModel {
        &self.potential
    }

    pub fn variant(&self) -> Variant {
        match &self.kind {
            Kind::Flat(_) => Variant::Flat,
            Kind::IndexM(_) => Variant::IndexM,
            Kind::Sphere(s) => match s.projection {
                SphereProjection::Geodesic => Variant::ManifoldGeodesic,
                SphereProjection::Retraction => Variant::ManifoldRetraction,
            },
        }
    }

    pub fn is_manifold(&self) -> bool {
        matches!(self.kind, Kind::Sphere(_))
    }

    fn check(&self, y: &Vector) -> Result<()> {
        check_dim(self.potential.dim(), y.len())?;
        if let Kind::Sphere(_) = self.kind {
            let residual = (y.norm_squared() - 1.0).abs();
            if residual > FEASIBILITY_TOL {
                return Err(SaddleError::OffManifold { residual });
            }
        }
        Ok(())
    }

    pub fn value(&self, y: &Vector) -> Result<f64> {
        self.check(y)?;
        Ok(Objective::value(self, y))
    }

    /// Euclidean gradient for flat variants, Riemannian gradient on the sphere.
    pub fn gradient(&self, y: &Vector) -> Result<Vector> {
        self.check(y)?;
        Ok(Objective::gradient(self, y))
    }

    /// Hessian action; on the sphere the Riemannian Hessian applied to the
    /// tangent part of `u`.
    pub fn hessian_vec(&self, y: &Vector, u: &Vector) -> Result<Vector> {
        self.check(y)?;
        check_dim(self.potential.dim(), u.len())?;
        Ok(Objective::hessian_vec(self, y, u))
    }
}

impl Objective for ModifiedObjective {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn value(&self, y: &Vector) -> f64 {
        let s = self.potential.surface();
        match &self.kind {
            Kind::Flat(f) => f.value(s, &self.anchor, y),
            Kind::IndexM(m) => m.value(s, &self.anchor, y),
            Kind::Sphere(k) => k.value(s, y),
        }
    }

    fn gradient(&self, y: &Vector) -> Vector {
        let s = self.potential.surface();
        match &self.kind {
            Kind::Flat(f) => f.gradient(s, &self.anchor, y),
            Kind::IndexM(m) => m.gradient(s, &self.anchor, y),
            Kind::Sphere(k) => k.gradient(s, y),
        }
    }

    fn hessian_vec(&self, y: &Vector, u: &Vector) -> Vector {
        let s = self.potential.surface();
        match &self.kind {
            Kind::Flat(f) => f.hessian_vec(s, &self.anchor, y, u),
            Kind::IndexM(m) => m.hessian_vec(s, &self.anchor, y, u),
            Kind::Sphere(k) => k.hessian_vec(s, y, u),
        }
    }

    fn roundoff_scale(&self, _y: &Vector, f: f64) -> f64 {
        f.abs().max(self.scale)
    }
}

#[cfg(test)]
mod tests;
