use serde::{Deserialize, Serialize};

use crate::error::{Result, SaddleError};
use crate::linalg::Vector;
use crate::manifold::geodesic_angle;
use crate::potentials::Surface;

use super::Coefficients;

/// How `y` is mapped onto the great circle through the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SphereProjection {
    /// Nearest point in geodesic distance.
    #[default]
    Geodesic,
    /// Flat projection onto the tangent line, then normalized back to the sphere.
    Retraction,
}

/// Anchor `x` on S², unit tangent `v`, and the tangent complement `ṽ = x × v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicFrame {
    anchor: Vector,
    v: Vector,
    v_perp: Vector,
}

impl GeodesicFrame {
    pub fn on_sphere(x: &Vector, v: &Vector) -> Result<Self> {
        if x.len() != 3 || v.len() != 3 {
            return Err(SaddleError::InvalidParameter(
                "geodesic frames are implemented for S² in R³ only".into(),
            ));
        }
        if (x.norm() - 1.0).abs() > 1e-10 {
            return Err(SaddleError::OffManifold { residual: (x.norm_squared() - 1.0).abs() });
        }
        if (v.norm() - 1.0).abs() > 1e-10 || x.dot(v).abs() > 1e-10 {
            return Err(SaddleError::InvalidParameter("v must be a unit tangent at x".into()));
        }
        let v_perp = x.cross(v);
        Ok(GeodesicFrame { anchor: x.clone(), v: v.clone(), v_perp })
    }

    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn direction(&self) -> &Vector {
        &self.v
    }

    pub fn complement(&self) -> &Vector {
        &self.v_perp
    }
}

#[derive(Debug, Clone)]
pub(super) struct Sphere {
    pub frame: GeodesicFrame,
    pub c: Coefficients,
    pub projection: SphereProjection,
}

/// Value, gradient and Hessian action of `y ↦ V(P_w(y))`, extended
/// homogeneously off the sphere.
struct CircleTerm<'a> {
    x: &'a Vector,
    w: &'a Vector,
    projection: SphereProjection,
}

impl CircleTerm<'_> {
    fn point(&self, y: &Vector) -> Vector {
        match self.projection {
            SphereProjection::Geodesic => {
                let (t, _) = geodesic_angle(self.x.dot(y), self.w.dot(y));
                self.x * t.cos() + self.w * t.sin()
            }
            SphereProjection::Retraction => {
                let b = self.w.dot(y);
                (self.x + self.w * b) / (1.0 + b * b).sqrt()
            }
        }
    }

    fn value(&self, pot: &dyn Surface, y: &Vector) -> f64 {
        pot.energy(&self.point(y))
    }

    fn gradient(&self, pot: &dyn Surface, y: &Vector) -> Vector {
        match self.projection {
            SphereProjection::Geodesic => {
                let (a, b) = (self.x.dot(y), self.w.dot(y));
                let (t, _) = geodesic_angle(a, b);
                let xi = self.x * t.cos() + self.w * t.sin();
                let dxi = self.w * t.cos() - self.x * t.sin();
                let rho = a * a + b * b;
                let dtheta = (self.w * a - self.x * b) / rho;
                dtheta * pot.gradient(&xi).dot(&dxi)
            }
            SphereProjection::Retraction => {
                let b = self.w.dot(y);
                let s = (1.0 + b * b).sqrt();
                let p = (self.x + self.w * b) / s;
                let dp = (self.w - self.x * b) / (s * s * s);
                self.w * pot.gradient(&p).dot(&dp)
            }
        }
    }

    fn hessian_vec(&self, pot: &dyn Surface, y: &Vector, u: &Vector) -> Vector {
        match self.projection {
            SphereProjection::Geodesic => {
                let (a, b) = (self.x.dot(y), self.w.dot(y));
                let (t, _) = geodesic_angle(a, b);
                let xi = self.x * t.cos() + self.w * t.sin();
                let dxi = self.w * t.cos() - self.x * t.sin();
                let rho = a * a + b * b;
                let g = pot.gradient(&xi);
                let c = g.dot(&dxi);
                let dc = dxi.dot(&pot.hessian_vec(&xi, &dxi)) - g.dot(&xi);
                let big_a = self.w * a - self.x * b;
                let big_b = self.x * a + self.w * b;
                let dtheta = &big_a / rho;
                let hess_theta_u =
                    -(&big_a * big_b.dot(u) + &big_b * big_a.dot(u)) / (rho * rho);
                dtheta.clone() * (dc * dtheta.dot(u)) + hess_theta_u * c
            }
            SphereProjection::Retraction => {
                let b = self.w.dot(y);
                let q = 1.0 + b * b;
                let s = q.sqrt();
                let p = (self.x + self.w * b) / s;
                let dp = (self.w - self.x * b) / (q * s);
                let ddp = -(self.x / (q * s)) - (self.w - self.x * b) * (3.0 * b / (q * q * s));
                let g = pot.gradient(&p);
                let second = dp.dot(&pot.hessian_vec(&p, &dp)) + g.dot(&ddp);
                self.w * (second * self.w.dot(u))
            }
        }
    }
}

impl Sphere {
    fn terms(&self) -> (CircleTerm<'_>, CircleTerm<'_>) {
        let x = &self.frame.anchor;
        (
            CircleTerm { x, w: &self.frame.v_perp, projection: self.projection },
            CircleTerm { x, w: &self.frame.v, projection: self.projection },
        )
    }

    pub fn value(&self, pot: &dyn Surface, y: &Vector) -> f64 {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.terms();
        let mut l = 0.0;
        if alpha != 1.0 {
            l += (1.0 - alpha) * pot.energy(y);
        }
        if alpha != 0.0 {
            l += alpha * plane.value(pot, y);
        }
        if beta != 0.0 {
            l -= beta * ray.value(pot, y);
        }
        l
    }

    fn ambient_gradient(&self, pot: &dyn Surface, y: &Vector) -> Vector {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.terms();
        let mut g = Vector::zeros(y.len());
        if alpha != 1.0 {
            g.axpy(1.0 - alpha, &pot.gradient(y), 1.0);
        }
        if alpha != 0.0 {
            g.axpy(alpha, &plane.gradient(pot, y), 1.0);
        }
        if beta != 0.0 {
            g.axpy(-beta, &ray.gradient(pot, y), 1.0);
        }
        g
    }

    pub fn gradient(&self, pot: &dyn Surface, y: &Vector) -> Vector {
        let g = self.ambient_gradient(pot, y);
        &g - y * y.dot(&g)
    }

    /// Riemannian Hessian on the unit sphere: `Π_y ∇²f Π_y u − ⟨y, ∇f⟩ Π_y u`.
    pub fn hessian_vec(&self, pot: &dyn Surface, y: &Vector, u: &Vector) -> Vector {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.terms();
        let ut = u - y * y.dot(u);
        let mut h = Vector::zeros(y.len());
        if alpha != 1.0 {
            h.axpy(1.0 - alpha, &pot.hessian_vec(y, &ut), 1.0);
        }
        if alpha != 0.0 {
            h.axpy(alpha, &plane.hessian_vec(pot, y, &ut), 1.0);
        }
        if beta != 0.0 {
            h.axpy(-beta, &ray.hessian_vec(pot, y, &ut), 1.0);
        }
        let radial = y.dot(&self.ambient_gradient(pot, y));
        let h = &h - y * y.dot(&h);
        h - ut * radial
    }
}
