use crate::linalg::Vector;
use crate::potentials::Surface;

use super::Coefficients;

#[derive(Debug, Clone)]
pub(super) struct Flat {
    pub v: Vector,
    pub c: Coefficients,
}

impl Flat {
    /// `(x + Π⊥(y−x), x + Π(y−x))`.
    fn feet(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        let s = self.v.dot(&(y - x));
        let shift = &self.v * s;
        (y - &shift, x + &shift)
    }

    pub fn value(&self, pot: &dyn Surface, x: &Vector, y: &Vector) -> f64 {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.feet(x, y);
        let mut l = 0.0;
        if alpha != 1.0 {
            l += (1.0 - alpha) * pot.energy(y);
        }
        if alpha != 0.0 {
            l += alpha * pot.energy(&plane);
        }
        if beta != 0.0 {
            l -= beta * pot.energy(&ray);
        }
        l
    }

    pub fn gradient(&self, pot: &dyn Surface, x: &Vector, y: &Vector) -> Vector {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.feet(x, y);
        let v = &self.v;
        let mut g = Vector::zeros(y.len());
        if alpha != 1.0 {
            g.axpy(1.0 - alpha, &pot.gradient(y), 1.0);
        }
        if alpha != 0.0 {
            let g1 = pot.gradient(&plane);
            let along = v.dot(&g1);
            g.axpy(alpha, &g1, 1.0);
            g.axpy(-alpha * along, v, 1.0);
        }
        if beta != 0.0 {
            let along = v.dot(&pot.gradient(&ray));
            g.axpy(-beta * along, v, 1.0);
        }
        g
    }

    pub fn hessian_vec(&self, pot: &dyn Surface, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        let Coefficients { alpha, beta } = self.c;
        let (plane, ray) = self.feet(x, y);
        let v = &self.v;
        let vu = v.dot(u);
        let mut out = Vector::zeros(y.len());
        if alpha != 1.0 {
            out.axpy(1.0 - alpha, &pot.hessian_vec(y, u), 1.0);
        }
        if alpha != 0.0 {
            let w = u - v * vu;
            let hw = pot.hessian_vec(&plane, &w);
            let along = v.dot(&hw);
            out.axpy(alpha, &hw, 1.0);
            out.axpy(-alpha * along, v, 1.0);
        }
        if beta != 0.0 && vu != 0.0 {
            let curv = v.dot(&pot.hessian_vec(&ray, v));
            out.axpy(-beta * curv * vu, v, 1.0);
        }
        out
    }
}
