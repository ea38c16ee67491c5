//! Polynomial test surfaces with known stationary points at the origin.

use std::any::Any;

use nalgebra::DMatrix;

use crate::linalg::Vector;

use super::{PotentialModel, StationaryPoint, Surface};

/// `V(y) = ½ yᵀ H y` for a constant symmetric `H`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    h: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(h: DMatrix<f64>) -> Self {
        assert!(h.is_square(), "quadratic form needs a square matrix");
        let h = (&h + h.transpose()) * 0.5;
        Quadratic { h }
    }

    pub fn diagonal(mu: &[f64]) -> Self {
        Quadratic::new(DMatrix::from_diagonal(&Vector::from_column_slice(mu)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Model with the origin recorded as a stationary point of the right index.
    pub fn into_model(self) -> PotentialModel {
        let index = self
            .h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .filter(|&&l| l < 0.0)
            .count();
        let d = self.h.nrows();
        PotentialModel::new("quadratic", self)
            .with_stationary_points(vec![StationaryPoint::new("origin", &vec![0.0; d], index)])
    }
}

impl Surface for Quadratic {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn energy(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.h * x
    }

    fn hessian_vec(&self, _x: &Vector, u: &Vector) -> Vector {
        &self.h * u
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Three-dimensional diagonal quadratic plus cubic and quartic terms:
///
/// `V = ½Σ dᵢ yᵢ² + c (y₁²y₃ + y₁y₂y₃ + y₂²y₃) + q Σ yᵢ⁴`.
///
/// The perturbation has zero gradient and Hessian at the origin, so the
/// origin keeps the index given by the signs of `d`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedQuadratic {
    pub diag: [f64; 3],
    pub cubic: f64,
    pub quartic: f64,
}

impl PerturbedQuadratic {
    pub fn into_model(self) -> PotentialModel {
        let index = self.diag.iter().filter(|&&l| l < 0.0).count();
        PotentialModel::new("perturbed_quadratic", self)
            .with_stationary_points(vec![StationaryPoint::new("origin", &[0.0; 3], index)])
    }
}

impl Surface for PerturbedQuadratic {
    fn dim(&self) -> usize {
        3
    }

    fn energy(&self, y: &Vector) -> f64 {
        let (a, b, c) = (y[0], y[1], y[2]);
        let quad = 0.5 * (self.diag[0] * a * a + self.diag[1] * b * b + self.diag[2] * c * c);
        quad + self.cubic * (a * a * c + a * b * c + b * b * c)
            + self.quartic * (a.powi(4) + b.powi(4) + c.powi(4))
    }

    fn gradient(&self, y: &Vector) -> Vector {
        let (a, b, c) = (y[0], y[1], y[2]);
        let k = self.cubic;
        let q4 = 4.0 * self.quartic;
        Vector::from_vec(vec![
            self.diag[0] * a + k * (2.0 * a * c + b * c) + q4 * a.powi(3),
            self.diag[1] * b + k * (a * c + 2.0 * b * c) + q4 * b.powi(3),
            self.diag[2] * c + k * (a * a + a * b + b * b) + q4 * c.powi(3),
        ])
    }

    fn hessian_vec(&self, y: &Vector, u: &Vector) -> Vector {
        let (a, b, c) = (y[0], y[1], y[2]);
        let k = self.cubic;
        let q12 = 12.0 * self.quartic;
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[
                self.diag[0] + 2.0 * k * c + q12 * a * a,
                k * c,
                k * (2.0 * a + b),
                k * c,
                self.diag[1] + 2.0 * k * c + q12 * b * b,
                k * (a + 2.0 * b),
                k * (2.0 * a + b),
                k * (a + 2.0 * b),
                self.diag[2] + q12 * c * c,
            ],
        );
        h * u
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
