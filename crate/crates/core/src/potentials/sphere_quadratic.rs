use std::any::Any;

use crate::linalg::Vector;

use super::{PotentialModel, StationaryPoint, Surface};

/// `V = x₁² + 2x₂² + 3x₃²`, meant to be restricted to the unit sphere.
///
/// The stationary-point metadata refers to the constrained problem: indices
/// are those of the Riemannian Hessian on S².
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereQuadratic;

const WEIGHTS: [f64; 3] = [1.0, 2.0, 3.0];

impl SphereQuadratic {
    pub fn into_model(self) -> PotentialModel {
        PotentialModel::new("sphere_quadratic", self).with_stationary_points(vec![
            StationaryPoint::new("saddle_plus", &[0.0, 1.0, 0.0], 1),
            StationaryPoint::new("saddle_minus", &[0.0, -1.0, 0.0], 1),
            StationaryPoint::new("min_plus", &[1.0, 0.0, 0.0], 0),
            StationaryPoint::new("min_minus", &[-1.0, 0.0, 0.0], 0),
            StationaryPoint::new("max_plus", &[0.0, 0.0, 1.0], 2),
            StationaryPoint::new("max_minus", &[0.0, 0.0, -1.0], 2),
        ])
    }
}

impl Surface for SphereQuadratic {
    fn dim(&self) -> usize {
        3
    }

    fn energy(&self, x: &Vector) -> f64 {
        (0..3).map(|i| WEIGHTS[i] * x[i] * x[i]).sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_fn(3, |i, _| 2.0 * WEIGHTS[i] * x[i])
    }

    fn hessian_vec(&self, _x: &Vector, u: &Vector) -> Vector {
        Vector::from_fn(3, |i, _| 2.0 * WEIGHTS[i] * u[i])
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
