use std::any::Any;

use crate::error::{Result, SaddleError};
use crate::linalg::Vector;

use super::{PotentialModel, StationaryPoint, Surface};

/// `V(x, y) = (x² − 1)²/4 + μy²/2`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell {
    pub mu: f64,
}

impl DoubleWell {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SaddleError::InvalidParameter(format!(
                "double_well needs mu > 0, got {mu}"
            )));
        }
        Ok(DoubleWell { mu })
    }

    pub fn into_model(self) -> PotentialModel {
        PotentialModel::new("double_well", self).with_stationary_points(vec![
            StationaryPoint::new("saddle", &[0.0, 0.0], 1),
            StationaryPoint::new("min_left", &[-1.0, 0.0], 0),
            StationaryPoint::new("min_right", &[1.0, 0.0], 0),
        ])
    }
}

impl Surface for DoubleWell {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, p: &Vector) -> f64 {
        let (x, y) = (p[0], p[1]);
        0.25 * (x * x - 1.0).powi(2) + 0.5 * self.mu * y * y
    }

    fn gradient(&self, p: &Vector) -> Vector {
        let (x, y) = (p[0], p[1]);
        Vector::from_vec(vec![x * x * x - x, self.mu * y])
    }

    fn hessian_vec(&self, p: &Vector, u: &Vector) -> Vector {
        let x = p[0];
        Vector::from_vec(vec![(3.0 * x * x - 1.0) * u[0], self.mu * u[1]])
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
