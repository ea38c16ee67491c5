use std::any::Any;

use crate::linalg::Vector;

use super::{PotentialModel, StationaryPoint, Surface};

/// Gaussian wells/bumps `(amplitude, centre_x, centre_y)`, each contributing
/// `amplitude · exp(−(x−cx)² − (y−cy)²)`.
const GAUSSIANS: [(f64, f64, f64); 4] = [
    (3.0, 0.0, 1.0 / 3.0),
    (-3.0, 0.0, 5.0 / 3.0),
    (-5.0, 1.0, 0.0),
    (-5.0, -1.0, 0.0),
];
const QUARTIC: f64 = 0.2;

/// The three-hole surface: three minima near `(±1, 0)` and `(0, 1.5)`, a
/// maximum near `(0, 0.5)`, and three index-1 saddles.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThreeHole;

impl ThreeHole {
    pub fn into_model(self) -> PotentialModel {
        PotentialModel::new("three_hole", self).with_stationary_points(vec![
            StationaryPoint::new("SP1", &[0.0, -0.31582], 1),
            StationaryPoint::new("SP2", &[-0.61727, 1.10273], 1),
            StationaryPoint::new("SP3", &[0.61727, 1.10273], 1),
            StationaryPoint::new("MIN_left", &[-1.04805, -0.04209], 0),
            StationaryPoint::new("MIN_right", &[1.04805, -0.04209], 0),
            StationaryPoint::new("MIN_top", &[0.0, 1.53708], 0),
            StationaryPoint::new("MAX", &[0.0, 0.51919], 2),
        ])
    }
}

impl Surface for ThreeHole {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, p: &Vector) -> f64 {
        let (x, y) = (p[0], p[1]);
        let wells: f64 = GAUSSIANS
            .iter()
            .map(|&(c, cx, cy)| c * (-(x - cx).powi(2) - (y - cy).powi(2)).exp())
            .sum();
        wells + QUARTIC * x.powi(4) + QUARTIC * (y - 1.0 / 3.0).powi(4)
    }

    fn gradient(&self, p: &Vector) -> Vector {
        let (x, y) = (p[0], p[1]);
        let mut gx = 4.0 * QUARTIC * x.powi(3);
        let mut gy = 4.0 * QUARTIC * (y - 1.0 / 3.0).powi(3);
        for &(c, cx, cy) in &GAUSSIANS {
            let (dx, dy) = (x - cx, y - cy);
            let e = c * (-dx * dx - dy * dy).exp();
            gx -= 2.0 * dx * e;
            gy -= 2.0 * dy * e;
        }
        Vector::from_vec(vec![gx, gy])
    }

    fn hessian_vec(&self, p: &Vector, u: &Vector) -> Vector {
        let (x, y) = (p[0], p[1]);
        let mut hxx = 12.0 * QUARTIC * x * x;
        let mut hyy = 12.0 * QUARTIC * (y - 1.0 / 3.0).powi(2);
        let mut hxy = 0.0;
        for &(c, cx, cy) in &GAUSSIANS {
            let (dx, dy) = (x - cx, y - cy);
            let e = c * (-dx * dx - dy * dy).exp();
            hxx += (4.0 * dx * dx - 2.0) * e;
            hyy += (4.0 * dy * dy - 2.0) * e;
            hxy += 4.0 * dx * dy * e;
        }
        Vector::from_vec(vec![hxx * u[0] + hxy * u[1], hxy * u[0] + hyy * u[1]])
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
