//! Energy surfaces: the [`Surface`] trait, the checked [`PotentialModel`]
//! wrapper, and the builtin benchmark problems.

mod double_well;
mod lattice;
mod morse;
mod sphere_quadratic;
mod synthetic;
mod three_hole;

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{norm_inf, Vector};

pub use double_well::DoubleWell;
pub use lattice::{build_morse_lattice, MorseClusterSpec, MorseLattice};
pub use morse::{MorseIsland, MorsePair};
pub use sphere_quadratic::SphereQuadratic;
pub use synthetic::{PerturbedQuadratic, Quadratic};
pub use three_hole::ThreeHole;

/// A smooth energy function with gradient and Hessian-vector action.
///
/// Implementations may assume every argument has length [`Surface::dim`];
/// [`PotentialModel`] checks this before dispatching.
pub trait Surface: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn energy(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    /// `∇²V(x) u`. Falls back to central differences of the gradient.
    fn hessian_vec(&self, x: &Vector, u: &Vector) -> Vector {
        fd_hessian_vec(|y| self.gradient(y), x, u)
    }

    fn as_any(&self) -> &dyn Any;
}

/// Central-difference Hessian-vector product along the normalized `u`.
///
/// The step is `1e-5 * (1 + |x|_inf)`.
pub fn fd_hessian_vec<G>(gradient: G, x: &Vector, u: &Vector) -> Vector
where
    G: Fn(&Vector) -> Vector,
{
    let un = u.norm();
    if un == 0.0 {
        return Vector::zeros(x.len());
    }
    let dir = u / un;
    let h = 1e-5 * (1.0 + norm_inf(x));
    let gp = gradient(&(x + &dir * h));
    let gm = gradient(&(x - &dir * h));
    (gp - gm) * (un / (2.0 * h))
}

/// A stationary point known ahead of time, with its Morse index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub label: String,
    pub point: Vec<f64>,
    pub index: usize,
}

impl StationaryPoint {
    pub fn new(label: &str, point: &[f64], index: usize) -> Self {
        StationaryPoint {
            label: label.to_string(),
            point: point.to_vec(),
            index,
        }
    }

    pub fn vector(&self) -> Vector {
        Vector::from_column_slice(&self.point)
    }
}

/// An evaluable energy surface plus metadata.
///
/// Cloning is cheap; the surface is shared.
#[derive(Clone)]
pub struct PotentialModel {
    name: String,
    surface: Arc<dyn Surface>,
    stationary: Vec<StationaryPoint>,
    initial: Option<Vector>,
}

impl fmt::Debug for PotentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl PotentialModel {
    pub fn new<S: Surface + 'static>(name: &str, surface: S) -> Self {
        PotentialModel {
            name: name.to_string(),
            surface: Arc::new(surface),
            stationary: Vec::new(),
            initial: None,
        }
    }

    pub fn with_stationary_points(mut self, points: Vec<StationaryPoint>) -> Self {
        self.stationary = points;
        self
    }

    pub fn with_initial_point(mut self, x: Vector) -> Self {
        self.initial = Some(x);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn stationary_points(&self) -> &[StationaryPoint] {
        &self.stationary
    }

    /// Saddles of index 1 from the stationary-point metadata.
    pub fn known_saddles(&self) -> Vec<&StationaryPoint> {
        self.stationary.iter().filter(|s| s.index == 1).collect()
    }

    /// A reference configuration shipped with the model (the relaxed cluster
    /// geometry for the Morse island), if any.
    pub fn initial_point(&self) -> Option<&Vector> {
        self.initial.as_ref()
    }

    /// Unchecked access to the underlying surface.
    pub fn surface(&self) -> &dyn Surface {
        self.surface.as_ref()
    }

    pub fn downcast<T: 'static>(&self) -> Option<&T> {
        self.surface.as_any().downcast_ref::<T>()
    }

    pub fn energy(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.surface.energy(x))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        Ok(self.surface.gradient(x))
    }

    pub fn hessian_vec(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), u.len())?;
        Ok(self.surface.hessian_vec(x, u))
    }
}

/// The four benchmark surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    DoubleWell,
    ThreeHole,
    SphereQuadratic,
    MorseIsland,
}

impl FromStr for Builtin {
    type Err = SaddleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double_well" => Ok(Builtin::DoubleWell),
            "three_hole" => Ok(Builtin::ThreeHole),
            "sphere_quadratic" => Ok(Builtin::SphereQuadratic),
            "morse_island" => Ok(Builtin::MorseIsland),
            other => Err(SaddleError::UnknownPotential(other.to_string())),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Builtin::DoubleWell => "double_well",
            Builtin::ThreeHole => "three_hole",
            Builtin::SphereQuadratic => "sphere_quadratic",
            Builtin::MorseIsland => "morse_island",
        };
        f.write_str(s)
    }
}

/// Instantiates a builtin surface. Unknown parameter keys are rejected.
pub fn make_builtin(name: Builtin, params: &BTreeMap<String, f64>) -> Result<PotentialModel> {
    let allowed: &[&str] = match name {
        Builtin::DoubleWell => &["mu"],
        Builtin::ThreeHole | Builtin::SphereQuadratic => &[],
        Builtin::MorseIsland => &[
            "A",
            "a",
            "r0",
            "rc",
            "lattice_constant",
            "slab_layers",
            "atoms_per_layer",
            "frozen_layers",
            "island_atoms",
        ],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(SaddleError::InvalidParameter(format!(
            "`{k}` is not a parameter of {name}"
        )));
    }
    match name {
        Builtin::DoubleWell => {
            let mu = params.get("mu").copied().unwrap_or(1.0);
            Ok(DoubleWell::new(mu)?.into_model())
        }
        Builtin::ThreeHole => Ok(ThreeHole.into_model()),
        Builtin::SphereQuadratic => Ok(SphereQuadratic.into_model()),
        Builtin::MorseIsland => {
            let mut spec = MorseClusterSpec::default();
            spec.apply_params(params)?;
            Ok(MorseIsland::new(&spec)?.into_model())
        }
    }
}

/// Convenience for `make_builtin` with an owned name string.
pub fn make_builtin_named(name: &str, params: &BTreeMap<String, f64>) -> Result<PotentialModel> {
    make_builtin(name.parse()?, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(
            make_builtin_named("lennard_jones", &BTreeMap::new()),
            Err(SaddleError::UnknownPotential(_))
        ));
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let mut p = BTreeMap::new();
        p.insert("nu".to_string(), 1.0);
        assert!(make_builtin(Builtin::DoubleWell, &p).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = make_builtin(Builtin::DoubleWell, &BTreeMap::new()).unwrap();
        let x = Vector::zeros(3);
        assert!(matches!(
            m.energy(&x),
            Err(SaddleError::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(m.hessian_vec(&Vector::zeros(2), &x).is_err());
    }

    #[test]
    fn fd_fallback_matches_quadratic_exactly_enough() {
        let q = Quadratic::diagonal(&[1.0, -2.0, 3.0]);
        let x = Vector::from_vec(vec![0.3, 0.1, -0.7]);
        let u = Vector::from_vec(vec![1.0, 1.0, 2.0]);
        let fd = fd_hessian_vec(|y| q.gradient(y), &x, &u);
        let exact = q.hessian_vec(&x, &u);
        assert!((fd - exact).norm() < 1e-8);
    }
}
