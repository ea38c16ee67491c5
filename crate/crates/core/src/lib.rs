//! Saddle-point search by iterative minimization.
//!
//! Each outer step of the iteration computes the Hessian min-mode at the
//! current point, builds a locally convex objective whose minimizer is the
//! next iterate, and minimizes it. Saddles are fixed points of this map and
//! the map's Jacobian vanishes there, so convergence is quadratic.
//!
//! Modules:
//! * [`potentials`]: energy surfaces and the builtin benchmark problems;
//! * [`eigen`]: matrix-free smallest eigenpairs and dense classification;
//! * [`objective`]: the modified objective `L`;
//! * [`subsolve`]: inner minimizers and a Newton baseline;
//! * [`imf`]: the outer iteration and order estimation;
//! * [`gad`]: gentlest ascent dynamics;
//! * [`manifold`]: constraint manifolds and sphere geodesics;
//! * [`harness`]: configs, experiment presets, grids and reports.

pub mod eigen;
pub mod error;
pub mod gad;
pub mod harness;
pub mod imf;
pub mod linalg;
pub mod manifold;
pub mod objective;
pub mod par;
pub mod potentials;
pub mod subsolve;

pub use error::{Result, SaddleError};
pub use linalg::Vector;
pub use par::Execution;
pub use potentials::{make_builtin, Builtin, PotentialModel};
