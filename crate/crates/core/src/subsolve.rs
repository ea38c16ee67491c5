//! Inner minimizers for `min_y L(y)` and a Newton baseline.
//!
//! Both methods take backtracking Armijo steps (`c = 1e-4`, halving). Nonlinear
//! CG uses Polak-Ribière+ directions and starts each line search at the Newton
//! step along the direction, `−⟨g,d⟩/⟨d,Hd⟩`, so converged subproblems reach
//! roundoff rather than stalling at the square root of it. An optional
//! `∞`-norm trust box around the start point is enforced by clipping every
//! trial point; on a manifold, trial points are retracted instead.

use serde::{Deserialize, Serialize};

use crate::eigen::{dense_eigensolve, dense_hessian, DEFAULT_DENSE_CAP};
use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{norm_inf, Vector};
use crate::manifold::ManifoldSpec;
use crate::objective::Objective;
use crate::par::Execution;
use crate::potentials::PotentialModel;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sd,
    #[default]
    Ncg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsolveConfig {
    pub method: Method,
    pub max_inner_iters: usize,
    /// On the `∞`-norm of the (projected) gradient of `L`.
    pub grad_tol: f64,
    /// Initial trial step for `sd`.
    pub step_size: f64,
    pub box_radius: Option<f64>,
    /// Restart CG with steepest descent every this many iterations.
    pub ncg_restart: usize,
}

impl Default for SubsolveConfig {
    fn default() -> Self {
        SubsolveConfig {
            method: Method::Ncg,
            max_inner_iters: 1000,
            grad_tol: 1e-14,
            step_size: 0.1,
            box_radius: None,
            ncg_restart: 50,
        }
    }
}

impl SubsolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SaddleError::InvalidParameter(m.into()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.max_inner_iters == 0 {
            return bad("max_inner_iters must be at least 1");
        }
        if self.ncg_restart == 0 {
            return bad("ncg_restart must be at least 1");
        }
        if let Some(r) = self.box_radius {
            if !(r > 0.0) || !r.is_finite() {
                return bad("box_radius must be positive and finite");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsolveStatus {
    Converged,
    MaxIters,
    /// No acceptable step could be found; the iterate is at roundoff level.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsolveResult {
    pub y: Vector,
    pub value: f64,
    pub inner_iters: usize,
    /// `∞`-norm of the projected gradient at `y`.
    pub grad_norm: f64,
    pub status: SubsolveStatus,
}

/// Where iterates live and how steps are taken.
trait Space {
    /// Removes components of the search direction `d` that cannot be followed
    /// from `y` (outward across box faces, normal to the manifold).
    fn project(&self, y: &Vector, d: &Vector) -> Vector;
    /// Same for a gradient, whose negative is the direction followed.
    fn project_gradient(&self, y: &Vector, g: &Vector) -> Vector {
        -self.project(y, &-g)
    }
    fn step(&self, y: &Vector, d: &Vector, t: f64) -> Result<Vector>;
    /// Longest step along `d` that stays feasible without bending.
    fn max_step(&self, _y: &Vector, _d: &Vector) -> f64 {
        f64::INFINITY
    }
    /// Components a gradient step cannot follow from `y`; a change restarts ncg.
    fn blocked(&self, _y: &Vector, _g: &Vector) -> Vec<bool> {
        Vec::new()
    }
}

struct Flat {
    bounds: Option<(Vector, Vector)>,
}

impl Flat {
    fn new(y0: &Vector, radius: Option<f64>) -> Self {
        let bounds = radius.map(|r| {
            let lo = y0.map(|c| {
                let mut b = c - r;
                while c - b > r {
                    b = b.next_up();
                }
                b
            });
            let hi = y0.map(|c| {
                let mut b = c + r;
                while b - c > r {
                    b = b.next_down();
                }
                b
            });
            (lo, hi)
        });
        Flat { bounds }
    }
}

impl Space for Flat {
    fn project(&self, y: &Vector, u: &Vector) -> Vector {
        match &self.bounds {
            None => u.clone(),
            Some((lo, hi)) => Vector::from_fn(u.len(), |i, _| {
                let leaving = (y[i] >= hi[i] && u[i] > 0.0) || (y[i] <= lo[i] && u[i] < 0.0);
                if leaving {
                    0.0
                } else {
                    u[i]
                }
            }),
        }
    }

    fn max_step(&self, y: &Vector, d: &Vector) -> f64 {
        let Some((lo, hi)) = &self.bounds else {
            return f64::INFINITY;
        };
        (0..d.len())
            .filter_map(|i| match d[i] {
                c if c > 0.0 => Some((hi[i] - y[i]) / c),
                c if c < 0.0 => Some((lo[i] - y[i]) / c),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    fn blocked(&self, y: &Vector, g: &Vector) -> Vec<bool> {
        match &self.bounds {
            None => Vec::new(),
            Some((lo, hi)) => (0..g.len()).map(|i| (y[i] >= hi[i] && g[i] < 0.0) || (y[i] <= lo[i] && g[i] > 0.0)).collect(),
        }
    }

    fn step(&self, y: &Vector, d: &Vector, t: f64) -> Result<Vector> {
        let mut z = y + d * t;
        if let Some((lo, hi)) = &self.bounds {
            for i in 0..z.len() {
                z[i] = z[i].clamp(lo[i], hi[i]);
            }
        }
        Ok(z)
    }
}

struct OnManifold<'a> {
    spec: &'a ManifoldSpec,
}

impl Space for OnManifold<'_> {
    fn project(&self, y: &Vector, u: &Vector) -> Vector {
        self.spec.tangent_project(y, u).unwrap_or_else(|_| u.clone())
    }

    fn step(&self, y: &Vector, d: &Vector, t: f64) -> Result<Vector> {
        self.spec.retract(y, &(d * t))
    }
}

/// Approximate minimizer of `l` from `y0`, honoring `cfg.box_radius`.
pub fn minimize(l: &dyn Objective, y0: &Vector, cfg: &SubsolveConfig) -> Result<SubsolveResult> {
    check_dim(l.dim(), y0.len())?;
    cfg.validate()?;
    engine(l, y0, cfg, &Flat::new(y0, cfg.box_radius))
}

/// Minimizer of `l` over the manifold `m` from the feasible `y0`: descent in
/// the tangent space followed by retraction. The trust box is not used here.
pub fn minimize_on_manifold(
    l: &dyn Objective,
    m: &ManifoldSpec,
    y0: &Vector,
    cfg: &SubsolveConfig,
) -> Result<SubsolveResult> {
    check_dim(l.dim(), y0.len())?;
    check_dim(m.ambient_dim(), y0.len())?;
    cfg.validate()?;
    m.check_feasible(y0, crate::manifold::FEASIBILITY_TOL)?;
    engine(l, y0, cfg, &OnManifold { spec: m })
}

fn engine(l: &dyn Objective, y0: &Vector, cfg: &SubsolveConfig, space: &dyn Space) -> Result<SubsolveResult> {
    let mut y = y0.clone();
    let mut f = l.value(&y);
    if !f.is_finite() {
        return Err(SaddleError::InnerDivergence { iterations: 0, reason: format!("L(y0) = {f}") });
    }
    let raw = l.gradient(&y);
    let mut blocked = space.blocked(&y, &raw);
    let mut g = space.project_gradient(&y, &raw);
    let mut d_prev: Option<(Vector, Vector)> = None;
    let mut since_restart = 0;
    let mut last_t = 1.0_f64;

    for k in 0..cfg.max_inner_iters {
        let gnorm = norm_inf(&g);
        if gnorm <= cfg.grad_tol {
            return Ok(SubsolveResult { y, value: f, inner_iters: k, grad_norm: gnorm, status: SubsolveStatus::Converged });
        }

        let steepest = -&g;
        let mut d = match (cfg.method, &d_prev) {
            (Method::Ncg, Some((gp, dp))) if since_restart < cfg.ncg_restart => {
                let gp = space.project_gradient(&y, gp);
                let beta = (g.dot(&(&g - &gp)) / gp.dot(&gp)).max(0.0);
                let d = &steepest + space.project(&y, dp) * beta;
                if d.dot(&g) < 0.0 {
                    since_restart += 1;
                    d
                } else {
                    since_restart = 0;
                    steepest.clone()
                }
            }
            _ => {
                since_restart = 0;
                steepest.clone()
            }
        };
        d = space.project(&y, &d);

        let mut accepted = line_search(l, space, cfg, &y, f, &g, &d, &mut last_t)?;
        if accepted.is_none() && d != steepest {
            since_restart = 0;
            d = space.project(&y, &steepest);
            accepted = line_search(l, space, cfg, &y, f, &g, &d, &mut last_t)?;
        }
        let Some((y_new, f_new)) = accepted else {
            return Ok(SubsolveResult { y, value: f, inner_iters: k, grad_norm: gnorm, status: SubsolveStatus::Stalled });
        };
        let raw = l.gradient(&y_new);
        if !raw.iter().all(|c| c.is_finite()) {
            return Err(SaddleError::InnerDivergence { iterations: k + 1, reason: "non-finite gradient".into() });
        }
        let blocked_new = space.blocked(&y_new, &raw);
        let g_new = space.project_gradient(&y_new, &raw);
        d_prev = if blocked_new == blocked { Some((g, d)) } else { None };
        blocked = blocked_new;
        y = y_new;
        f = f_new;
        g = g_new;
    }
    let grad_norm = norm_inf(&g);
    let status = if grad_norm <= cfg.grad_tol { SubsolveStatus::Converged } else { SubsolveStatus::MaxIters };
    Ok(SubsolveResult { y, value: f, inner_iters: cfg.max_inner_iters, grad_norm, status })
}

/// Backtracking from the initial trial step. Returns the accepted point, or
/// `None` when no trial passes (roundoff-level stall).
#[allow(clippy::too_many_arguments)]
fn line_search(
    l: &dyn Objective,
    space: &dyn Space,
    cfg: &SubsolveConfig,
    y: &Vector,
    f: f64,
    g: &Vector,
    d: &Vector,
    last_t: &mut f64,
) -> Result<Option<(Vector, f64)>> {
    let slope = g.dot(d);
    if !(slope < 0.0) {
        return Ok(None);
    }
    let mut t = match cfg.method {
        Method::Sd => cfg.step_size,
        Method::Ncg => {
            let curvature = d.dot(&l.hessian_vec(y, d));
            if curvature > 0.0 && curvature.is_finite() {
                -slope / curvature
            } else {
                match cfg.box_radius {
                    Some(r) => 2.0 * r / norm_inf(d),
                    None => 2.0 * *last_t,
                }
            }
        }
    };
    t = t.min(space.max_step(y, d));
    if !(t > 0.0) {
        return Ok(None);
    }
    let roundoff = 64.0 * f64::EPSILON * l.roundoff_scale(y, f).max(1.0);
    let gnorm = norm_inf(g);
    for _ in 0..MAX_HALVINGS {
        let z = space.step(y, d, t)?;
        let fz = l.value(&z);
        if fz == f64::NEG_INFINITY {
            return Err(SaddleError::InnerDivergence { iterations: 0, reason: format!("L = {fz} at trial point") });
        }
        // Overflow far from y (inf − inf) is treated as a rejected trial.
        if fz.is_nan() {
            t *= 0.5;
            continue;
        }
        let predicted = g.dot(&(&z - y));
        if fz <= f + ARMIJO_C * predicted && z != *y {
            *last_t = t;
            return Ok(Some((z, fz)));
        }
        // Near the minimizer value differences drown in roundoff; accept a
        // step that stays level and shrinks the gradient.
        if fz <= f + roundoff && z != *y {
            let gz = space.project_gradient(&z, &l.gradient(&z));
            if norm_inf(&gz) < gnorm {
                *last_t = t;
                return Ok(Some((z, fz)));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// `y0 − δt ∇L(y0)`: one explicit steepest-descent step.
pub fn sd_single_step(l: &dyn Objective, y0: &Vector, dt: f64) -> Result<Vector> {
    check_dim(l.dim(), y0.len())?;
    if !(dt > 0.0) {
        return Err(SaddleError::InvalidParameter("δt must be positive".into()));
    }
    Ok(y0 - l.gradient(y0) * dt)
}

/// Largest Newton step accepted before the baseline is declared divergent.
pub const NEWTON_MAX_STEP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonFailure {
    SingularHessian,
    StepTooLarge,
    MaxIters,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub x: Vector,
    pub iterations: usize,
    /// Number of negative Hessian eigenvalues at convergence, or the failure.
    pub outcome: std::result::Result<usize, NewtonFailure>,
}

/// Plain Newton iteration on `∇V = 0` with dense solves.
pub fn newton_stationary(p: &PotentialModel, x0: &Vector, tol: f64, max_iters: usize) -> Result<NewtonResult> {
    check_dim(p.dim(), x0.len())?;
    if p.dim() > DEFAULT_DENSE_CAP {
        return Err(SaddleError::DenseCapExceeded { dim: p.dim(), cap: DEFAULT_DENSE_CAP });
    }
    let fail = |x: Vector, iterations, why| Ok(NewtonResult { x, iterations, outcome: Err(why) });
    let mut x = x0.clone();
    for k in 0..=max_iters {
        let g = p.gradient(&x)?;
        if !g.iter().all(|c| c.is_finite()) {
            return fail(x, k, NewtonFailure::NonFinite);
        }
        if norm_inf(&g) <= tol {
            let index = dense_eigensolve(p, &x, DEFAULT_DENSE_CAP)?.negative_count(1e-10);
            return Ok(NewtonResult { x, iterations: k, outcome: Ok(index) });
        }
        if k == max_iters {
            break;
        }
        let h = dense_hessian(p, &x, Execution::Sequential)?;
        let Some(step) = h.lu().solve(&g) else {
            return fail(x, k, NewtonFailure::SingularHessian);
        };
        if !step.iter().all(|c| c.is_finite()) {
            return fail(x, k, NewtonFailure::SingularHessian);
        }
        if step.norm() > NEWTON_MAX_STEP {
            return fail(x, k, NewtonFailure::StepTooLarge);
        }
        x -= step;
    }
    fail(x, max_iters, NewtonFailure::MaxIters)
}
