//! The outer iteration `x⁽ᵏ⁺¹⁾ = Φ(x⁽ᵏ⁾)`.
//!
//! Each step computes the `m` lowest Hessian modes at `x⁽ᵏ⁾`, builds the
//! modified objective anchored there, and minimizes it starting from
//! `x⁽ᵏ⁾`. On the sphere the modes are tangent, the objective uses geodesic
//! projections and the subproblem is solved on the manifold.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_eigensolve, min_modes, EigenConfig, MinModeResult, DEFAULT_DENSE_CAP};
use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{norm_inf, Vector};
use crate::manifold::{solve_constrained_subproblem, ManifoldSpec, TangentSpace};
use crate::objective::{
    build_flat, build_index_m, build_manifold, Coefficients, GeodesicFrame, IndexMCoefficients, ModifiedObjective,
    SphereProjection,
};
use crate::potentials::PotentialModel;
use crate::subsolve::{minimize, SubsolveConfig, SubsolveStatus};

/// Errors at or below this are treated as roundoff by [`estimate_order`].
pub const ORDER_FLOOR: f64 = 1e-14;
/// Default number of trailing errors used by [`estimate_order`].
pub const ORDER_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    #[default]
    None,
    /// Unit sphere in the problem's ambient dimension.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IMFConfig {
    /// `(α, β)` for index 1.
    pub coefficients: Coefficients,
    /// Saddle index `m`.
    pub index: usize,
    /// Subset coefficients for `m > 1`; `β = 2` on the full set when absent.
    pub subset_coefficients: Option<IndexMCoefficients>,
    /// Rescale `α + β` to `1 + λ₂/|λ₁|` each step (index 1, flat only).
    pub adaptive: bool,
    pub eigen: EigenConfig,
    pub subsolve: SubsolveConfig,
    /// On `‖∇V(x)‖∞` (tangent part on a manifold).
    pub grad_tol: f64,
    pub max_outer_iters: usize,
    /// Saddle used for error reporting.
    pub reference: Option<Vec<f64>>,
    pub manifold: ManifoldKind,
    pub sphere_projection: SphereProjection,
    /// `‖x‖` beyond this ends the run with `left_region`.
    pub domain_bound: f64,
    /// Energies below this end the run with `diverged`.
    pub energy_floor: Option<f64>,
    /// Largest dimension for the dense terminal index check.
    pub dense_cap: usize,
}

impl Default for IMFConfig {
    fn default() -> Self {
        IMFConfig {
            coefficients: Coefficients::MIX,
            index: 1,
            subset_coefficients: None,
            adaptive: false,
            eigen: EigenConfig::default(),
            subsolve: SubsolveConfig::default(),
            grad_tol: 1e-10,
            max_outer_iters: 100,
            reference: None,
            manifold: ManifoldKind::None,
            sphere_projection: SphereProjection::Geodesic,
            domain_bound: 1e6,
            energy_floor: None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl IMFConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SaddleError::InvalidParameter(m));
        if self.index == 0 {
            return bad("index must be at least 1".into());
        }
        if self.index == 1 {
            self.coefficients.validate()?;
        } else {
            self.index_m_coefficients().validate(self.index)?;
            if self.manifold != ManifoldKind::None {
                return bad("index-m search is only implemented in flat space".into());
            }
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive".into());
        }
        if !(self.domain_bound > 0.0) {
            return bad("domain_bound must be positive".into());
        }
        self.subsolve.validate()
    }

    pub fn index_m_coefficients(&self) -> IndexMCoefficients {
        self.subset_coefficients.clone().unwrap_or_else(|| IndexMCoefficients::minimal(self.index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub x: Vector,
    /// Lowest modes computed at the previous iterate (empty initially).
    pub v: Vec<Vector>,
    /// Their eigenvalues, ascending.
    pub lambda: Vec<f64>,
    pub outer_iter: usize,
    pub grad_norm: f64,
    pub last_step_norm: f64,
    pub inner_iters: usize,
    pub inner_status: Option<SubsolveStatus>,
    pub near_degenerate: bool,
}

fn manifold_of(p: &PotentialModel, cfg: &IMFConfig) -> Option<ManifoldSpec> {
    match cfg.manifold {
        ManifoldKind::None => None,
        ManifoldKind::Sphere => Some(ManifoldSpec::sphere(p.dim())),
    }
}

/// `‖∇V(x)‖∞`, of the tangent part when on a manifold.
fn force_norm(p: &PotentialModel, m: Option<&ManifoldSpec>, x: &Vector) -> Result<f64> {
    let g = p.gradient(x)?;
    Ok(match m {
        Some(m) => norm_inf(&m.tangent_project(x, &g)?),
        None => norm_inf(&g),
    })
}

impl SearchState {
    pub fn new(p: &PotentialModel, x0: &Vector, cfg: &IMFConfig) -> Result<Self> {
        check_dim(p.dim(), x0.len())?;
        let m = manifold_of(p, cfg);
        if let Some(m) = &m {
            m.check_feasible(x0, crate::manifold::FEASIBILITY_TOL)?;
        }
        Ok(SearchState {
            x: x0.clone(),
            v: Vec::new(),
            lambda: Vec::new(),
            outer_iter: 0,
            grad_norm: force_norm(p, m.as_ref(), x0)?,
            last_step_norm: 0.0,
            inner_iters: 0,
            inner_status: None,
            near_degenerate: false,
        })
    }
}

fn modes_at(
    p: &PotentialModel,
    x: &Vector,
    count: usize,
    warm: &[Vector],
    cfg: &IMFConfig,
    tangent: Option<&TangentSpace>,
) -> Result<MinModeResult> {
    let warm = if warm.is_empty() { None } else { Some(warm) };
    min_modes(p, x, count, warm, &cfg.eigen, tangent)
}

/// The objective `Φ` minimizes when stepping from `s.x`, with the modes used.
pub fn objective_at(p: &PotentialModel, s: &SearchState, cfg: &IMFConfig) -> Result<(ModifiedObjective, MinModeResult)> {
    cfg.validate()?;
    check_dim(p.dim(), s.x.len())?;
    let manifold = manifold_of(p, cfg);
    let tangent = match &manifold {
        Some(m) => Some(m.tangent_space(&s.x)?),
        None => None,
    };
    let want_gap = cfg.adaptive && cfg.index == 1 && manifold.is_none();
    let count = if want_gap { 2 } else { cfg.index };
    let mut modes = modes_at(p, &s.x, count, &s.v, cfg, tangent.as_ref())?;
    if manifold.is_some() {
        // Riemannian eigenvalues on the unit sphere are shifted by −⟨x, ∇V⟩.
        let shift = s.x.dot(&p.gradient(&s.x)?);
        for l in &mut modes.eigenvalues {
            *l -= shift;
        }
    }
    let lambda1 = modes.eigenvalues[0];
    if manifold.is_none() && cfg.subsolve.box_radius.is_none() && lambda1 > 0.0 {
        return Err(SaddleError::UnboundedSubproblem { lambda: lambda1 });
    }
    let l = if manifold.is_some() {
        let frame = GeodesicFrame::on_sphere(&s.x, &modes.eigenvectors[0])?;
        build_manifold(p, &frame, cfg.coefficients, cfg.sphere_projection)?
    } else if cfg.index == 1 {
        let mut c = cfg.coefficients;
        if want_gap && lambda1 < 0.0 && modes.eigenvalues[1] > 0.0 {
            c = c.with_sum(1.0 + modes.eigenvalues[1] / lambda1.abs());
        }
        build_flat(p, &s.x, &modes.eigenvectors[0], c)?
    } else {
        build_index_m(p, &s.x, &modes.eigenvectors, &cfg.index_m_coefficients())?
    };
    if want_gap {
        modes.eigenvalues.truncate(1);
        modes.eigenvectors.truncate(1);
        modes.residual_norms.truncate(1);
    }
    Ok((l, modes))
}

/// One application of `Φ`.
pub fn step(p: &PotentialModel, s: &SearchState, cfg: &IMFConfig) -> Result<SearchState> {
    let annotate = |e: SaddleError| SaddleError::AtIteration { iteration: s.outer_iter, source: Box::new(e) };
    let (l, modes) = objective_at(p, s, cfg).map_err(annotate)?;
    let manifold = manifold_of(p, cfg);
    let solved = match &manifold {
        Some(m) => solve_constrained_subproblem(&l, m, &s.x, &cfg.subsolve),
        None => minimize(&l, &s.x, &cfg.subsolve),
    }
    .map_err(annotate)?;
    let x = solved.y;
    Ok(SearchState {
        grad_norm: force_norm(p, manifold.as_ref(), &x).map_err(annotate)?,
        last_step_norm: (&x - &s.x).norm(),
        x,
        v: modes.eigenvectors,
        lambda: modes.eigenvalues,
        outer_iter: s.outer_iter + 1,
        inner_iters: solved.inner_iters,
        inner_status: Some(solved.status),
        near_degenerate: modes.near_degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Force below tolerance and, when checked, the expected index.
    Converged,
    /// Force below tolerance at a stationary point of another index.
    WrongIndex,
    MaxIters,
    /// Non-finite values or energy below the floor.
    Diverged,
    LeftRegion,
    /// The map stopped moving before the force tolerance was met.
    Stalled,
    /// An eigensolve or subsolve failed; see the message.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub energy: f64,
    /// Distance to the reference saddle, when one is configured.
    pub error: Option<f64>,
    pub grad_norm: f64,
    /// Smallest eigenvalue at this iterate.
    pub lambda1: Option<f64>,
    /// Inner iterations spent producing this iterate.
    pub inner_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub rows: Vec<IterationRecord>,
    pub status: RunStatus,
    /// Negative-eigenvalue count at the terminal point, when verified.
    pub terminal_index: Option<usize>,
    pub reference: Option<Vec<f64>>,
    /// Some min-mode eigensolve saw a near-degenerate lowest pair.
    pub near_degenerate: bool,
    pub message: Option<String>,
}

impl ConvergenceRecord {
    /// Outer iterations performed.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn final_x(&self) -> Vector {
        Vector::from_vec(self.rows.last().map(|r| r.x.clone()).unwrap_or_default())
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.error).collect()
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    /// Recomputes the error column against `reference`.
    pub fn set_reference(&mut self, reference: &[f64]) {
        let r = Vector::from_column_slice(reference);
        for row in &mut self.rows {
            row.error = Some((Vector::from_column_slice(&row.x) - &r).norm());
        }
        self.reference = Some(reference.to_vec());
    }

    /// Order estimate from the error column with the default window.
    pub fn order(&self) -> Result<f64> {
        estimate_order(&self.errors())
    }

    /// One row per outer iteration.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.rows.first().map_or(0, |r| r.x.len());
        let mut header: Vec<String> =
            ["iter", "error", "grad_norm", "lambda1", "inner_iters", "energy"].iter().map(|s| s.to_string()).collect();
        header.extend((0..d).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|e| format!("{e:e}")).unwrap_or_default();
        for r in &self.rows {
            let mut fields = vec![
                r.iter.to_string(),
                opt(r.error),
                format!("{:e}", r.grad_norm),
                opt(r.lambda1),
                r.inner_iters.to_string(),
                format!("{:e}", r.energy),
            ];
            fields.extend(r.x.iter().map(|c| format!("{c:e}")));
            out.write_record(&fields)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

/// Iterates `Φ` from `x0` until the force tolerance or the iteration cap.
/// Solver failures end the run with a status and message rather than an error.
pub fn run(p: &PotentialModel, x0: &Vector, cfg: &IMFConfig) -> Result<ConvergenceRecord> {
    cfg.validate()?;
    let mut state = SearchState::new(p, x0, cfg)?;
    let manifold = manifold_of(p, cfg);
    let reference = match &cfg.reference {
        Some(r) => {
            check_dim(p.dim(), r.len())?;
            Some(Vector::from_column_slice(r))
        }
        None => None,
    };
    let row = |s: &SearchState, energy: f64| IterationRecord {
        iter: s.outer_iter,
        x: s.x.iter().copied().collect(),
        energy,
        error: reference.as_ref().map(|r| (&s.x - r).norm()),
        grad_norm: s.grad_norm,
        lambda1: None,
        inner_iters: s.inner_iters,
    };
    let mut rows = vec![row(&state, p.energy(&state.x)?)];
    let mut near_degenerate = false;
    let mut message = None;
    let mut status = RunStatus::MaxIters;

    loop {
        if state.grad_norm <= cfg.grad_tol {
            status = RunStatus::Converged;
            break;
        }
        if state.outer_iter >= cfg.max_outer_iters {
            break;
        }
        let next = match step(p, &state, cfg) {
            Ok(n) => n,
            Err(e) => {
                status = RunStatus::Failed;
                message = Some(e.to_string());
                break;
            }
        };
        rows.last_mut().expect("rows start non-empty").lambda1 = next.lambda.first().copied();
        near_degenerate |= next.near_degenerate;
        let energy = p.energy(&next.x)?;
        let finite = energy.is_finite() && next.x.iter().all(|c| c.is_finite()) && next.grad_norm.is_finite();
        let moved = next.last_step_norm;
        rows.push(row(&next, energy));
        state = next;
        if !finite || cfg.energy_floor.is_some_and(|f| energy < f) {
            status = RunStatus::Diverged;
            break;
        }
        if state.x.norm() > cfg.domain_bound {
            status = RunStatus::LeftRegion;
            break;
        }
        if moved == 0.0 && state.grad_norm > cfg.grad_tol {
            status = RunStatus::Stalled;
            break;
        }
    }

    let mut terminal_index = None;
    if status == RunStatus::Converged && p.dim() <= cfg.dense_cap {
        let spectrum = match &manifold {
            Some(m) => m.riemannian_spectrum(p, &state.x)?,
            None => dense_eigensolve(p, &state.x, cfg.dense_cap)?,
        };
        let idx = spectrum.negative_count(1e-10);
        rows.last_mut().expect("non-empty").lambda1 = spectrum.eigenvalues.first().copied();
        terminal_index = Some(idx);
        if idx != cfg.index {
            status = RunStatus::WrongIndex;
        }
    }
    Ok(ConvergenceRecord {
        rows,
        status,
        terminal_index,
        reference: cfg.reference.clone(),
        near_degenerate,
        message,
    })
}

/// Central-difference Jacobian of `x ↦ Φ(x)` (flat space only).
pub fn jacobian_of_phi(p: &PotentialModel, x: &Vector, cfg: &IMFConfig, h: f64) -> Result<DMatrix<f64>> {
    check_dim(p.dim(), x.len())?;
    if cfg.manifold != ManifoldKind::None {
        return Err(SaddleError::InvalidParameter("jacobian_of_phi is defined in flat space".into()));
    }
    if !(h > 0.0) {
        return Err(SaddleError::InvalidParameter("h must be positive".into()));
    }
    let phi = |z: &Vector| -> Result<Vector> { Ok(step(p, &SearchState::new(p, z, cfg)?, cfg)?.x) };
    let d = p.dim();
    let mut j = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = h;
        let col = (phi(&(x + &e))? - phi(&(x - &e))?) / (2.0 * h);
        j.set_column(i, &col);
    }
    Ok(j)
}

/// Least-squares slope of `ln e_{k+1}` against `ln e_k` over the last
/// [`ORDER_WINDOW`] usable errors.
pub fn estimate_order(errors: &[f64]) -> Result<f64> {
    estimate_order_window(errors, ORDER_WINDOW)
}

/// As [`estimate_order`] with `window` trailing errors (at least 3). Errors at
/// or below [`ORDER_FLOOR`] are dropped from the tail; the rest must decrease
/// strictly over the window.
pub fn estimate_order_window(errors: &[f64], window: usize) -> Result<f64> {
    if window < 3 {
        return Err(SaddleError::InvalidParameter("order window must be at least 3".into()));
    }
    let mut end = errors.len();
    while end > 0 && errors[end - 1] <= ORDER_FLOOR {
        end -= 1;
    }
    let usable = &errors[..end];
    let mut start = end;
    while start > 0 && usable[start - 1].is_finite() && (start == end || usable[start - 1] > usable[start]) {
        start -= 1;
    }
    let run = &usable[start..];
    if run.len() < window {
        return Err(SaddleError::InsufficientData { needed: window, found: run.len() });
    }
    let tail = &run[run.len() - window..];
    let pts: Vec<(f64, f64)> = tail.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
