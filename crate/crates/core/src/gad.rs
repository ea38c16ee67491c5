//! Gentlest ascent dynamics with explicit Euler stepping.
//!
//! `ẋ = −∇V + 2⟨∇V,v⟩v/⟨v,v⟩`, `γv̇ = −Hv + ⟨v,Hv⟩v/⟨v,v⟩`. Euler does not
//! preserve `‖v‖`, so `v` is renormalized after every step. On a manifold
//! both forces are projected onto the tangent space and `x` is retracted.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SaddleError};
use crate::linalg::{norm_inf, Vector};
use crate::manifold::{ManifoldSpec, FEASIBILITY_TOL};
use crate::potentials::PotentialModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GADState {
    pub x: Vector,
    pub v: Vector,
    pub t: f64,
    pub gamma: f64,
}

impl GADState {
    /// Starts at time 0 with `v` normalized.
    pub fn new(x: Vector, v: Vector, gamma: f64) -> Result<Self> {
        check_dim(x.len(), v.len())?;
        if !(gamma > 0.0) {
            return Err(SaddleError::InvalidParameter("γ must be positive".into()));
        }
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(SaddleError::InvalidParameter("v must be nonzero".into()));
        }
        Ok(GADState { x, v: v / n, t: 0.0, gamma })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(SaddleError::InvalidParameter("δt must be positive".into()))
    }
}

fn normalized(v: Vector) -> Result<Vector> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Ok(v / n)
    } else {
        Err(SaddleError::InvalidParameter("direction collapsed to zero".into()))
    }
}

/// `x − δt(∇V(x) − c⟨∇V,v⟩v/⟨v,v⟩)` with `v` held fixed; `c = 2` is GAD.
pub fn position_step(p: &PotentialModel, x: &Vector, v: &Vector, dt: f64, c: f64) -> Result<Vector> {
    check_dt(dt)?;
    let g = p.gradient(x)?;
    check_dim(x.len(), v.len())?;
    let force = -&g + v * (c * g.dot(v) / v.dot(v));
    Ok(x + force * dt)
}

pub fn euler_step(p: &PotentialModel, s: &GADState, dt: f64) -> Result<GADState> {
    check_dt(dt)?;
    check_dim(p.dim(), s.x.len())?;
    let x = position_step(p, &s.x, &s.v, dt, 2.0)?;
    let hv = p.hessian_vec(&s.x, &s.v)?;
    let vv = s.v.dot(&s.v);
    let v = &s.v + (-&hv + &s.v * (s.v.dot(&hv) / vv)) * (dt / s.gamma);
    Ok(GADState { x, v: normalized(v)?, t: s.t + dt, gamma: s.gamma })
}

pub fn euler_step_manifold(p: &PotentialModel, m: &ManifoldSpec, s: &GADState, dt: f64) -> Result<GADState> {
    check_dt(dt)?;
    check_dim(p.dim(), s.x.len())?;
    m.check_feasible(&s.x, FEASIBILITY_TOL)?;
    let g = m.tangent_project(&s.x, &p.gradient(&s.x)?)?;
    let v = m.tangent_project(&s.x, &s.v)?;
    let vv = v.dot(&v);
    let force = -&g + &v * (2.0 * g.dot(&v) / vv);
    let x = m.retract(&s.x, &(force * dt))?;
    let hv = m.tangent_project(&s.x, &p.hessian_vec(&s.x, &v)?)?;
    let v_new = &v + (-&hv + &v * (v.dot(&hv) / vv)) * (dt / s.gamma);
    let v_new = normalized(m.tangent_project(&x, &v_new)?)?;
    Ok(GADState { x, v: v_new, t: s.t + dt, gamma: s.gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GadConfig {
    pub dt: f64,
    pub gamma: f64,
    pub max_steps: usize,
    /// On both `‖∇V‖` and the eigen-residual `‖Hv − ⟨v,Hv⟩v‖`.
    pub tol: f64,
    /// Keep every this many steps in the trajectory (the last step is always kept).
    pub record_every: usize,
}

impl Default for GadConfig {
    fn default() -> Self {
        GadConfig { dt: 0.01, gamma: 1.0, max_steps: 100_000, tol: 1e-10, record_every: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadStatus {
    Converged,
    MaxSteps,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadSample {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub grad_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadTrajectory {
    pub samples: Vec<GadSample>,
    pub status: GadStatus,
    /// Rayleigh quotient `⟨v,Hv⟩` at the last state.
    pub lambda: f64,
    pub last: GADState,
}

impl GadTrajectory {
    /// Distances of the recorded positions to `reference`.
    pub fn errors_to(&self, reference: &Vector) -> Vec<f64> {
        self.samples.iter().map(|s| (Vector::from_column_slice(&s.x) - reference).norm()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.last.x.len();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("v{i}")));
        header.push("grad_norm".into());
        out.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![format!("{:e}", s.t)];
            row.extend(s.x.iter().chain(&s.v).map(|c| format!("{c:e}")));
            row.push(format!("{:e}", s.grad_norm));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(‖∇V‖, ‖Hv − ⟨v,Hv⟩v‖, ⟨v,Hv⟩)`, tangent parts on a manifold.
fn diagnostics(p: &PotentialModel, m: Option<&ManifoldSpec>, s: &GADState) -> Result<(f64, f64, f64)> {
    let proj = |u: Vector| -> Result<Vector> {
        match m {
            Some(m) => m.tangent_project(&s.x, &u),
            None => Ok(u),
        }
    };
    let g = proj(p.gradient(&s.x)?)?;
    let hv = proj(p.hessian_vec(&s.x, &s.v)?)?;
    let q = s.v.dot(&hv);
    Ok((g.norm(), (&hv - &s.v * q).norm(), q))
}

/// Integrates from `s0` until converged, diverged, or `cfg.max_steps`.
pub fn run(p: &PotentialModel, s0: &GADState, cfg: &GadConfig, m: Option<&ManifoldSpec>) -> Result<GadTrajectory> {
    check_dt(cfg.dt)?;
    check_dim(p.dim(), s0.x.len())?;
    if cfg.record_every == 0 {
        return Err(SaddleError::InvalidParameter("record_every must be at least 1".into()));
    }
    let mut s = GADState { gamma: cfg.gamma, ..s0.clone() };
    let sample = |k: usize, s: &GADState, g: f64, r: f64| GadSample {
        step: k,
        t: s.t,
        x: s.x.iter().copied().collect(),
        v: s.v.iter().copied().collect(),
        grad_norm: g,
        residual: r,
    };
    let (mut g, mut r, mut q) = diagnostics(p, m, &s)?;
    let mut samples = vec![sample(0, &s, g, r)];
    let mut status = GadStatus::MaxSteps;
    for k in 1..=cfg.max_steps {
        if g <= cfg.tol && r <= cfg.tol {
            status = GadStatus::Converged;
            break;
        }
        s = match m {
            Some(m) => euler_step_manifold(p, m, &s, cfg.dt)?,
            None => euler_step(p, &s, cfg.dt)?,
        };
        (g, r, q) = diagnostics(p, m, &s)?;
        let finite = g.is_finite() && norm_inf(&s.x).is_finite();
        if k % cfg.record_every == 0 || !finite {
            samples.push(sample(k, &s, g, r));
        }
        if !finite {
            status = GadStatus::Diverged;
            break;
        }
        if g <= cfg.tol && r <= cfg.tol {
            status = GadStatus::Converged;
            if k % cfg.record_every != 0 {
                samples.push(sample(k, &s, g, r));
            }
            break;
        }
    }
    Ok(GadTrajectory { samples, status, lambda: q, last: s })
}
