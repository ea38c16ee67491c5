//! Batch execution of configured runs and report files.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigen::{min_modes, DEFAULT_DENSE_CAP};
use crate::error::Result;
use crate::gad::{self, GADState, GadStatus};
use crate::imf::{self, estimate_order, estimate_order_window, ConvergenceRecord, IMFConfig, IterationRecord, ManifoldKind, RunStatus};
use crate::linalg::Vector;
use crate::manifold::ManifoldSpec;
use crate::par;
use crate::potentials::{MorseIsland, PotentialModel};
use crate::subsolve::newton_stationary;

use super::config::{ExperimentConfig, Format, MethodKind, NewtonConfig, ReferenceMode};
use super::table::{emit_table, ErrorColumn};
use super::xyz::write_xyz;

/// Distance under which a terminal point is matched to a known saddle.
pub const MATCH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub variant: String,
    pub start: Vec<f64>,
    pub status: RunStatus,
    pub iterations: usize,
    pub terminal_index: Option<usize>,
    /// Label of the known saddle within [`MATCH_TOL`] of the terminal point.
    pub saddle: Option<String>,
    pub final_grad_norm: f64,
    pub final_error: Option<f64>,
    /// Order over the last four usable errors.
    pub order: Option<f64>,
    /// Order over the last three usable errors.
    pub order_tail: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub problem: String,
    pub method: MethodKind,
    pub seed: Option<u64>,
    pub runs: Vec<RunSummary>,
    pub all_converged: bool,
    #[serde(skip)]
    pub records: Vec<ConvergenceRecord>,
}

impl ExperimentReport {
    /// Error columns labeled `variant/saddle` in run order.
    pub fn columns(&self) -> Vec<ErrorColumn> {
        self.runs
            .iter()
            .zip(&self.records)
            .map(|(s, r)| {
                let mut label = s.variant.clone();
                if let Some(sp) = &s.saddle {
                    if !label.is_empty() {
                        label.push(' ');
                    }
                    label.push_str(sp);
                }
                if label.is_empty() {
                    label = format!("run {}", s.run);
                }
                ErrorColumn { label, errors: r.errors().into_iter().skip(1).collect() }
            })
            .collect()
    }
}

/// Executes every start × variant of `cfg`. Runs are independent and are
/// distributed over the worker pool; results keep the configured order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let p = cfg.problem.build()?;
    let starts = cfg.start.points(&p)?;
    let variants = cfg.variant_configs();
    let jobs: Vec<(usize, String, IMFConfig, Vector)> = variants
        .iter()
        .flat_map(|(label, imf_cfg)| starts.iter().map(move |x| (label.clone(), imf_cfg.clone(), x.clone())))
        .enumerate()
        .map(|(i, (l, c, x))| (i, l, c, x))
        .collect();
    let outcomes = par::map(cfg.execution, &jobs, |(i, label, imf_cfg, x0)| {
        one_run(&p, cfg, imf_cfg, x0).map(|rec| summarize(&p, cfg, imf_cfg, *i, label, x0, rec))
    });
    let mut runs = Vec::with_capacity(jobs.len());
    let mut records = Vec::with_capacity(jobs.len());
    for o in outcomes {
        let (s, r) = o?;
        runs.push(s);
        records.push(r);
    }
    let all_converged = runs.iter().all(|r| r.status == RunStatus::Converged);
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        problem: p.name().to_string(),
        method: cfg.method,
        seed: cfg.start.seed(),
        runs,
        all_converged,
        records,
    })
}

fn one_run(p: &PotentialModel, cfg: &ExperimentConfig, imf_cfg: &IMFConfig, x0: &Vector) -> Result<ConvergenceRecord> {
    match cfg.method {
        MethodKind::Imf => imf::run(p, x0, imf_cfg),
        MethodKind::Gad => gad_record(p, cfg, imf_cfg, x0),
        MethodKind::Newton => newton_record(p, &cfg.newton, x0),
    }
}

fn gad_record(p: &PotentialModel, cfg: &ExperimentConfig, imf_cfg: &IMFConfig, x0: &Vector) -> Result<ConvergenceRecord> {
    let manifold = (imf_cfg.manifold == ManifoldKind::Sphere).then(|| ManifoldSpec::sphere(p.dim()));
    let tangent = manifold.as_ref().map(|m| m.tangent_space(x0)).transpose()?;
    let modes = min_modes(p, x0, 1, None, &imf_cfg.eigen, tangent.as_ref())?;
    let s0 = GADState::new(x0.clone(), modes.eigenvectors[0].clone(), cfg.gad.gamma)?;
    let tr = gad::run(p, &s0, &cfg.gad, manifold.as_ref())?;
    let rows = tr
        .samples
        .iter()
        .map(|s| {
            let x = Vector::from_column_slice(&s.x);
            Ok(IterationRecord {
                iter: s.step,
                energy: p.energy(&x)?,
                x: s.x.clone(),
                error: None,
                grad_norm: s.grad_norm,
                lambda1: None,
                inner_iters: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let status = match tr.status {
        GadStatus::Converged => RunStatus::Converged,
        GadStatus::MaxSteps => RunStatus::MaxIters,
        GadStatus::Diverged => RunStatus::Diverged,
    };
    Ok(ConvergenceRecord { rows, status, terminal_index: None, reference: None, near_degenerate: false, message: None })
}

fn newton_record(p: &PotentialModel, cfg: &NewtonConfig, x0: &Vector) -> Result<ConvergenceRecord> {
    let r = newton_stationary(p, x0, cfg.tol, cfg.max_iters)?;
    let row = |iter: usize, x: &Vector| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iter,
            x: x.iter().copied().collect(),
            energy: p.energy(x)?,
            error: None,
            grad_norm: crate::linalg::norm_inf(&p.gradient(x)?),
            lambda1: None,
            inner_iters: 0,
        })
    };
    let (status, terminal_index, message) = match r.outcome {
        Ok(1) => (RunStatus::Converged, Some(1), None),
        Ok(k) => (RunStatus::WrongIndex, Some(k), None),
        Err(f) => (RunStatus::Failed, None, Some(format!("{f:?}"))),
    };
    Ok(ConvergenceRecord {
        rows: vec![row(0, x0)?, row(r.iterations, &r.x)?],
        status,
        terminal_index,
        reference: None,
        near_degenerate: false,
        message,
    })
}

/// Nearest known index-1 point to `x` and its distance.
pub fn nearest_saddle<'a>(p: &'a PotentialModel, x: &Vector) -> Option<(&'a str, Vector, f64)> {
    p.known_saddles()
        .into_iter()
        .map(|s| {
            let v = s.vector();
            let d = (&v - x).norm();
            (s.label.as_str(), v, d)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
}

/// Newton-polishes `x` in flat space; keeps `x` if Newton wanders off.
pub fn polish(p: &PotentialModel, x: &Vector) -> Vector {
    if p.dim() > DEFAULT_DENSE_CAP {
        return x.clone();
    }
    match newton_stationary(p, x, 1e-14, 8) {
        Ok(r) if (&r.x - x).norm() < MATCH_TOL && r.x.iter().all(|c| c.is_finite()) => r.x,
        _ => x.clone(),
    }
}

fn reference_for(p: &PotentialModel, mode: ReferenceMode, flat: bool, rec: &ConvergenceRecord) -> Option<Vector> {
    let last = rec.final_x();
    let known = || {
        nearest_saddle(p, &last).map(|(_, v, _)| if flat { polish(p, &v) } else { v })
    };
    match mode {
        ReferenceMode::None => None,
        ReferenceMode::Known => known(),
        ReferenceMode::Auto => {
            if rec.converged() {
                match nearest_saddle(p, &last) {
                    Some((_, v, d)) if d < MATCH_TOL && !flat => Some(v),
                    _ if flat => Some(polish(p, &last)),
                    _ => Some(last),
                }
            } else {
                known()
            }
        }
    }
}

fn summarize(
    p: &PotentialModel,
    cfg: &ExperimentConfig,
    imf_cfg: &IMFConfig,
    run: usize,
    variant: &str,
    x0: &Vector,
    mut rec: ConvergenceRecord,
) -> (RunSummary, ConvergenceRecord) {
    let flat = imf_cfg.manifold == ManifoldKind::None;
    if let Some(r) = &imf_cfg.reference {
        rec.set_reference(r);
    } else if let Some(r) = reference_for(p, cfg.reference, flat, &rec) {
        rec.set_reference(r.as_slice());
    }
    let last = rec.final_x();
    let saddle = nearest_saddle(p, &last).filter(|s| s.2 < MATCH_TOL).map(|s| s.0.to_string());
    let errors = rec.errors();
    let summary = RunSummary {
        run,
        variant: variant.to_string(),
        start: x0.iter().copied().collect(),
        status: rec.status,
        iterations: rec.iterations(),
        terminal_index: rec.terminal_index,
        saddle,
        final_grad_norm: rec.rows.last().map_or(f64::NAN, |r| r.grad_norm),
        final_error: errors.last().copied(),
        order: estimate_order(&errors).ok(),
        order_tail: estimate_order_window(&errors, 3).ok(),
        message: rec.message.clone(),
    };
    (summary, rec)
}

/// Writes per-run CSVs, `summary.json`, the error table in each configured
/// format and, for the Morse island, terminal geometries as XYZ.
pub fn write_report(report: &ExperimentReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (s, rec) in report.runs.iter().zip(&report.records) {
        rec.write_csv(BufWriter::new(File::create(dir.join(format!("run_{:03}.csv", s.run)))?))?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("summary.json"))?), report)?;
    let columns = report.columns();
    for f in &cfg.output.formats {
        let (ext, text) = match f {
            Format::Csv => ("csv", emit_table(&columns, *f)?),
            Format::Json => ("json", emit_table(&columns, *f)?),
            Format::Markdown => ("md", emit_table(&columns, *f)?),
        };
        std::fs::write(dir.join(format!("errors.{ext}")), text)?;
    }
    let p = cfg.problem.build()?;
    if let Some(island) = p.downcast::<MorseIsland>() {
        for (s, rec) in report.runs.iter().zip(&report.records) {
            let pos = island.full_positions(&rec.final_x());
            let comment = format!("{} run {} status {:?}", report.name, s.run, s.status);
            write_xyz(File::create(dir.join(format!("run_{:03}.xyz", s.run)))?, &pos, &comment)?;
        }
    }
    Ok(())
}
