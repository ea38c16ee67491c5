//! Domain-of-attraction scans over a 2-D grid of starts.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SaddleError};
use crate::imf::{self, IMFConfig, RunStatus};
use crate::linalg::Vector;
use crate::par::{self, Execution};
use crate::potentials::PotentialModel;
use crate::subsolve::newton_stationary;

use super::config::{GridSpec, NewtonConfig, ProblemSpec};
use super::experiment::MATCH_TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DoaMethod {
    Imf(IMFConfig),
    Newton(NewtonConfig),
}

impl DoaMethod {
    pub fn label(&self) -> &'static str {
        match self {
            DoaMethod::Imf(_) => "imf",
            DoaMethod::Newton(_) => "newton",
        }
    }
}

/// Input of the `doa` subcommand: one grid scanned by each method in turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaConfig {
    pub name: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub methods: Vec<DoaMethod>,
    #[serde(default)]
    pub execution: Execution,
}

impl DoaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DoaConfig = toml::from_str(text).map_err(|e| SaddleError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SaddleError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SaddleError::InvalidParameter(m.into()));
        if self.name.trim().is_empty() {
            return bad("name must not be empty");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        let g = &self.grid;
        if g.n == 0 || !(g.x[0] <= g.x[1]) || !(g.y[0] <= g.y[1]) {
            return bad("grid needs n ≥ 1 and ordered bounds");
        }
        for m in &self.methods {
            match m {
                DoaMethod::Imf(c) => c.validate()?,
                DoaMethod::Newton(c) if !(c.tol > 0.0) => return bad("newton.tol must be positive"),
                DoaMethod::Newton(_) => {}
            }
        }
        Ok(())
    }
}

/// Per-saddle tallies of one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSummary {
    pub saddle: String,
    pub cells: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub method: String,
    pub labeled: usize,
    pub basins: Vec<BasinSummary>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaReport {
    pub name: String,
    pub problem: String,
    pub grid: GridSpec,
    pub scans: Vec<ScanSummary>,
    #[serde(skip)]
    pub grids: Vec<DoaGrid>,
}

impl DoaReport {
    /// Markdown table of labeled cells and components per saddle.
    pub fn markdown(&self) -> String {
        let mut out = String::from("| Method | Labeled |");
        let saddles: Vec<&str> = self.grids.first().map_or(Vec::new(), |g| g.saddles.iter().map(String::as_str).collect());
        for s in &saddles {
            out.push_str(&format!(" {s} cells | {s} components |"));
        }
        out.push_str("\n|---|---:|");
        out.push_str(&"---:|---:|".repeat(saddles.len()));
        out.push('\n');
        for s in &self.scans {
            out.push_str(&format!("| {} | {} |", s.method, s.labeled));
            for b in &s.basins {
                out.push_str(&format!(" {} | {} |", b.cells, b.components));
            }
            out.push('\n');
        }
        out
    }
}

/// Scans the configured grid once per method.
pub fn run_doa(cfg: &DoaConfig) -> Result<DoaReport> {
    cfg.validate()?;
    let p = cfg.problem.build()?;
    let mut scans = Vec::new();
    let mut grids = Vec::new();
    for m in &cfg.methods {
        let t = std::time::Instant::now();
        let g = doa_scan(&p, m, &cfg.grid, cfg.execution)?;
        let seconds = t.elapsed().as_secs_f64();
        let basins = g
            .saddles
            .iter()
            .enumerate()
            .map(|(k, s)| BasinSummary { saddle: s.clone(), cells: g.count_of(k), components: g.components(k) })
            .collect();
        scans.push(ScanSummary { method: m.label().into(), labeled: g.labeled_count(), basins, seconds });
        grids.push(g);
    }
    Ok(DoaReport { name: cfg.name.clone(), problem: p.name().to_string(), grid: cfg.grid, scans, grids })
}

/// Writes `labels_<method>.csv`, `iterations_<method>.csv`, `doa.json` and `doa.md`.
pub fn write_doa_report(report: &DoaReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (s, g) in report.scans.iter().zip(&report.grids) {
        g.write_csv(BufWriter::new(File::create(dir.join(format!("labels_{}.csv", s.method)))?))?;
        g.write_iterations_csv(BufWriter::new(File::create(dir.join(format!("iterations_{}.csv", s.method)))?))?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("doa.json"))?), report)?;
    std::fs::write(dir.join("doa.md"), report.markdown())?;
    Ok(())
}

/// Per-cell outcome of a scan. Cell `(i, j)` starts at
/// `(x[0] + j·hx, y[0] + i·hy)` and is stored at `i·n + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    pub grid: GridSpec,
    /// Labels of the known saddles; `labels` index into this list.
    pub saddles: Vec<String>,
    pub labels: Vec<Option<usize>>,
    pub iterations: Vec<usize>,
}

impl GridSpec {
    pub fn point(&self, i: usize, j: usize) -> Vector {
        let at = |lo: f64, hi: f64, k: usize| {
            if self.n == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (self.n - 1) as f64
            }
        };
        Vector::from_vec(vec![at(self.x[0], self.x[1], j), at(self.y[0], self.y[1], i)])
    }
}

impl DoaGrid {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn label(&self, i: usize, j: usize) -> Option<usize> {
        self.labels[i * self.grid.n + j]
    }

    /// Cells converging to any saddle.
    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn count_of(&self, saddle: usize) -> usize {
        self.labels.iter().filter(|l| **l == Some(saddle)).count()
    }

    /// Number of 4-connected components among the cells labeled `saddle`.
    pub fn components(&self, saddle: usize) -> usize {
        let n = self.grid.n;
        let mut seen = vec![false; n * n];
        let mut count = 0;
        for start in 0..n * n {
            if seen[start] || self.labels[start] != Some(saddle) {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                let (i, j) = (c / n, c % n);
                let mut nbrs = Vec::with_capacity(4);
                if i > 0 {
                    nbrs.push(c - n);
                }
                if i + 1 < n {
                    nbrs.push(c + n);
                }
                if j > 0 {
                    nbrs.push(c - 1);
                }
                if j + 1 < n {
                    nbrs.push(c + 1);
                }
                for m in nbrs {
                    if !seen[m] && self.labels[m] == Some(saddle) {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }
        count
    }

    /// `n × n` label matrix, `−1` for unlabeled cells, first row at `y[0]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.grid.n;
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..n {
            let row: Vec<String> =
                (0..n).map(|j| self.label(i, j).map_or("-1".to_string(), |l| l.to_string())).collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `n × n` matrix of per-cell iteration counts.
    pub fn write_iterations_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.grid.n;
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..n {
            out.write_record(self.iterations[i * n..(i + 1) * n].iter().map(|k| k.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Saddle label reached from `x0`, verified index 1 and within
/// [`MATCH_TOL`] of a known saddle, plus the iteration count.
pub fn classify(p: &PotentialModel, method: &DoaMethod, x0: &Vector) -> (Option<usize>, usize) {
    let (x, iterations, ok) = match method {
        DoaMethod::Imf(cfg) => match imf::run(p, x0, cfg) {
            Ok(rec) => (rec.final_x(), rec.iterations(), rec.status == RunStatus::Converged && rec.terminal_index == Some(1)),
            Err(_) => return (None, 0),
        },
        DoaMethod::Newton(cfg) => match newton_stationary(p, x0, cfg.tol, cfg.max_iters) {
            Ok(r) => (r.x, r.iterations, r.outcome == Ok(1)),
            Err(_) => return (None, 0),
        },
    };
    if !ok {
        return (None, iterations);
    }
    let label = p
        .known_saddles()
        .iter()
        .position(|s| (s.vector() - &x).norm() < MATCH_TOL);
    (label, iterations)
}

/// Runs `method` from every grid point. Cells are independent and scanned in
/// parallel; the result does not depend on the execution mode.
pub fn doa_scan(p: &PotentialModel, method: &DoaMethod, grid: &GridSpec, exec: Execution) -> Result<DoaGrid> {
    if p.dim() != 2 {
        return Err(SaddleError::InvalidParameter(format!(
            "domain-of-attraction scans need a 2-D problem, {} has dimension {}",
            p.name(),
            p.dim()
        )));
    }
    if grid.n == 0 {
        return Err(SaddleError::InvalidParameter("grid needs n ≥ 1".into()));
    }
    if let DoaMethod::Imf(cfg) = method {
        cfg.validate()?;
    }
    let n = grid.n;
    let cells = par::map_range(exec, n * n, |c| classify(p, method, &grid.point(c / n, c % n)));
    Ok(DoaGrid {
        grid: *grid,
        saddles: p.known_saddles().iter().map(|s| s.label.clone()).collect(),
        labels: cells.iter().map(|c| c.0).collect(),
        iterations: cells.iter().map(|c| c.1).collect(),
    })
}
