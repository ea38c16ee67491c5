//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SaddleError};
use crate::gad::GadConfig;
use crate::imf::{IMFConfig, ManifoldKind};
use crate::linalg::Vector;
use crate::objective::{Coefficients, EnergyObjective, SphereProjection};
use crate::par::Execution;
use crate::potentials::{make_builtin, Builtin, PotentialModel};
use crate::subsolve::{minimize, SubsolveConfig, SubsolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: Builtin,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ProblemSpec {
    pub fn new(name: Builtin) -> Self {
        ProblemSpec { name, params: BTreeMap::new() }
    }

    pub fn build(&self) -> Result<PotentialModel> {
        make_builtin(self.name, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    Imf,
    Gad,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-10, max_iters: 200 }
    }
}

/// Where runs start. Random draws use ChaCha8 seeded from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Points { points: Vec<Vec<f64>> },
    /// `count` uniformly random directions at distance `radius` from each center.
    Circle { centers: Vec<Vec<f64>>, radius: f64, count: usize, seed: u64 },
    /// Points at geodesic distance `angle` from `center` on the unit sphere.
    Geodesic { center: Vec<f64>, angle: f64, count: usize, seed: u64 },
    /// Relax from the problem's initial point, then add uniform noise in
    /// `[−amplitude, amplitude]` to the last `tail` coordinates (all if absent).
    PerturbedMinimum { amplitude: f64, count: usize, seed: u64, tail: Option<usize> },
}

impl StartSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            StartSpec::Points { .. } => None,
            StartSpec::Circle { seed, .. } | StartSpec::Geodesic { seed, .. } | StartSpec::PerturbedMinimum { seed, .. } => {
                Some(*seed)
            }
        }
    }

    /// Materializes the start points for `p`.
    pub fn points(&self, p: &PotentialModel) -> Result<Vec<Vector>> {
        let d = p.dim();
        match self {
            StartSpec::Points { points } => points
                .iter()
                .map(|x| {
                    check_dim(d, x.len())?;
                    Ok(Vector::from_column_slice(x))
                })
                .collect(),
            StartSpec::Circle { centers, radius, count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(centers.len() * count);
                for center in centers {
                    check_dim(d, center.len())?;
                    let c = Vector::from_column_slice(center);
                    out.extend((0..*count).map(|_| &c + random_unit(&mut rng, d) * *radius));
                }
                Ok(out)
            }
            StartSpec::Geodesic { center, angle, count, seed } => {
                check_dim(d, center.len())?;
                let c = Vector::from_column_slice(center);
                if (c.norm() - 1.0).abs() > 1e-12 {
                    return Err(SaddleError::InvalidParameter("geodesic start needs a unit center".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| {
                        let u = random_unit(&mut rng, d);
                        let t = (&u - &c * c.dot(&u)).normalize();
                        &c * angle.cos() + t * angle.sin()
                    })
                    .collect())
            }
            StartSpec::PerturbedMinimum { amplitude, count, seed, tail } => {
                let x0 = p.initial_point().cloned().ok_or_else(|| {
                    SaddleError::InvalidParameter(format!("{} has no initial point to relax", p.name()))
                })?;
                let minimum = relax(p, &x0)?;
                let k = tail.unwrap_or(d).min(d);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| {
                        let mut x = minimum.clone();
                        for i in d - k..d {
                            x[i] += amplitude * (2.0 * rng.gen::<f64>() - 1.0);
                        }
                        x
                    })
                    .collect())
            }
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    if d == 2 {
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        return Vector::from_vec(vec![a.cos(), a.sin()]);
    }
    loop {
        let u = Vector::from_fn(d, |_, _| 2.0 * rng.gen::<f64>() - 1.0);
        let n = u.norm();
        if n > 1e-3 && n <= 1.0 {
            return u / n;
        }
    }
}

/// Local minimum of `V` reached by ncg from `x0`.
pub fn relax(p: &PotentialModel, x0: &Vector) -> Result<Vector> {
    let cfg = SubsolveConfig { grad_tol: 1e-10, max_inner_iters: 20_000, ..Default::default() };
    let r = minimize(&EnergyObjective(p), x0, &cfg)?;
    if r.status == SubsolveStatus::MaxIters {
        return Err(SaddleError::InvalidParameter(format!(
            "relaxation of {} did not converge (gradient {:e})",
            p.name(),
            r.grad_norm
        )));
    }
    Ok(r.y)
}

/// Per-run overrides; every start is run once per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub label: String,
    pub coefficients: Option<Coefficients>,
    pub sphere_projection: Option<SphereProjection>,
}

impl VariantSpec {
    pub fn coefficients(label: &str, c: Coefficients) -> Self {
        VariantSpec { label: label.into(), coefficients: Some(c), sphere_projection: None }
    }

    pub fn apply(&self, cfg: &IMFConfig) -> IMFConfig {
        let mut out = cfg.clone();
        if let Some(c) = self.coefficients {
            out.coefficients = c;
        }
        if let Some(p) = self.sphere_projection {
            out.sphere_projection = p;
        }
        out
    }
}

/// How the error column is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Converged runs: the terminal point, Newton-polished in flat space.
    /// Otherwise the nearest known saddle.
    #[default]
    Auto,
    /// Nearest known index-1 point, Newton-polished in flat space.
    Known,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Formats of the error table; per-run CSVs and the JSON summary are always written.
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, formats: vec![Format::Csv, Format::Json, Format::Markdown] }
    }
}

/// Region and resolution of a domain-of-attraction scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x: [-1.5, 1.5], y: [-1.5, 2.0], n: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default)]
    pub imf: IMFConfig,
    #[serde(default)]
    pub gad: GadConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    pub start: StartSpec,
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
    #[serde(default)]
    pub reference: ReferenceMode,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(name: &str, problem: ProblemSpec, start: StartSpec) -> Self {
        ExperimentConfig {
            name: name.into(),
            problem,
            method: MethodKind::Imf,
            imf: IMFConfig::default(),
            gad: GadConfig::default(),
            newton: NewtonConfig::default(),
            start,
            variants: Vec::new(),
            reference: ReferenceMode::Auto,
            output: OutputSpec::default(),
            execution: Execution::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| SaddleError::Config(e.to_string()))?;
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
        self.imf.validate()?;
        for v in &self.variants {
            v.apply(&self.imf).validate()?;
        }
        match &self.start {
            StartSpec::Circle { radius, .. } if !(*radius >= 0.0) => return bad("radius must be non-negative"),
            StartSpec::Geodesic { .. } if self.imf.manifold != ManifoldKind::Sphere && self.method == MethodKind::Imf => {
                return bad("geodesic starts need `imf.manifold = \"sphere\"`")
            }
            StartSpec::PerturbedMinimum { amplitude, .. } if !(*amplitude >= 0.0) => {
                return bad("amplitude must be non-negative")
            }
            _ => {}
        }
        if !(self.newton.tol > 0.0) {
            return bad("newton.tol must be positive");
        }
        Ok(())
    }

    /// `(label, config)` per variant, or the base config alone.
    pub fn variant_configs(&self) -> Vec<(String, IMFConfig)> {
        if self.variants.is_empty() {
            vec![(String::new(), self.imf.clone())]
        } else {
            self.variants.iter().map(|v| (v.label.clone(), v.apply(&self.imf))).collect()
        }
    }
}
