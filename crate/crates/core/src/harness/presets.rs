//! Built-in experiment presets reproducing the benchmark tables and the
//! domain-of-attraction figure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SaddleError};
use crate::imf::{IMFConfig, ManifoldKind};
use crate::objective::{Coefficients, SphereProjection};
use crate::potentials::Builtin;

use super::config::{ExperimentConfig, GridSpec, NewtonConfig, ProblemSpec, StartSpec, VariantSpec};
use super::doa::{DoaConfig, DoaMethod};
use crate::par::Execution;

pub const SP1: [f64; 2] = [0.0, -0.31582];
pub const SP2: [f64; 2] = [-0.61727, 1.10273];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Fig2,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Table1, Preset::Table2, Preset::Table3, Preset::Table4, Preset::Table5, Preset::Fig2];

    /// The run configuration; `None` for the grid preset.
    pub fn config(self) -> Option<ExperimentConfig> {
        match self {
            Preset::Table1 => Some(table1()),
            Preset::Table2 => Some(table2()),
            Preset::Table3 => Some(table3()),
            Preset::Table4 => Some(table4()),
            Preset::Table5 => Some(table5()),
            Preset::Fig2 => None,
        }
    }
}

impl FromStr for Preset {
    type Err = SaddleError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| SaddleError::InvalidParameter(format!("unknown preset `{s}` (table1..table5, fig2)")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
            Preset::Table5 => "table5",
            Preset::Fig2 => "fig2",
        };
        f.write_str(s)
    }
}

fn coefficient_variants(which: &[Coefficients]) -> Vec<VariantSpec> {
    which
        .iter()
        .map(|&c| VariantSpec::coefficients(&format!("({},{})", c.alpha, c.beta), c))
        .collect()
}

/// Exact subsolves on the three-hole surface.
fn three_hole_exact() -> IMFConfig {
    let mut c = IMFConfig::default();
    c.subsolve.grad_tol = 1e-14;
    c.grad_tol = 1e-13;
    c.max_outer_iters = 30;
    c
}

/// Starts 0.2 from SP1 and SP2, exact subsolves, three coefficient choices.
pub fn table1() -> ExperimentConfig {
    let start = StartSpec::Circle { centers: vec![SP1.to_vec(), SP2.to_vec()], radius: 0.2, count: 1, seed: 1 };
    let mut cfg = ExperimentConfig::new("table1", ProblemSpec::new(Builtin::ThreeHole), start);
    cfg.imf = three_hole_exact();
    cfg.variants = coefficient_variants(&[Coefficients::W1, Coefficients::W2, Coefficients::MIX]);
    cfg
}

/// Starts 0.1 from the deep minimum near (−1, 0) with the 0.25 trust box.
pub fn table2() -> ExperimentConfig {
    let start = StartSpec::Circle { centers: vec![vec![-1.0, 0.0]], radius: 0.1, count: 2, seed: 2 };
    let mut cfg = ExperimentConfig::new("table2", ProblemSpec::new(Builtin::ThreeHole), start);
    cfg.imf = three_hole_exact();
    cfg.imf.subsolve.box_radius = Some(0.25);
    cfg.variants = coefficient_variants(&[Coefficients::W1, Coefficients::W2, Coefficients::MIX]);
    cfg
}

/// As table 1 but with three ncg steps per subproblem.
pub fn table3() -> ExperimentConfig {
    let start = StartSpec::Circle { centers: vec![SP1.to_vec(), SP2.to_vec()], radius: 0.2, count: 1, seed: 3 };
    let mut cfg = ExperimentConfig::new("table3", ProblemSpec::new(Builtin::ThreeHole), start);
    cfg.imf = three_hole_exact();
    cfg.imf.subsolve.max_inner_iters = 3;
    cfg.variants = coefficient_variants(&[Coefficients::W1, Coefficients::W2]);
    cfg
}

/// Morse island from perturbed relaxed heptamers, trust box 0.2.
pub fn table4() -> ExperimentConfig {
    let start = StartSpec::PerturbedMinimum { amplitude: 0.1, count: 2, seed: 4, tail: Some(21) };
    let mut cfg = ExperimentConfig::new("table4", ProblemSpec::new(Builtin::MorseIsland), start);
    cfg.imf = morse_imf();
    cfg.variants = coefficient_variants(&[Coefficients::W1, Coefficients::W2, Coefficients::MIX]);
    cfg
}

/// IMF settings for the Morse island.
pub fn morse_imf() -> IMFConfig {
    let mut c = IMFConfig::default();
    c.subsolve.box_radius = Some(0.2);
    c.subsolve.grad_tol = 1e-12;
    c.subsolve.max_inner_iters = 5000;
    c.grad_tol = 1e-10;
    c.max_outer_iters = 40;
    c
}

/// The sphere quadratic from 0.1 off (1,0,0): geodesic W1 and W2, plus the
/// naive retraction W2.
pub fn table5() -> ExperimentConfig {
    let start = StartSpec::Geodesic { center: vec![1.0, 0.0, 0.0], angle: 0.1, count: 1, seed: 5 };
    let mut cfg = ExperimentConfig::new("table5", ProblemSpec::new(Builtin::SphereQuadratic), start);
    cfg.imf = sphere_imf();
    cfg.variants = vec![
        VariantSpec { label: "V+W1".into(), coefficients: Some(Coefficients::W1), sphere_projection: Some(SphereProjection::Geodesic) },
        VariantSpec { label: "V+W2".into(), coefficients: Some(Coefficients::W2), sphere_projection: Some(SphereProjection::Geodesic) },
        VariantSpec {
            label: "V+W2 retraction".into(),
            coefficients: Some(Coefficients::W2),
            sphere_projection: Some(SphereProjection::Retraction),
        },
    ];
    cfg
}

pub fn sphere_imf() -> IMFConfig {
    let mut c = IMFConfig::default();
    c.manifold = ManifoldKind::Sphere;
    c.subsolve.grad_tol = 1e-14;
    c.grad_tol = 1e-14;
    c.max_outer_iters = 60;
    c
}

/// IMF against Newton on the 50×50 three-hole grid.
pub fn fig2() -> DoaConfig {
    let mut imf = IMFConfig::default();
    imf.coefficients = Coefficients::MIX;
    imf.subsolve.box_radius = Some(0.25);
    imf.subsolve.grad_tol = 1e-12;
    imf.grad_tol = 1e-10;
    imf.max_outer_iters = 200;
    let newton = NewtonConfig { tol: 1e-10, max_iters: 200 };
    DoaConfig {
        name: "fig2".into(),
        problem: ProblemSpec::new(Builtin::ThreeHole),
        grid: GridSpec::default(),
        methods: vec![DoaMethod::Imf(imf), DoaMethod::Newton(newton)],
        execution: Execution::default(),
    }
}
