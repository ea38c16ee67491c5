//! Invariant suite over the builtin surfaces.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_eigensolve, DEFAULT_DENSE_CAP};
use crate::error::Result;
use crate::linalg::{complement_basis, rel_diff, Vector};
use crate::manifold::{sphere_geodesic_project, ManifoldSpec, TangentSpace};
use crate::objective::{build_flat, build_manifold, Coefficients, GeodesicFrame, Objective, SphereProjection};
use crate::par::{self, Execution};
use crate::potentials::{make_builtin, Builtin, PotentialModel};

use super::experiment::polish;

const SEED: u64 = 13;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub problem: String,
    pub passed: bool,
    /// Worst observed deviation and its tolerance.
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, problem: &str, worst: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            problem: problem.into(),
            passed: worst <= tol,
            detail: format!("worst {worst:.3e} (tol {tol:.0e})"),
        }
    }
}

const BUILTINS: [Builtin; 4] = [Builtin::DoubleWell, Builtin::ThreeHole, Builtin::SphereQuadratic, Builtin::MorseIsland];

/// Runs every check; builtins are processed in parallel.
pub fn run_checks(exec: Execution) -> Result<Vec<CheckResult>> {
    let groups = par::map(exec, &BUILTINS, |&b| checks_for(b));
    let mut out = Vec::new();
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}

fn sample_points(p: &PotentialModel, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vector> {
    let d = p.dim();
    (0..count)
        .map(|_| match p.initial_point() {
            Some(x0) => x0 + Vector::from_fn(d, |_, _| 0.05 * (2.0 * rng.gen::<f64>() - 1.0)),
            None => Vector::from_fn(d, |_, _| 1.5 * (2.0 * rng.gen::<f64>() - 1.0)),
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| 2.0 * rng.gen::<f64>() - 1.0).normalize()
}

fn fd_directional(f: impl Fn(&Vector) -> f64, x: &Vector, u: &Vector) -> f64 {
    (f(&(x + u * FD_STEP)) - f(&(x - u * FD_STEP))) / (2.0 * FD_STEP)
}

fn fd_vector(g: impl Fn(&Vector) -> Vector, x: &Vector, u: &Vector) -> Vector {
    (g(&(x + u * FD_STEP)) - g(&(x - u * FD_STEP))) / (2.0 * FD_STEP)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn checks_for(b: Builtin) -> Result<Vec<CheckResult>> {
    let p = make_builtin(b, &BTreeMap::new())?;
    let name = b.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let d = p.dim();
    let points = sample_points(&p, &mut rng, if b == Builtin::MorseIsland { 2 } else { 8 });
    let mut out = Vec::new();

    let (mut grad, mut hess, mut sym, mut lin) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for x in &points {
        let u = random_unit(&mut rng, d);
        let w = random_unit(&mut rng, d);
        let g = p.gradient(x)?;
        grad = grad.max(rel(fd_directional(|y| p.surface().energy(y), x, &u), g.dot(&u)));
        let hu = p.hessian_vec(x, &u)?;
        hess = hess.max(rel_diff(&fd_vector(|y| p.surface().gradient(y), x, &u), &hu));
        let hw = p.hessian_vec(x, &w)?;
        sym = sym.max(rel(w.dot(&hu), u.dot(&hw)));
        let combo = p.hessian_vec(x, &(&u * 2.0 - &w * 3.0))?;
        lin = lin.max(rel_diff(&combo, &(&hu * 2.0 - &hw * 3.0)));
    }
    out.push(CheckResult::new("gradient_fd", &name, grad, FD_TOL));
    out.push(CheckResult::new("hessian_vec_fd", &name, hess, FD_TOL));
    out.push(CheckResult::new("hessian_symmetry", &name, sym, 1e-10));
    out.push(CheckResult::new("hessian_linearity", &name, lin, 1e-12));

    if b == Builtin::SphereQuadratic {
        out.extend(sphere_checks(&p, &mut rng)?);
    } else {
        out.extend(flat_objective_checks(&p, &points, &mut rng)?);
    }
    Ok(out)
}

fn flat_objective_checks(p: &PotentialModel, points: &[Vector], rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let name = p.name().to_string();
    let d = p.dim();
    let mut out = Vec::new();
    let presets = [Coefficients::W1, Coefficients::W2, Coefficients::MIX];

    let (mut grad, mut hess, mut flip) = (0.0f64, 0.0f64, 0.0f64);
    for x in points {
        let v = random_unit(rng, d);
        let y = x + random_unit(rng, d) * 0.05;
        let u = random_unit(rng, d);
        for c in presets {
            let l = build_flat(p, x, &v, c)?;
            let g = Objective::gradient(&l, &y);
            grad = grad.max(rel(fd_directional(|z| Objective::value(&l, z), &y, &u), g.dot(&u)));
            let fd = fd_vector(|z| Objective::gradient(&l, z), &y, &u);
            hess = hess.max(rel_diff(&fd, &Objective::hessian_vec(&l, &y, &u)));
            let m = build_flat(p, x, &(-&v), c)?;
            flip = flip.max(rel(Objective::value(&l, &y), Objective::value(&m, &y)));
            flip = flip.max(rel_diff(&g, &Objective::gradient(&m, &y)));
        }
    }
    out.push(CheckResult::new("objective_gradient_fd", &name, grad, FD_TOL));
    out.push(CheckResult::new("objective_hessian_vec_fd", &name, hess, FD_TOL));
    out.push(CheckResult::new("sign_flip_invariance", &name, flip, 1e-12));

    // I − vvᵀ built from a complement basis.
    let v = random_unit(rng, d);
    let t = TangentSpace::from_basis(complement_basis(d, std::slice::from_ref(&v)), d);
    let mut idem = 0.0f64;
    for _ in 0..4 {
        let u = random_unit(rng, d);
        let pu = t.project(&u);
        idem = idem.max((t.project(&pu) - &pu).norm()).max(pu.dot(&v).abs());
    }
    out.push(CheckResult::new("projector_idempotence", &name, idem, 1e-12));

    // Known saddles make every objective stationary at its own anchor.
    let saddles = p.known_saddles();
    if !saddles.is_empty() && d <= DEFAULT_DENSE_CAP {
        let mut worst = 0.0f64;
        for s in saddles {
            let x = polish(p, &s.vector());
            let spec = dense_eigensolve(p, &x, DEFAULT_DENSE_CAP)?;
            let v = spec.eigenvectors.column(0).into_owned();
            for c in presets {
                let l = build_flat(p, &x, &v, c)?;
                worst = worst.max(crate::linalg::norm_inf(&Objective::gradient(&l, &x)));
            }
        }
        out.push(CheckResult::new("stationarity_transfer", &name, worst, 1e-8));
    }
    Ok(out)
}

fn sphere_checks(p: &PotentialModel, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let name = p.name().to_string();
    let m = ManifoldSpec::sphere(3);
    let mut out = Vec::new();
    let on_sphere = |rng: &mut ChaCha8Rng| random_unit(rng, 3);
    let tangent_at = |rng: &mut ChaCha8Rng, x: &Vector| -> Result<Vector> {
        Ok(m.tangent_project(x, &random_unit(rng, 3))?.normalize())
    };

    let mut idem = 0.0f64;
    let (mut grad, mut flip) = (0.0f64, 0.0f64);
    for _ in 0..8 {
        let x = on_sphere(rng);
        let u = random_unit(rng, 3);
        let pu = m.tangent_project(&x, &u)?;
        idem = idem.max((m.tangent_project(&x, &pu)? - &pu).norm()).max(pu.dot(&x).abs());

        let v = tangent_at(rng, &x)?;
        let y = m.retract(&x, &(tangent_at(rng, &x)? * 0.1))?;
        let dir = tangent_at(rng, &y)?;
        for proj in [SphereProjection::Geodesic, SphereProjection::Retraction] {
            for c in [Coefficients::W1, Coefficients::W2, Coefficients::MIX] {
                let l = build_manifold(p, &GeodesicFrame::on_sphere(&x, &v)?, c, proj)?;
                let g = l.gradient(&y)?;
                // Derivative along the great circle through y with tangent `dir`.
                let curve = |t: f64| &y * t.cos() + &dir * t.sin();
                let h = FD_STEP;
                let fd = (Objective::value(&l, &curve(h)) - Objective::value(&l, &curve(-h))) / (2.0 * h);
                grad = grad.max(rel(fd, g.dot(&dir)));
                let flipped = build_manifold(p, &GeodesicFrame::on_sphere(&x, &(-&v))?, c, proj)?;
                flip = flip.max(rel(Objective::value(&l, &y), Objective::value(&flipped, &y)));
            }
        }
    }
    out.push(CheckResult::new("tangent_projector_idempotence", &name, idem, 1e-12));
    out.push(CheckResult::new("sphere_objective_gradient_fd", &name, grad, FD_TOL));
    out.push(CheckResult::new("sign_flip_invariance", &name, flip, 1e-12));

    let mut worst = 0.0f64;
    for s in p.known_saddles() {
        let x = s.vector();
        let spec = m.riemannian_spectrum(p, &x)?;
        let v = spec.eigenvectors.column(0).into_owned();
        for c in [Coefficients::W1, Coefficients::W2, Coefficients::MIX] {
            let l = build_manifold(p, &GeodesicFrame::on_sphere(&x, &v)?, c, SphereProjection::Geodesic)?;
            worst = worst.max(l.gradient(&x)?.norm());
        }
    }
    out.push(CheckResult::new("stationarity_transfer", &name, worst, 1e-12));

    // Geodesic projection against a dense sweep of the circle.
    let mut worst = 0.0f64;
    let sweep = 1_000_000;
    for _ in 0..3 {
        let x = on_sphere(rng);
        let v = tangent_at(rng, &x)?;
        let y = on_sphere(rng);
        let proj = sphere_geodesic_project(&x, &v, &y)?;
        let (mut best, mut best_t) = (f64::NEG_INFINITY, 0.0);
        for k in 0..sweep {
            let t = TAU * k as f64 / sweep as f64;
            let c = x.dot(&y) * t.cos() + v.dot(&y) * t.sin();
            if c > best {
                best = c;
                best_t = t;
            }
        }
        let gap = (proj.theta - best_t).rem_euclid(TAU);
        worst = worst.max(gap.min(TAU - gap));
    }
    out.push(CheckResult::new("geodesic_projection_sweep", &name, worst, 1e-5));
    Ok(out)
}
