use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::eigen::dense_eigensolve;
use crate::potentials::{DoubleWell, PerturbedQuadratic, Quadratic, SphereQuadratic, ThreeHole};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.gen_range(-1.0..1.0))
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    random_vec(rng, d, 1.0).normalize()
}

fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

/// Central-difference gradient of `obj.value`.
fn fd_gradient(obj: &dyn Objective, y: &Vector) -> Vector {
    let h = 1e-6;
    Vector::from_fn(y.len(), |i, _| {
        let mut e = Vector::zeros(y.len());
        e[i] = h;
        (obj.value(&(y + &e)) - obj.value(&(y - &e))) / (2.0 * h)
    })
}

fn assert_flat_consistent(obj: &ModifiedObjective, y: &Vector, rng: &mut ChaCha8Rng) {
    let g = Objective::gradient(obj, y);
    let fd = fd_gradient(obj, y);
    assert!((&g - &fd).norm() <= 1e-6 * (1.0 + g.norm()), "gradient {g} vs fd {fd}");
    let u = random_unit(rng, y.len());
    let hu = Objective::hessian_vec(obj, y, &u);
    let h = 1e-5;
    let fd_hu = (Objective::gradient(obj, &(y + &u * h)) - Objective::gradient(obj, &(y - &u * h))) / (2.0 * h);
    assert!((&hu - &fd_hu).norm() <= 1e-5 * (1.0 + hu.norm()), "hessian {hu} vs fd {fd_hu}");
}

fn sphere_point(rng: &mut ChaCha8Rng) -> Vector {
    random_unit(rng, 3)
}

fn tangent_unit(rng: &mut ChaCha8Rng, x: &Vector) -> Vector {
    let u = random_vec(rng, 3, 1.0);
    (&u - x * x.dot(&u)).normalize()
}

fn retract(y: &Vector, u: &Vector) -> Vector {
    (y + u).normalize()
}

fn assert_sphere_consistent(obj: &ModifiedObjective, y: &Vector, rng: &mut ChaCha8Rng) {
    let u = tangent_unit(rng, y);
    let g = Objective::gradient(obj, y);
    assert!(g.dot(y).abs() < 1e-12, "gradient not tangent");
    let h = 1e-6;
    let fd = (Objective::value(obj, &retract(y, &(&u * h))) - Objective::value(obj, &retract(y, &(&u * -h))))
        / (2.0 * h);
    assert!((g.dot(&u) - fd).abs() <= 1e-6 * (1.0 + g.norm()), "directional {} vs fd {fd}", g.dot(&u));

    let hu = Objective::hessian_vec(obj, y, &u);
    let h = 1e-5;
    let diff = (Objective::gradient(obj, &retract(y, &(&u * h)))
        - Objective::gradient(obj, &retract(y, &(&u * -h))))
        / (2.0 * h);
    let fd_hu = &diff - y * y.dot(&diff);
    assert!((&hu - &fd_hu).norm() <= 1e-5 * (1.0 + hu.norm()), "hessian {hu} vs fd {fd_hu}");
    let w = tangent_unit(rng, y);
    let sym = u.dot(&Objective::hessian_vec(obj, y, &w)) - w.dot(&hu);
    assert!(sym.abs() < 1e-10, "asymmetry {sym}");
}

const PRESETS: [Coefficients; 4] =
    [Coefficients::W1, Coefficients::W2, Coefficients::MIX, Coefficients { alpha: 0.3, beta: 1.9 }];

#[test]
fn w1_on_double_well_reflects_the_x_part() {
    let mu = 1.5;
    let p = DoubleWell::new(mu).unwrap().into_model();
    let x = v(&[0.3, -0.2]);
    let dir = v(&[1.0, 0.0]);
    let l = build_flat(&p, &x, &dir, Coefficients::W1).unwrap();
    for y in [v(&[0.1, 0.4]), v(&[-0.5, 0.7]), v(&[0.6, -0.1])] {
        let expected = -0.25 * (y[0] * y[0] - 1.0).powi(2)
            + 0.5 * mu * y[1] * y[1]
            + 0.5 * (x[0] * x[0] - 1.0).powi(2);
        assert!((l.value(&y).unwrap() - expected).abs() < 1e-14);
    }
}

#[test]
fn coefficient_condition_is_enforced() {
    let p = DoubleWell::new(1.0).unwrap().into_model();
    let x = v(&[0.0, 0.0]);
    let dir = v(&[1.0, 0.0]);
    let err = build_flat(&p, &x, &dir, Coefficients::new(0.0, 0.0)).unwrap_err();
    assert!(matches!(err, SaddleError::CoefficientCondition { .. }));
    assert!(err.to_string().contains("α + β > 1"));
    assert!(build_flat(&p, &x, &dir, Coefficients::new(0.5, 0.5)).is_err());
    assert!(build_flat(&p, &x, &dir, Coefficients::MIX).is_ok());
    assert!(build_flat(&p, &x, &v(&[2.0, 0.0]), Coefficients::MIX).is_err());
    assert!(build_flat(&p, &v(&[0.0, 0.0, 0.0]), &dir, Coefficients::MIX).is_err());
}

#[test]
fn w1_on_a_quadratic_flips_the_first_curvature() {
    let mu = [-1.5, 2.0, 3.0];
    let p = Quadratic::diagonal(&mu).into_model();
    let x = v(&[0.4, -0.3, 0.2]);
    let l = build_flat(&p, &x, &v(&[1.0, 0.0, 0.0]), Coefficients::W1).unwrap();
    let q = |y: &Vector| mu[0] * x[0] * x[0] - 0.5 * mu[0] * y[0] * y[0] + 0.5 * (mu[1] * y[1] * y[1] + mu[2] * y[2] * y[2]);
    let lx = l.value(&x).unwrap();
    for y in [v(&[1.0, 2.0, -1.0]), v(&[-0.2, 0.1, 0.7])] {
        let got = l.value(&y).unwrap() - lx;
        assert!((got - (q(&y) - q(&x))).abs() < 1e-13);
    }
}

#[test]
fn value_at_the_anchor_collapses_both_projections() {
    let p = ThreeHole.into_model();
    let x = v(&[0.3, 0.8]);
    let dir = v(&[0.6, 0.8]);
    let vx = p.energy(&x).unwrap();
    for c in PRESETS {
        let l = build_flat(&p, &x, &dir, c).unwrap();
        let expected = (1.0 - c.alpha) * vx + c.alpha * vx - c.beta * vx;
        assert!((l.value(&x).unwrap() - expected).abs() < 1e-14);
    }
}

#[test]
fn random_quadratic_with_one_negative_mode_gives_convex_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 5;
    let q = nalgebra::linalg::QR::new(DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))).q();
    let mu = DMatrix::from_diagonal(&v(&[-0.7, 0.5, 1.0, 2.0, 4.0]));
    let p = Quadratic::new(&q * mu * q.transpose()).into_model();
    let x = random_vec(&mut rng, d, 1.0);
    let dir: Vector = q.column(0).into();
    for c in PRESETS {
        let l = build_flat(&p, &x, &dir, c).unwrap();
        let e = sorted_eigs(dense_objective_hessian(&l, &random_vec(&mut rng, d, 1.0)));
        assert!(e[0] > 0.0, "{c:?}: {e:?}");
    }
}

#[test]
fn gradient_at_a_stationary_anchor_vanishes() {
    let p = ThreeHole.into_model();
    for sp in p.known_saddles() {
        let x = sp.vector();
        let dir = v(&[0.6, -0.8]);
        for c in PRESETS {
            let l = build_flat(&p, &x, &dir, c).unwrap();
            let g = l.gradient(&x).unwrap();
            let gv = p.gradient(&x).unwrap();
            assert!(g.norm() <= 3.0 * gv.norm() + 1e-15);
        }
    }
    let q = Quadratic::diagonal(&[-1.0, 2.0]).into_model();
    let l = build_flat(&q, &v(&[0.0, 0.0]), &v(&[0.0, 1.0]), Coefficients::new(0.7, 0.9)).unwrap();
    assert_eq!(l.gradient(&v(&[0.0, 0.0])).unwrap().norm(), 0.0);
}

#[test]
fn gradient_at_the_anchor_is_the_reflected_force() {
    let p = ThreeHole.into_model();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let x = random_vec(&mut rng, 2, 1.5);
        let dir = random_unit(&mut rng, 2);
        let g = p.gradient(&x).unwrap();
        for c in PRESETS {
            let l = build_flat(&p, &x, &dir, c).unwrap();
            let expected = &g - &dir * (c.sum() * dir.dot(&g));
            assert!((l.gradient(&x).unwrap() - expected).norm() < 1e-13 * (1.0 + g.norm()));
        }
    }
}

#[test]
fn flat_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let th = ThreeHole.into_model();
    let pq = PerturbedQuadratic { diag: [-1.0, 2.0, 3.0], cubic: 0.3, quartic: 0.1 }.into_model();
    for _ in 0..10 {
        for p in [&th, &pq] {
            let d = p.dim();
            let x = random_vec(&mut rng, d, 1.0);
            let dir = random_unit(&mut rng, d);
            for c in PRESETS {
                let l = build_flat(p, &x, &dir, c).unwrap();
                let y = &x + random_vec(&mut rng, d, 0.3);
                assert_flat_consistent(&l, &y, &mut rng);
            }
        }
    }
}

#[test]
fn index_m_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = PerturbedQuadratic { diag: [-2.0, -1.0, 3.0], cubic: 0.4, quartic: 0.2 }.into_model();
    let coefficient_sets = [
        IndexMCoefficients::minimal(2),
        IndexMCoefficients {
            terms: vec![
                SubsetCoefficient { subset: vec![0], alpha: 0.5, beta: 0.25 },
                SubsetCoefficient { subset: vec![1], alpha: 0.0, beta: 0.5 },
                SubsetCoefficient { subset: vec![0, 1], alpha: 0.5, beta: 1.0 },
            ],
        },
    ];
    for _ in 0..10 {
        let x = random_vec(&mut rng, 3, 1.0);
        let q = nalgebra::linalg::QR::new(DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))).q();
        let dirs: Vec<Vector> = (0..2).map(|i| q.column(i).into()).collect();
        for c in &coefficient_sets {
            let l = build_index_m(&p, &x, &dirs, c).unwrap();
            let y = &x + random_vec(&mut rng, 3, 0.3);
            assert_flat_consistent(&l, &y, &mut rng);
        }
    }
}

#[test]
fn sphere_derivatives_match_finite_differences_along_the_retraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = SphereQuadratic.into_model();
    for _ in 0..20 {
        let x = sphere_point(&mut rng);
        let frame = GeodesicFrame::on_sphere(&x, &tangent_unit(&mut rng, &x)).unwrap();
        let y = retract(&x, &(tangent_unit(&mut rng, &x) * 0.4));
        for projection in [SphereProjection::Geodesic, SphereProjection::Retraction] {
            for c in PRESETS {
                let l = build_manifold(&p, &frame, c, projection).unwrap();
                assert_sphere_consistent(&l, &y, &mut rng);
            }
        }
    }
}

#[test]
fn sign_flip_leaves_every_variant_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = ThreeHole.into_model();
    for _ in 0..20 {
        let x = random_vec(&mut rng, 2, 1.5);
        let dir = random_unit(&mut rng, 2);
        let y = random_vec(&mut rng, 2, 1.5);
        for c in PRESETS {
            let a = build_flat(&p, &x, &dir, c).unwrap();
            let b = build_flat(&p, &x, &-&dir, c).unwrap();
            assert!((a.value(&y).unwrap() - b.value(&y).unwrap()).abs() <= 1e-12);
            assert!((a.gradient(&y).unwrap() - b.gradient(&y).unwrap()).norm() <= 1e-12);
        }
    }
    let pq = PerturbedQuadratic { diag: [-2.0, -1.0, 3.0], cubic: 0.4, quartic: 0.2 }.into_model();
    let x = random_vec(&mut rng, 3, 1.0);
    let y = random_vec(&mut rng, 3, 1.0);
    let e0 = v(&[0.6, 0.8, 0.0]);
    let e1 = v(&[0.0, 0.0, 1.0]);
    let c = IndexMCoefficients::minimal(2);
    let a = build_index_m(&pq, &x, &[e0.clone(), e1.clone()], &c).unwrap();
    let b = build_index_m(&pq, &x, &[-e0, e1], &c).unwrap();
    assert!((a.value(&y).unwrap() - b.value(&y).unwrap()).abs() <= 1e-12);
    assert!((a.gradient(&y).unwrap() - b.gradient(&y).unwrap()).norm() <= 1e-12);

    let sq = SphereQuadratic.into_model();
    let x = sphere_point(&mut rng);
    let t = tangent_unit(&mut rng, &x);
    let y = retract(&x, &(tangent_unit(&mut rng, &x) * 0.5));
    for projection in [SphereProjection::Geodesic, SphereProjection::Retraction] {
        for c in PRESETS {
            let a = build_manifold(&sq, &GeodesicFrame::on_sphere(&x, &t).unwrap(), c, projection).unwrap();
            let b = build_manifold(&sq, &GeodesicFrame::on_sphere(&x, &-&t).unwrap(), c, projection).unwrap();
            assert!((a.value(&y).unwrap() - b.value(&y).unwrap()).abs() <= 1e-12);
            assert!((a.gradient(&y).unwrap() - b.gradient(&y).unwrap()).norm() <= 1e-12);
        }
    }
}

#[test]
fn spectrum_at_the_saddle_flips_only_the_min_mode() {
    let p = ThreeHole.into_model();
    let x = p.known_saddles()[0].vector();
    let spec = dense_eigensolve(&p, &x, 10).unwrap();
    let dir: Vector = spec.eigenvectors.column(0).into();
    for c in PRESETS {
        let l = build_flat(&p, &x, &dir, c).unwrap();
        let e = sorted_eigs(dense_objective_hessian(&l, &x));
        let mut expected = vec![(1.0 - c.sum()) * spec.eigenvalues[0], spec.eigenvalues[1]];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in e.iter().zip(&expected) {
            assert!((g - w).abs() <= 1e-8 * w.abs(), "{e:?} vs {expected:?}");
        }
    }
}

#[test]
fn optimal_sum_gives_condition_number_of_the_positive_block() {
    let mu = [-0.5, 1.0, 2.0, 3.0, 8.0];
    let p = Quadratic::diagonal(&mu).into_model();
    let x = Vector::zeros(5);
    let dir = v(&[1.0, 0.0, 0.0, 0.0, 0.0]);
    let sum = 1.0 + mu[1] / mu[0].abs();
    let l = build_flat(&p, &x, &dir, Coefficients::MIX.with_sum(sum)).unwrap();
    let e = sorted_eigs(dense_objective_hessian(&l, &x));
    assert!((e[4] / e[0] - mu[4] / mu[1]).abs() < 1e-12);
}

#[test]
fn index_m_with_one_direction_equals_the_flat_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = ThreeHole.into_model();
    let x = random_vec(&mut rng, 2, 1.0);
    let dir = random_unit(&mut rng, 2);
    for c in PRESETS {
        let flat = build_flat(&p, &x, &dir, c).unwrap();
        let im = build_index_m(&p, &x, &[dir.clone()], &IndexMCoefficients::single(c.alpha, c.beta)).unwrap();
        for _ in 0..100 {
            let y = random_vec(&mut rng, 2, 2.0);
            let (a, b) = (flat.value(&y).unwrap(), im.value(&y).unwrap());
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            assert!((flat.gradient(&y).unwrap() - im.gradient(&y).unwrap()).norm() <= 1e-12);
        }
    }
}

#[test]
fn minimal_index_two_objective_is_convex_at_the_saddle() {
    let p = Quadratic::diagonal(&[-2.0, -1.0, 3.0]).into_model();
    let x = Vector::zeros(3);
    let dirs = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])];
    let l = build_index_m(&p, &x, &dirs, &IndexMCoefficients::minimal(2)).unwrap();
    let h = dense_objective_hessian(&l, &x);
    assert!((h - DMatrix::from_diagonal(&v(&[2.0, 1.0, 3.0]))).norm() < 1e-14);
    assert_eq!(l.gradient(&x).unwrap().norm(), 0.0);
}

#[test]
fn index_m_coefficients_are_validated() {
    let p = Quadratic::diagonal(&[-2.0, -1.0, 3.0]).into_model();
    let x = Vector::zeros(3);
    let dirs = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])];
    let bad = |terms| build_index_m(&p, &x, &dirs, &IndexMCoefficients { terms }).is_err();
    assert!(bad(vec![SubsetCoefficient { subset: vec![0, 1], alpha: 0.0, beta: 1.0 }]));
    assert!(bad(vec![SubsetCoefficient { subset: vec![], alpha: 0.0, beta: 2.0 }]));
    assert!(bad(vec![SubsetCoefficient { subset: vec![2], alpha: 0.0, beta: 2.0 }]));
    assert!(bad(vec![
        SubsetCoefficient { subset: vec![0, 1], alpha: 0.0, beta: 1.0 },
        SubsetCoefficient { subset: vec![1, 0], alpha: 0.0, beta: 1.0 },
    ]));
    let skew = [v(&[1.0, 0.0, 0.0]), v(&[0.6, 0.8, 0.0])];
    assert!(matches!(
        build_index_m(&p, &x, &skew, &IndexMCoefficients::minimal(2)),
        Err(SaddleError::NotOrthonormal { .. })
    ));
}

#[test]
fn sphere_w2_at_the_anchor() {
    let p = SphereQuadratic.into_model();
    let x = v(&[0.0, 0.6, 0.8]);
    let frame = GeodesicFrame::on_sphere(&x, &v(&[1.0, 0.0, 0.0])).unwrap();
    let l = build_manifold(&p, &frame, Coefficients::W2, SphereProjection::Geodesic).unwrap();
    let vx = p.energy(&x).unwrap();
    assert!((l.value(&x).unwrap() - (vx - 2.0 * vx)).abs() < 1e-15);
}

#[test]
fn sphere_saddle_is_a_local_minimizer_of_both_geodesic_objectives() {
    let p = SphereQuadratic.into_model();
    let x = v(&[0.0, 1.0, 0.0]);
    let frame = GeodesicFrame::on_sphere(&x, &v(&[1.0, 0.0, 0.0])).unwrap();
    for c in [Coefficients::W1, Coefficients::W2, Coefficients::MIX] {
        let l = build_manifold(&p, &frame, c, SphereProjection::Geodesic).unwrap();
        assert!(l.gradient(&x).unwrap().norm() < 1e-15);
        let lx = l.value(&x).unwrap();
        for k in 0..36 {
            let a = k as f64 * std::f64::consts::PI / 18.0;
            let y = retract(&x, &(v(&[a.cos(), 0.0, a.sin()]) * 0.05));
            assert!(l.value(&y).unwrap() > lx, "{c:?} at angle {a}");
        }
    }
}

#[test]
fn sphere_objective_rejects_points_off_the_sphere() {
    let p = SphereQuadratic.into_model();
    let x = v(&[1.0, 0.0, 0.0]);
    let frame = GeodesicFrame::on_sphere(&x, &v(&[0.0, 1.0, 0.0])).unwrap();
    let l = build_manifold(&p, &frame, Coefficients::W2, SphereProjection::Geodesic).unwrap();
    assert!(matches!(l.value(&v(&[1.1, 0.0, 0.0])), Err(SaddleError::OffManifold { .. })));
    assert!(l.value(&v(&[1.0 + 1e-10, 0.0, 0.0])).is_ok());
    assert!(GeodesicFrame::on_sphere(&x, &v(&[1.0, 0.0, 0.0])).is_err());
    assert!(GeodesicFrame::on_sphere(&v(&[1.0, 0.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0, 0.0])).is_err());
}

#[test]
fn dimension_mismatch_is_reported() {
    let p = ThreeHole.into_model();
    let l = build_flat(&p, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), Coefficients::MIX).unwrap();
    assert!(matches!(l.value(&v(&[0.0])), Err(SaddleError::DimensionMismatch { .. })));
    assert!(l.hessian_vec(&v(&[0.0, 0.0]), &v(&[1.0])).is_err());
}
