use std::f64::consts::TAU;

use proptest::prelude::*;

use saddle_imf::imf::{estimate_order, step, IMFConfig, SearchState};
use saddle_imf::manifold::sphere_geodesic_project;
use saddle_imf::objective::{build_flat, Coefficients, Objective};
use saddle_imf::potentials::Quadratic;
use saddle_imf::{make_builtin, Builtin, Vector};

fn unit(raw: &[f64]) -> Option<Vector> {
    let v = Vector::from_column_slice(raw);
    (v.norm() > 1e-3).then(|| v.normalize())
}

fn coefficients() -> impl Strategy<Value = Coefficients> {
    (0.0f64..3.0, 0.0f64..3.0)
        .prop_filter("α + β > 1", |(a, b)| a + b > 1.05)
        .prop_map(|(a, b)| Coefficients::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With one negative curvature, the exact step from any start lands on the origin.
    #[test]
    fn one_exact_step_solves_any_index_one_quadratic(
        neg in 0.2f64..3.0,
        pos in prop::collection::vec(0.2f64..5.0, 2),
        x0 in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let p = Quadratic::diagonal(&[-neg, pos[0], pos[1]]).into_model();
        let mut cfg = IMFConfig::default();
        cfg.subsolve.grad_tol = 1e-14;
        let x0 = Vector::from_vec(x0);
        let next = step(&p, &SearchState::new(&p, &x0, &cfg).unwrap(), &cfg).unwrap();
        prop_assert!(next.x.norm() < 1e-10, "{}", next.x);
    }

    /// At the anchor, ∇L = ∇V − (α+β)⟨∇V, v⟩v.
    #[test]
    fn anchor_gradient_is_the_reflected_force(
        x in prop::collection::vec(-1.2f64..1.2, 2),
        dir in prop::collection::vec(-1.0f64..1.0, 2),
        c in coefficients(),
    ) {
        let Some(v) = unit(&dir) else { return Ok(()) };
        let p = make_builtin(Builtin::ThreeHole, &Default::default()).unwrap();
        let x = Vector::from_vec(x);
        let g = p.gradient(&x).unwrap();
        let want = &g - &v * (c.sum() * g.dot(&v));
        let l = build_flat(&p, &x, &v, c).unwrap();
        let got = Objective::gradient(&l, &x);
        prop_assert!((got - &want).norm() <= 1e-12 * (1.0 + want.norm()));
    }

    #[test]
    fn flipping_the_direction_changes_nothing(
        x in prop::collection::vec(-1.2f64..1.2, 2),
        y in prop::collection::vec(-1.2f64..1.2, 2),
        dir in prop::collection::vec(-1.0f64..1.0, 2),
        c in coefficients(),
    ) {
        let Some(v) = unit(&dir) else { return Ok(()) };
        let p = make_builtin(Builtin::ThreeHole, &Default::default()).unwrap();
        let (x, y) = (Vector::from_vec(x), Vector::from_vec(y));
        let a = build_flat(&p, &x, &v, c).unwrap();
        let b = build_flat(&p, &x, &(-&v), c).unwrap();
        prop_assert_eq!(Objective::value(&a, &y), Objective::value(&b, &y));
        prop_assert_eq!(Objective::gradient(&a, &y), Objective::gradient(&b, &y));
    }

    /// The geodesic through x along v comes closest to y at the returned angle.
    #[test]
    fn geodesic_projection_maximizes_alignment(
        xr in prop::collection::vec(-1.0f64..1.0, 3),
        vr in prop::collection::vec(-1.0f64..1.0, 3),
        yr in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let (Some(x), Some(w), Some(y)) = (unit(&xr), unit(&vr), unit(&yr)) else { return Ok(()) };
        let Some(v) = unit((&w - &x * x.dot(&w)).as_slice()) else { return Ok(()) };
        let proj = sphere_geodesic_project(&x, &v, &y).unwrap();
        let align = |t: f64| x.dot(&y) * t.cos() + v.dot(&y) * t.sin();
        let best = (0..20_000).map(|k| align(TAU * k as f64 / 20_000.0)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(align(proj.theta) >= best - 1e-12);
        prop_assert!((proj.point.norm() - 1.0).abs() < 1e-12);
    }

    /// Sequences with e_{k+1} = C e_kᵖ recover p.
    #[test]
    fn order_of_model_sequences(p in 1.0f64..3.0, c in 0.1f64..2.0, e0 in 1e-3f64..0.1) {
        let mut errors = vec![e0];
        while errors.len() < 6 {
            let e = *errors.last().unwrap();
            let next = c * e.powf(p);
            if next <= 1e-13 || next >= e {
                break;
            }
            errors.push(next);
        }
        prop_assume!(errors.len() >= 4);
        prop_assert!((estimate_order(&errors).unwrap() - p).abs() < 1e-8);
    }
}
