use std::sync::Arc;

use pfnn::error_analysis::*;
use pfnn::pfnn::{solve_field, BoundaryValueProblem, SolutionField, SolveSettings};
use pfnn::problems::{constant, helmholtz_ex1, poisson_ex1};
use pfnn::{BoundaryGrid, DiscGrid, KernelSpec, QuadratureSpec};
use proptest::prelude::*;

fn zero_components() -> BoundComponents {
    BoundComponents {
        fnn_term: 0.0,
        beta_norm: 1.0,
        dphi_integral: 0.5,
        volume_integral: 0.0,
        flux_domain: 1.0,
        flux_boundary: 0.5,
        rounding: 0.0,
        residual: 0.0,
        inverse_norm: 1.0,
        terms: DiscretizationTerms::default(),
    }
}

#[test]
fn metrics_of_exact_and_shifted_fields() {
    let grid = DiscGrid::uniform(6, 9).unwrap();
    let u = |x1: f64, x2: f64| x1 * x1 - x2;
    let values: Vec<f64> = grid
        .points()
        .map(|p| {
            let (x1, x2) = p.to_cartesian();
            u(x1, x2)
        })
        .collect();
    let exact = SolutionField { grid: grid.clone(), values: values.clone() };
    let e = metrics(&exact, &u);
    assert_eq!((e.mae_interior, e.linf_interior, e.mae_boundary, e.linf_boundary), (0.0, 0.0, 0.0, 0.0));

    let shifted = SolutionField { grid, values: values.iter().map(|v| v + 0.01).collect() };
    let e = metrics(&shifted, &u);
    for v in [e.mae_interior, e.linf_interior, e.mae_boundary, e.linf_boundary] {
        assert!((v - 0.01).abs() < 1e-15);
    }
}

#[test]
fn fnn_bound_reference_value() {
    // e^{0.5}/0.5 · (0.1 + 0.01) · e^{−0.5·100·0.5}
    let oracle = 0.5f64.exp() / 0.5 * 0.11 * (-25.0f64).exp();
    let got = fnn_bound(0.5, 0.5, 100, 0.1, 0.01 * 2.0, 1.0, 1).unwrap();
    assert!((got - oracle).abs() <= 1e-12 * oracle);
    assert!((got - 5.0e-12).abs() < 0.05e-12, "{got:e}");
    assert!(fnn_bound(1.0, 0.5, 10, 0.1, 0.0, 1.0, 1).is_err());
}

proptest! {
    #[test]
    fn fnn_bound_decreases_in_depth(q in 0.0f64..0.99, kappa in 0.05f64..=1.0, m in 0usize..500) {
        let a = fnn_bound(q, kappa, m, 0.3, 0.2, 6.28, 50).unwrap();
        let b = fnn_bound(q, kappa, m + 1, 0.3, 0.2, 6.28, 50).unwrap();
        prop_assert!(b < a || a == 0.0);
    }

    #[test]
    fn quadrature_part_scales_as_one_over_n(n in 1usize..10_000, d in 0.01f64..10.0) {
        let a = fnn_bound(0.5, 0.5, 10, 0.0, d, 2.0, n).unwrap();
        let b = fnn_bound(0.5, 0.5, 10, 0.0, d, 2.0, 2 * n).unwrap();
        prop_assert!((a - 2.0 * b).abs() <= 1e-12 * a);
    }

    #[test]
    fn recurrent_bound_limits(eps in 0.0f64..1.0, q in 0.01f64..0.99, gap in 0.0f64..5.0) {
        prop_assert_eq!(recurrent_bound(eps, q, 0, gap).unwrap(), eps + gap);
        prop_assert!((recurrent_bound(eps, q, 5000, gap).unwrap() - eps).abs() <= 1e-300_f64.max(eps * 1e-15));
    }
}

#[test]
fn recurrent_bound_reference_value() {
    let got = recurrent_bound(1e-3, 0.5, 12, 1.0).unwrap();
    assert!((got - (1e-3 + 0.5f64.powi(12))).abs() < 1e-18);
    assert!((got - 1.24e-3).abs() < 1e-5);
}

#[test]
fn exact_inputs_give_zero_bounds() {
    let c = zero_components();
    assert_eq!(domain_bound(&c), 0.0);
    assert_eq!(boundary_bound(&c), 0.0);
}

#[test]
fn laplace_boundary_bound_assembly() {
    let mut c = zero_components();
    c.fnn_term = 0.3;
    c.terms.d2_boundary = 0.01;
    c.terms.d4_boundary = 0.002;
    assert!((boundary_bound(&c) - (0.3 + 0.01 + 0.002)).abs() < 1e-16);
}

#[test]
fn term_examples_on_reference_problems() {
    let quad = QuadratureSpec::default();
    let disc = DiscGrid::uniform(10, 32).unwrap();
    let settings = SolveSettings { kappa: 0.5, n_layers: 100, quad };

    // no source: D2 vanishes; Laplace: D1 vanishes
    let c = constant(KernelSpec::laplace(), 2.0);
    let sol = solve_field(c.bvp(&quad).unwrap(), &disc, &BoundaryGrid::new(64).unwrap(), &settings).unwrap();
    let t = discretization_terms(&sol.solver, &sol.beta, &sample_points(&disc, 8), &quad).unwrap();
    assert_eq!((t.d1, t.d2_domain, t.d2_boundary), (0.0, 0.0, 0.0));

    // Laplace kernel is constant on the circle, so D4 is round-off only
    let p = poisson_ex1();
    let sol = solve_field(p.bvp(&quad).unwrap(), &disc, &BoundaryGrid::new(1000).unwrap(), &settings).unwrap();
    let t = discretization_terms(&sol.solver, &sol.beta, &sample_points(&disc, 8), &quad).unwrap();
    assert_eq!(t.d1, 0.0);
    assert!(t.d4_domain < 1e-13 && t.d4_boundary < 1e-13, "{t:?}");
}

#[test]
fn bounds_hold_on_reference_problems_for_every_depth() {
    let quad = QuadratureSpec::default();
    let disc = DiscGrid::uniform(12, 40).unwrap();
    let samples = sample_points(&disc, 40);
    for p in [poisson_ex1(), helmholtz_ex1()] {
        for m in [1, 2, 5, 10, 20, 50, 100] {
            let settings = SolveSettings { kappa: 0.5, n_layers: m, quad };
            let sol = solve_field(p.bvp(&quad).unwrap(), &disc, &BoundaryGrid::new(200).unwrap(), &settings).unwrap();
            let c = bound_components(&sol.solver, &sol.net, &sol.beta, &samples, &quad).unwrap();
            let e = metrics(&sol.field, &*p.exact).with_bounds(&c);
            assert!(e.bound_interior.unwrap() >= e.linf_interior, "M = {m}: {e:?}");
            assert!(e.bound_boundary.unwrap() >= e.linf_boundary, "M = {m}: {e:?}");
        }
    }
}

#[test]
fn zero_problem_has_zero_bounds() {
    let quad = QuadratureSpec::default();
    let bvp = BoundaryValueProblem {
        spec: KernelSpec::laplace(),
        boundary: Arc::new(|_| 0.0),
        source: Arc::new(pfnn::source::ZeroSource),
    };
    let disc = DiscGrid::uniform(5, 8).unwrap();
    let settings = SolveSettings { kappa: 0.5, n_layers: 10, quad };
    let sol = solve_field(bvp, &disc, &BoundaryGrid::new(16).unwrap(), &settings).unwrap();
    let c = bound_components(&sol.solver, &sol.net, &sol.beta, &sample_points(&disc, 4), &quad).unwrap();
    assert_eq!(domain_bound(&c), 0.0);
    assert_eq!(boundary_bound(&c), 0.0);
}
