use std::sync::Arc;

use pfnn::error_analysis::{bound_components, domain_bound, sample_points};
use pfnn::pfnn::SolutionField;
use pfnn::problems::{bratu_exact, bratu_nonlinearity};
use pfnn::recurrent::*;
use pfnn::source::ScalarField;
use pfnn::{DiscGrid, QuadratureSpec};

fn settings(n_layers: usize) -> RecurrentSettings {
    RecurrentSettings {
        kappa: 0.5,
        n_layers,
        quad: QuadratureSpec::default(),
        early_stop: None,
    }
}

fn bratu(initial: InitialGuess, n_outer: usize) -> SemiLinearProblem {
    SemiLinearProblem {
        nonlinearity: Arc::new(bratu_nonlinearity),
        boundary: Arc::new(|_| 0.0),
        lambda: 1.0,
        initial,
        n_outer,
    }
}

fn field_of(grid: &DiscGrid, f: impl Fn(f64, f64) -> f64) -> SolutionField {
    let values = grid
        .points()
        .map(|p| {
            let (x1, x2) = p.to_cartesian();
            f(x1, x2)
        })
        .collect();
    SolutionField { grid: grid.clone(), values }
}

#[test]
fn source_update_examples() {
    let grid = DiscGrid::uniform(5, 8).unwrap();
    let exact = field_of(&grid, bratu_exact);
    let psi = source_update(&exact, &(Arc::new(bratu_nonlinearity) as Nonlinearity), 1.0).unwrap();
    for (p, v) in grid.points().zip(&psi) {
        let r2 = p.r() * p.r();
        assert!((v - (-(1.0 - r2) - 4.0)).abs() < 1e-13);
    }

    let zero = field_of(&grid, |_, _| 0.0);
    let f0: Nonlinearity = Arc::new(|_, _, _| 0.0);
    assert!(source_update(&zero, &f0, 1.0).unwrap().iter().all(|v| *v == 0.0));

    let one = field_of(&grid, |_, _| 1.0);
    let lin: Nonlinearity = Arc::new(|_, _, u| u);
    assert!(source_update(&one, &lin, 1.0).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn linear_nonlinearity_settles_after_one_step() {
    // F = λu: every outer step solves the same linear problem
    let lambda = 1.0;
    let problem = SemiLinearProblem {
        nonlinearity: Arc::new(move |_, _, u| lambda * u),
        boundary: Arc::new(|t| t.cos()),
        lambda,
        initial: InitialGuess::BoundaryExtension,
        n_outer: 4,
    };
    let disc = DiscGrid::uniform(10, 24).unwrap();
    let run = rpfnn_solve(&problem, &disc, &settings(80), None).unwrap();
    assert_eq!(run.iterates.len(), 4);
    for w in run.iterates.windows(2) {
        assert_eq!(w[0].values, w[1].values);
    }
    for m in &run.metrics[1..] {
        assert_eq!(m.max_update, 0.0);
    }
}

#[test]
fn exact_initial_guess_moves_by_single_solve_error_only() {
    let disc = DiscGrid::uniform(30, 30).unwrap();
    let u0: Vec<f64> = disc
        .points()
        .map(|p| {
            let (x1, x2) = p.to_cartesian();
            bratu_exact(x1, x2)
        })
        .collect();
    let exact: ScalarField = Arc::new(bratu_exact);
    let quad = QuadratureSpec::default();
    let run = rpfnn_solve(&bratu(InitialGuess::Field(u0), 1), &disc, &settings(100), Some(&exact)).unwrap();
    let (solver, net) = run.last_step.as_ref().unwrap();
    let c = bound_components(solver, net, &run.densities[0], &sample_points(&disc, 8), &quad).unwrap();
    let moved = run.metrics[0].max_update;
    assert!(moved <= domain_bound(&c), "{moved} vs {}", domain_bound(&c));
    assert!(moved < 1e-2, "{moved}");
}

#[test]
fn bratu_iteration_contracts_and_keeps_boundary() {
    let disc = DiscGrid::uniform(40, 40).unwrap();
    let exact: ScalarField = Arc::new(bratu_exact);
    let run = rpfnn_solve(&bratu(InitialGuess::BoundaryExtension, 8), &disc, &settings(60), Some(&exact)).unwrap();
    let ratios = run.update_ratios();
    assert_eq!(ratios.len(), 7);
    assert!(ratios[1..].iter().all(|q| *q < 1.0), "{ratios:?}");
    for m in &run.metrics {
        assert!(m.mae_boundary <= 1e-8);
    }
    assert!(run.metrics.last().unwrap().linf_interior.unwrap() < 5e-2);
    let log = run.metrics_jsonl();
    assert_eq!(log.lines().count(), 8);
    let first: IterationMetrics = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first.n, 1);
    assert!((first.beta_norm - run.metrics[0].beta_norm).abs() <= 1e-15 * first.beta_norm);
}

#[test]
fn early_stop_cuts_the_loop() {
    let disc = DiscGrid::uniform(12, 16).unwrap();
    let problem = bratu(InitialGuess::BoundaryExtension, 50);
    let s = RecurrentSettings {
        early_stop: Some(1e-6),
        ..settings(60)
    };
    let run = rpfnn_solve(&problem, &disc, &s, None).unwrap();
    assert!(run.iterates.len() < 50);
    assert!(run.metrics.last().unwrap().max_update < 1e-6);
}
