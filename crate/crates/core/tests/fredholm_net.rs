use std::f64::consts::PI;
use std::sync::Arc;

use pfnn::fredholm_net::{bie_inhomogeneity, bie_kernel_matrix, build_fredholm_net, BieKernel};
use pfnn::pfnn::PotentialSolver;
use pfnn::problems::{constant, poisson_ex1};
use pfnn::source::ZeroSource;
use pfnn::{BoundaryGrid, KernelSpec, QuadratureSpec};
use proptest::prelude::*;

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn zero_kernel(n: usize) -> Arc<BieKernel> {
    let grid = BoundaryGrid::new(n).unwrap();
    Arc::new(BieKernel::from_first_row(KernelSpec::laplace(), &grid, vec![0.0; n]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_kernel_is_a_scalar_recursion(
        kappa in 0.05f64..=1.0,
        m in 1usize..60,
        g in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        let net = build_fredholm_net(g.clone(), zero_kernel(5), kappa, m).unwrap();
        let beta = net.forward().unwrap();
        let factor = 1.0 - (1.0 - kappa).powi(m as i32);
        let want: Vec<f64> = g.iter().map(|v| v * factor).collect();
        prop_assert!(sup_diff(&beta.values, &want) <= 1e-14);
    }

    // (I − K̃)β = g solved by LU against 5000 network layers
    #[test]
    fn forward_matches_dense_solve(
        n in 3usize..=50,
        lambda in prop::sample::select(vec![0.0, 0.5, 1.0, 4.0]),
        coeffs in prop::collection::vec(-2.0f64..2.0, 5),
    ) {
        let grid = BoundaryGrid::new(n).unwrap();
        let spec = KernelSpec::from_lambda(lambda).unwrap();
        let g: Vec<f64> = grid
            .thetas()
            .iter()
            .map(|t| coeffs[0] + coeffs[1] * t.cos() + coeffs[2] * t.sin() + coeffs[3] * (2.0 * t).cos() + coeffs[4] * (3.0 * t).sin())
            .collect();
        let net = build_fredholm_net(g, Arc::new(bie_kernel_matrix(&spec, &grid)), 0.5, 5000).unwrap();
        let beta = net.forward().unwrap();
        let direct = net.dense_solve().unwrap();
        prop_assert!(sup_diff(&beta.values, &direct.values) <= 1e-8);
    }
}

#[test]
fn kappa_one_single_layer_returns_g() {
    let g = vec![1.0, -2.0, 0.5, 3.0];
    let net = build_fredholm_net(g.clone(), zero_kernel(4), 1.0, 1).unwrap();
    assert_eq!(net.forward().unwrap().values, g);
}

#[test]
fn kappa_one_weights_are_plain_picard() {
    let grid = BoundaryGrid::new(12).unwrap();
    let spec = KernelSpec::modified_helmholtz(1.0).unwrap();
    let kernel = Arc::new(bie_kernel_matrix(&spec, &grid));
    let g: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let net = build_fredholm_net(g.clone(), kernel.clone(), 1.0, 3).unwrap();
    let dt = grid.d_theta();
    for i in 0..12 {
        for j in 0..12 {
            assert!((net.w_hidden()[(i, j)] - kernel.entry(i, j) * dt).abs() < 1e-15);
        }
        assert_eq!(net.b_hidden()[i], g[i]);
    }
}

#[test]
fn laplace_constant_data_gives_constant_density() {
    let c = 1.7;
    let grid = BoundaryGrid::new(64).unwrap();
    let (g, _) = bie_inhomogeneity(&|_| c, &ZeroSource, &grid).unwrap();
    assert!(g.iter().all(|v| (v - 2.0 * c).abs() < 1e-15));
    let net = build_fredholm_net(g, Arc::new(bie_kernel_matrix(&KernelSpec::laplace(), &grid)), 0.5, 200).unwrap();
    let beta = net.forward().unwrap();
    assert!(beta.values.iter().all(|b| (b - c).abs() <= 1e-10));
    // off-node evaluation of the constant fixed point
    for theta in [0.1234, 1.0, 4.5] {
        assert!((net.evaluate_density(&beta, theta, 2.0 * c) - c).abs() <= 1e-10);
    }
}

#[test]
fn residual_and_update_shrink_with_depth() {
    let quad = QuadratureSpec::default();
    let p = poisson_ex1();
    let solver = PotentialSolver::new(p.bvp(&quad).unwrap(), &BoundaryGrid::new(1000).unwrap(), &quad).unwrap();
    let net = solver.network(0.5, 100).unwrap();
    let mut states: Vec<Vec<f64>> = Vec::new();
    net.forward_with(|_, s| states.push(s.to_vec())).unwrap();
    assert_eq!(states.len(), 100);
    let updates: Vec<f64> = states.windows(2).map(|w| sup_diff(&w[1], &w[0])).collect();
    for w in updates.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-16, "{} > {}", w[1], w[0]);
    }
    let residuals: Vec<f64> = [1usize, 2, 5, 10, 20, 50, 100]
        .iter()
        .map(|&m| {
            let beta = pfnn::fredholm_net::BoundaryDensity { values: states[m - 1].clone() };
            net.residual(&beta).unwrap()
        })
        .collect();
    for w in residuals.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
    assert!(residuals[6] < 1e-12);
}

#[test]
fn node_evaluation_is_exact_and_midpoints_converge() {
    let quad = QuadratureSpec::default();
    let p = poisson_ex1();
    let coarse = PotentialSolver::new(p.bvp(&quad).unwrap(), &BoundaryGrid::new(100).unwrap(), &quad).unwrap();
    let fine = PotentialSolver::new(p.bvp(&quad).unwrap(), &BoundaryGrid::new(1000).unwrap(), &quad).unwrap();
    let bc = coarse.network(0.5, 100).unwrap().forward().unwrap();
    let bf = fine.network(0.5, 100).unwrap().forward().unwrap();
    for i in [0, 17, 99] {
        let t = 2.0 * PI * i as f64 / 100.0;
        assert_eq!(coarse.density_at(&bc, t).unwrap(), bc.values[i]);
    }
    let dt = 2.0 * PI / 100.0;
    for i in [3, 40, 77] {
        // midpoint of the coarse grid is a node of the fine one
        let t = (i as f64 + 0.5) * dt;
        let diff = (coarse.density_at(&bc, t).unwrap() - bf.values[10 * i + 5]).abs();
        assert!(diff <= dt, "{diff}");
    }
}

#[test]
fn constant_problem_density_is_constant_for_any_angle() {
    let quad = QuadratureSpec::default();
    let p = constant(KernelSpec::laplace(), -0.4);
    let solver = PotentialSolver::new(p.bvp(&quad).unwrap(), &BoundaryGrid::new(40).unwrap(), &quad).unwrap();
    let beta = solver.network(0.5, 200).unwrap().forward().unwrap();
    for t in [0.0, 0.05, 1.7, 6.2] {
        assert!((solver.density_at(&beta, t).unwrap() + 0.4).abs() <= 1e-10);
    }
}

#[test]
fn rejects_mismatched_kernel() {
    let grid = BoundaryGrid::new(4).unwrap();
    assert!(BieKernel::from_first_row(KernelSpec::laplace(), &grid, vec![0.0; 3]).is_err());
    assert!(BieKernel::from_first_row(KernelSpec::laplace(), &grid, vec![f64::NAN; 4]).is_err());
    assert!(build_fredholm_net(vec![1.0; 3], zero_kernel(4), 0.5, 3).is_err());
    assert!(build_fredholm_net(vec![1.0; 4], zero_kernel(4), 0.5, 0).is_err());
}
