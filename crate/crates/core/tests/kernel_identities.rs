use std::f64::consts::PI;

use pfnn::geometry::PolarPoint;
use pfnn::kernels::{d_phi, dphi_dn, dphi_dn_diag, KernelSpec};
use pfnn::quadrature::{boundary_integrate, disc_integrate_singular, DiscSample, QuadratureSpec};
use pfnn::BoundaryGrid;
use proptest::prelude::*;

// ∂Φ/∂n_y at y = (1, t) by central differences along the outward normal.
fn fd_normal(spec: &KernelSpec, x: &PolarPoint, t: f64) -> f64 {
    let (a1, a2) = x.to_cartesian();
    let h = 1e-5;
    let phi_at = |rho: f64| {
        let d = ((rho * t.cos() - a1).powi(2) + (rho * t.sin() - a2).powi(2)).sqrt();
        spec.phi_of_distance(d)
    };
    (phi_at(1.0 + h) - phi_at(1.0 - h)) / (2.0 * h)
}

fn flux(spec: &KernelSpec, x: &PolarPoint, grid: &BoundaryGrid) -> f64 {
    boundary_integrate(
        |t| {
            let y = PolarPoint::boundary(t);
            if x.distance(&y) == 0.0 {
                dphi_dn_diag(spec)
            } else {
                dphi_dn(spec, x, &y).unwrap()
            }
        },
        grid,
    )
    .unwrap()
}

fn volume(spec: &KernelSpec, x: &PolarPoint) -> f64 {
    let (a1, a2) = x.to_cartesian();
    let f = |s: &DiscSample| spec.phi_of_distance(((s.x1 - a1).powi(2) + (s.x2 - a2).powi(2)).sqrt());
    disc_integrate_singular(&f, x, &QuadratureSpec::default()).unwrap()
}

#[test]
fn normal_derivative_matches_finite_differences() {
    for spec in [KernelSpec::laplace(), KernelSpec::modified_helmholtz(1.0).unwrap(), KernelSpec::modified_helmholtz(4.0).unwrap()] {
        for (r, t1, t2) in [(0.5, 0.0, PI), (0.2, 1.0, 2.0), (0.9, 3.0, 3.3), (1.0, 0.0, PI / 3.0)] {
            let x = PolarPoint::new(r, t1).unwrap();
            let v = dphi_dn(&spec, &x, &PolarPoint::boundary(t2)).unwrap();
            let o = fd_normal(&spec, &x, t2);
            assert!((v - o).abs() < 1e-6, "{spec:?} r {r}: {v} vs {o}");
        }
    }
}

#[test]
fn d_phi_matches_finite_differences() {
    let x = PolarPoint::new(0.5, 0.0).unwrap();
    let xs = PolarPoint::boundary(0.0);
    for spec in [KernelSpec::laplace(), KernelSpec::modified_helmholtz(1.0).unwrap()] {
        let v = d_phi(&spec, &x, &PolarPoint::boundary(PI)).unwrap();
        let o = fd_normal(&spec, &x, PI) - fd_normal(&spec, &xs, PI);
        assert!((v - o).abs() < 1e-6);
    }
}

#[test]
fn d_phi_vanishes_at_the_boundary() {
    // pointwise away from x*, and in the weighted integral with a density
    // that vanishes at x*
    let grid = BoundaryGrid::new(20000).unwrap();
    for spec in [KernelSpec::laplace(), KernelSpec::modified_helmholtz(1.0).unwrap()] {
        let x = PolarPoint::new(1.0 - 1e-6, 0.4).unwrap();
        for j in 1..60 {
            let t = 0.4 + j as f64 * 0.1;
            let v = d_phi(&spec, &x, &PolarPoint::boundary(t)).unwrap();
            assert!(v.abs() < 1e-3, "t = {t}: {v}");
        }
        let w = boundary_integrate(
            |t| (t.cos() - 0.4f64.cos()) * d_phi(&spec, &x, &PolarPoint::boundary(t)).unwrap(),
            &grid,
        )
        .unwrap();
        assert!(w.abs() < 1e-4, "{w}");
    }
}

#[test]
fn laplace_gauss_identities() {
    let grid = BoundaryGrid::new(1000).unwrap();
    let spec = KernelSpec::laplace();
    let x = PolarPoint::new(0.5, 0.7).unwrap();
    assert!((flux(&spec, &x, &grid) - 1.0).abs() < 1e-6);
    for i in [0, 17, 500] {
        assert!((flux(&spec, &grid.point(i), &grid) - 0.5).abs() < 1e-6);
    }
}

#[test]
fn coarse_grid_breaks_interior_identity() {
    let grid = BoundaryGrid::new(8).unwrap();
    let x = PolarPoint::new(0.5, 0.7).unwrap();
    assert!((flux(&KernelSpec::laplace(), &x, &grid) - 1.0).abs() > 1e-6);
}

#[test]
fn helmholtz_jump_identities() {
    let grid = BoundaryGrid::new(1000).unwrap();
    for lambda in [1.0, 4.0] {
        let spec = KernelSpec::modified_helmholtz(lambda).unwrap();
        for (r, t) in [(0.5, 0.7), (0.1, 2.0), (0.8, 4.0)] {
            let x = PolarPoint::new(r, t).unwrap();
            let lhs = flux(&spec, &x, &grid);
            let rhs = 1.0 + lambda * volume(&spec, &x);
            assert!((lhs - rhs).abs() < 1e-6, "interior lambda {lambda} r {r}: {lhs} vs {rhs}");
        }
        let x = grid.point(3);
        let lhs = flux(&spec, &x, &grid);
        let rhs = 0.5 + lambda * volume(&spec, &x);
        assert!((lhs - rhs).abs() < 1e-6, "boundary lambda {lambda}: {lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn chord_formula(a in 0.0f64..6.28, d in 0.0f64..6.28) {
        let p = PolarPoint::boundary(a);
        let q = PolarPoint::boundary(a + d);
        prop_assert!((p.distance(&q) - 2.0 * (0.5 * d).sin().abs()).abs() < 1e-14);
    }

    #[test]
    fn projection_idempotent(r in 1e-9f64..=1.0, t in -10.0f64..10.0) {
        let p = PolarPoint::new(r, t).unwrap();
        let once = p.boundary_projection().unwrap();
        prop_assert_eq!(once, once.boundary_projection().unwrap());
        prop_assert!(once.is_on_boundary());
    }
}
