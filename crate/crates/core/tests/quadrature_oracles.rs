use std::f64::consts::PI;

use pfnn::geometry::PolarPoint;
use pfnn::kernels::KernelSpec;
use pfnn::quadrature::{
    disc_integrate_grid, disc_integrate_singular, integrate_polar_rect, DiscSample, PolarRect,
    QuadratureSpec,
};
use pfnn::special_functions::bessel_k1;
use pfnn::{DiscGrid, PfnnError};

fn bessel_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

fn potential(spec: KernelSpec, x: PolarPoint, psi: impl Fn(f64, f64) -> f64, q: &QuadratureSpec) -> f64 {
    let (a1, a2) = x.to_cartesian();
    let f = |s: &DiscSample| {
        let d = ((s.x1 - a1).powi(2) + (s.x2 - a2).powi(2)).sqrt();
        spec.phi_of_distance(d) * psi(s.x1, s.x2)
    };
    disc_integrate_singular(&f, &x, q).unwrap()
}

#[test]
fn laplace_newtonian_potential_of_unit_density() {
    let q = QuadratureSpec::default();
    for (r, t) in [(0.5, 0.0), (0.01, 1.0), (0.3, 2.0), (0.999, 4.0), (1.0, 0.7), (0.75, 6.2)] {
        let x = PolarPoint::new(r, t).unwrap();
        let v = potential(KernelSpec::laplace(), x, |_, _| 1.0, &q);
        let exact = (r * r - 1.0) / 4.0;
        assert!((v - exact).abs() < 1e-9, "r = {r}: {v} vs {exact}");
    }
}

#[test]
fn laplace_potential_of_linear_source() {
    // ∫ Φ(x, y) 2y₁ dy = x₁ r²/4 − x₁/2
    let q = QuadratureSpec::default();
    for (r, t) in [(0.5, 0.0), (0.2, 2.5), (0.9, 1.0), (1.0, 0.0), (1.0, 2.0)] {
        let x = PolarPoint::new(r, t).unwrap();
        let (x1, _) = x.to_cartesian();
        let v = potential(KernelSpec::laplace(), x, |y1, _| 2.0 * y1, &q);
        let exact = x1 * r * r / 4.0 - x1 / 2.0;
        assert!((v - exact).abs() < 1e-9, "r = {r}: {v} vs {exact}");
    }
}

#[test]
fn helmholtz_potential_of_unit_density() {
    let q = QuadratureSpec::default();
    for lambda in [1.0, 4.0] {
        let s: f64 = f64::sqrt(lambda);
        let a = s * bessel_k1(s).unwrap() / lambda;
        let spec = KernelSpec::modified_helmholtz(lambda).unwrap();
        for (r, t) in [(0.5, 0.0), (0.05, 3.0), (0.95, 1.0), (1.0, 5.0)] {
            let x = PolarPoint::new(r, t).unwrap();
            let v = potential(spec, x, |_, _| 1.0, &q);
            let exact = -1.0 / lambda + a * bessel_i0(s * r);
            assert!((v - exact).abs() < 1e-9, "lambda {lambda} r {r}: {v} vs {exact}");
        }
    }
    // λ = 1 boundary value −1 + K1(1) I0(1)
    let spec = KernelSpec::modified_helmholtz(1.0).unwrap();
    let v = potential(spec, PolarPoint::boundary(0.0), |_, _| 1.0, &q);
    assert!((v + 0.237_945_794_3).abs() < 1e-9);
}

#[test]
fn refinement_reduces_error() {
    let x = PolarPoint::new(0.6, 1.3).unwrap();
    let exact = (0.36 - 1.0) / 4.0;
    let mut last = f64::INFINITY;
    for tol in [1e-3, 1e-5, 1e-7, 1e-9] {
        let q = QuadratureSpec::adaptive(tol, 20).unwrap();
        let err = (potential(KernelSpec::laplace(), x, |_, _| 1.0, &q) - exact).abs();
        assert!(err <= last + 1e-14, "tol {tol}: {err} > {last}");
        last = err;
    }
    assert!(last < 1e-10);
}

#[test]
fn exhausted_budget_reports_estimate() {
    let q = QuadratureSpec::adaptive(1e-14, 1).unwrap();
    let x = PolarPoint::new(0.5, 0.0).unwrap();
    let f = |s: &DiscSample| {
        let d = ((s.x1 - 0.5).powi(2) + s.x2 * s.x2).sqrt();
        (1.0 / d).min(1e6) * (10.0 * s.x1).sin()
    };
    match disc_integrate_singular(&f, &x, &q) {
        Err(PfnnError::QuadratureBudget { estimate, achieved }) => {
            assert!(estimate.is_finite());
            assert!(achieved > 1e-14);
        }
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn rectangle_with_interior_singularity() {
    // ∫ over the annular sector r ∈ [0.4, 0.6], θ ∈ [−0.1, 0.1] of ln|x − y|,
    // compared against the same integral split by hand at the singular lines.
    let q = QuadratureSpec::default();
    let f = |s: &DiscSample| ((s.x1 - 0.5).powi(2) + s.x2 * s.x2).ln();
    let whole = integrate_polar_rect(&f, PolarRect { r0: 0.4, r1: 0.6, t0: -0.1, t1: 0.1 }, Some((0.5, 0.0)), &q).unwrap();
    let mut parts = 0.0;
    for (r0, r1) in [(0.4, 0.5), (0.5, 0.6)] {
        for (t0, t1) in [(-0.1, 0.0), (0.0, 0.1)] {
            parts += integrate_polar_rect(&f, PolarRect { r0, r1, t0, t1 }, Some((0.5, 0.0)), &q).unwrap();
        }
    }
    assert!((whole - parts).abs() < 1e-10);
}

#[test]
fn grid_sum_is_first_order() {
    // g(r, θ) = r² + r cos θ; exact ∫ = π/2
    let exact = PI / 2.0;
    let mut errs = Vec::new();
    for n in [20, 40, 80, 160] {
        let g = DiscGrid::uniform(n, 2 * n).unwrap();
        let vals: Vec<f64> = g.points().map(|p| p.r() * p.r() + p.r() * p.theta().cos()).collect();
        errs.push((disc_integrate_grid(&vals, &g).unwrap() - exact).abs());
    }
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((0.8..=1.2).contains(&slope), "slope {slope}");
    }
}
