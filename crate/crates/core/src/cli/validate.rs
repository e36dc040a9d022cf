//! Invariant suite behind `pfnn validate`.

use serde::Serialize;

use super::config::RunConfig;
use crate::error::Result;
use crate::fredholm_net::{bie_kernel_matrix, build_fredholm_net};
use crate::geometry::{BoundaryGrid, PolarPoint};
use crate::kernels::{dphi_dn, dphi_dn_diag, KernelSpec};
use crate::quadrature::{boundary_integrate, QuadratureSpec};
use crate::source::RadialPotential;
use crate::special_functions::k0_k1;

pub struct Check {
    pub name: &'static str,
    pub description: &'static str,
}

pub const CHECKS: [Check; 8] = [
    Check {
        name: "gauss_interior_laplace",
        description: "boundary sum of the Laplace normal derivative equals 1 at interior points",
    },
    Check {
        name: "gauss_boundary_laplace",
        description: "same sum equals 1/2 at boundary nodes",
    },
    Check {
        name: "gauss_interior_helmholtz",
        description: "modified Helmholtz flux equals 1 + lambda V(x) at interior points",
    },
    Check {
        name: "gauss_boundary_helmholtz",
        description: "modified Helmholtz flux equals 1/2 + lambda V(x) at boundary nodes",
    },
    Check {
        name: "bessel_integral_oracle",
        description: "K0, K1 against exp(-z cosh t) integrals, relative error",
    },
    Check {
        name: "bessel_derivative",
        description: "K1 = -K0' by central differences, relative error",
    },
    Check {
        name: "newtonian_potential",
        description: "disc integral of the Laplace kernel equals (r^2 - 1)/4",
    },
    Check {
        name: "fredholm_vs_direct",
        description: "network at M = 5000 on at most 50 nodes matches the LU solve",
    },
];

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn result(name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
    }
}

fn flux(spec: &KernelSpec, x: &PolarPoint, grid: &BoundaryGrid) -> Result<f64> {
    boundary_integrate(
        |t| {
            let y = PolarPoint::boundary(t);
            if x.distance(&y) == 0.0 {
                dphi_dn_diag(spec)
            } else {
                dphi_dn(spec, x, &y).unwrap_or(f64::NAN)
            }
        },
        grid,
    )
}

// ∫₀^∞ e^{−z cosh t} cosh(nt) dt by the trapezoid rule; the integrand decays
// double-exponentially so the rule converges geometrically.
fn bessel_integral(n: i32, z: f64) -> f64 {
    let t_max = (750.0 / z).acosh();
    let h = 1e-3;
    let steps = (t_max / h).ceil() as usize;
    let mut s = 0.5 * (-z).exp();
    for i in 1..=steps {
        let t = i as f64 * h;
        s += (-z * t.cosh()).exp() * (n as f64 * t).cosh();
    }
    s * h
}

/// Run every check for the boundary grid and shift of `cfg`.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let grid = BoundaryGrid::new(cfg.boundary_nodes)?;
    let quad = QuadratureSpec::default();
    let laplace = KernelSpec::laplace();
    let lambda = if cfg.lambda > 0.0 { cfg.lambda } else { 1.0 };
    let helm = KernelSpec::modified_helmholtz(lambda)?;
    let interior = [(0.3, 0.4), (0.6, 2.0), (0.9, 4.0)];
    let nodes = [0, grid.n_nodes() / 2];
    let mut out = Vec::new();

    let mut worst = 0.0_f64;
    for (r, t) in interior {
        worst = worst.max((flux(&laplace, &PolarPoint::new(r, t)?, &grid)? - 1.0).abs());
    }
    out.push(result("gauss_interior_laplace", worst, 1e-6));
    let mut worst = 0.0_f64;
    for i in nodes {
        worst = worst.max((flux(&laplace, &grid.point(i), &grid)? - 0.5).abs());
    }
    out.push(result("gauss_boundary_laplace", worst, 1e-6));

    let v = RadialPotential::new(helm, quad);
    let mut worst = 0.0_f64;
    for (r, t) in interior {
        let lhs = flux(&helm, &PolarPoint::new(r, t)?, &grid)?;
        worst = worst.max((lhs - 1.0 - lambda * v.value(r)?).abs());
    }
    out.push(result("gauss_interior_helmholtz", worst, 1e-6));
    let mut worst = 0.0_f64;
    for i in nodes {
        let lhs = flux(&helm, &grid.point(i), &grid)?;
        worst = worst.max((lhs - 0.5 - lambda * v.value(1.0)?).abs());
    }
    out.push(result("gauss_boundary_helmholtz", worst, 1e-6));

    let zs = [1e-8, 1e-4, 0.01, 0.05, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0];
    let mut worst = 0.0_f64;
    for z in zs {
        let (k0, k1) = k0_k1(z);
        worst = worst.max(((k0 - bessel_integral(0, z)) / k0).abs());
        worst = worst.max(((k1 - bessel_integral(1, z)) / k1).abs());
    }
    out.push(result("bessel_integral_oracle", worst, 1e-10));
    let mut worst = 0.0_f64;
    for z in zs {
        let h = 1e-5 * z;
        let d = (k0_k1(z + h).0 - k0_k1(z - h).0) / (2.0 * h);
        let k1 = k0_k1(z).1;
        worst = worst.max(((k1 + d) / k1).abs());
    }
    out.push(result("bessel_derivative", worst, 1e-6));

    let v = RadialPotential::new(laplace, quad);
    let mut worst = 0.0_f64;
    for r in [0.0, 0.5, 0.9, 1.0] {
        worst = worst.max((v.value(r)? - (r * r - 1.0) / 4.0).abs());
    }
    out.push(result("newtonian_potential", worst, 1e-8));

    let small = BoundaryGrid::new(cfg.boundary_nodes.min(50))?;
    let spec = KernelSpec::from_lambda(cfg.lambda)?;
    let kernel = std::sync::Arc::new(bie_kernel_matrix(&spec, &small));
    let g: Vec<f64> = small
        .thetas()
        .iter()
        .map(|t| t.cos() + 0.5 * (2.0 * t).sin() + 0.3)
        .collect();
    let net = build_fredholm_net(g, kernel, cfg.kappa, 5000)?;
    let beta = net.forward()?;
    let direct = net.dense_solve()?;
    let gap = beta
        .values
        .iter()
        .zip(&direct.values)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    out.push(result("fredholm_vs_direct", gap, 1e-8));
    Ok(out)
}
