//! Test problems with closed-form solutions.

use std::sync::Arc;

use crate::error::Result;
use crate::kernels::KernelSpec;
use crate::pfnn::{BoundaryFn, BoundaryValueProblem};
use crate::quadrature::QuadratureSpec;
use crate::source::{AdaptiveSource, ScalarField, SourcePotential, ZeroSource};

/// Linear problem `Δu − λu = ψ`, `u = f`, with known solution.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub spec: KernelSpec,
    pub exact: ScalarField,
    pub psi: Option<ScalarField>,
    pub boundary: BoundaryFn,
}

impl ManufacturedProblem {
    /// The boundary value problem with the source integrated adaptively.
    pub fn bvp(&self, quad: &QuadratureSpec) -> Result<BoundaryValueProblem> {
        let source: Arc<dyn SourcePotential> = match &self.psi {
            Some(psi) => Arc::new(AdaptiveSource::new(self.spec, psi.clone(), *quad)?),
            None => Arc::new(ZeroSource),
        };
        Ok(BoundaryValueProblem {
            spec: self.spec,
            boundary: self.boundary.clone(),
            source,
        })
    }
}

/// `Δu = 2x₁`, `u = 0` on the circle; `u = ¼x₁(x₁² + x₂² − 1)`.
pub fn poisson_ex1() -> ManufacturedProblem {
    ManufacturedProblem {
        spec: KernelSpec::laplace(),
        exact: Arc::new(|x1, x2| 0.25 * x1 * (x1 * x1 + x2 * x2 - 1.0)),
        psi: Some(Arc::new(|x1, _| 2.0 * x1)),
        boundary: Arc::new(|_| 0.0),
    }
}

/// `Δu − u = −x₁³ + 2x₂² + 6x₁ − 4`; `u = x₁³ − 2x₂²`.
pub fn helmholtz_ex1() -> ManufacturedProblem {
    helmholtz_cubic(1.0).expect("positive lambda")
}

/// `Δu − λu = 6x₁ − 4 − λ(x₁³ − 2x₂²)`; `u = x₁³ − 2x₂²`.
pub fn helmholtz_cubic(lambda: f64) -> Result<ManufacturedProblem> {
    let u = |x1: f64, x2: f64| x1.powi(3) - 2.0 * x2 * x2;
    Ok(ManufacturedProblem {
        spec: KernelSpec::modified_helmholtz(lambda)?,
        exact: Arc::new(u),
        psi: Some(Arc::new(move |x1, x2| 6.0 * x1 - 4.0 - lambda * u(x1, x2))),
        boundary: Arc::new(|t| t.cos().powi(3) - 2.0 * t.sin().powi(2)),
    })
}

/// `Δu = 8x₂ + 24x₂r²`, `u = 2x₂` on the circle; `u = x₂ r²(1 + r²)`.
pub fn inverse_ex1() -> ManufacturedProblem {
    ManufacturedProblem {
        spec: KernelSpec::laplace(),
        exact: Arc::new(|x1, x2| {
            let r2 = x1 * x1 + x2 * x2;
            x2 * r2 * (1.0 + r2)
        }),
        psi: Some(Arc::new(|x1, x2| 8.0 * x2 + 24.0 * x2 * (x1 * x1 + x2 * x2))),
        boundary: Arc::new(|t| 2.0 * t.sin()),
    }
}

/// Constant boundary data, no source: `u ≡ c`.
pub fn constant(spec: KernelSpec, c: f64) -> ManufacturedProblem {
    ManufacturedProblem {
        spec,
        exact: Arc::new(move |_, _| c),
        psi: None,
        boundary: Arc::new(move |_| c),
    }
}

/// Bratu-type problem `Δu − eᵘ = −e^{1−r²} − 4`, `u = 0`; `u = 1 − r²`.
pub fn bratu_exact(x1: f64, x2: f64) -> f64 {
    1.0 - (x1 * x1 + x2 * x2)
}

/// `F(x, u) = eᵘ − e^{1−r²} − 4` of the Bratu-type problem.
pub fn bratu_nonlinearity(x1: f64, x2: f64, u: f64) -> f64 {
    u.exp() - (1.0 - (x1 * x1 + x2 * x2)).exp() - 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    // Δu by the five-point stencil
    fn laplacian(u: &ScalarField, x1: f64, x2: f64) -> f64 {
        let h = 1e-4;
        (u(x1 + h, x2) + u(x1 - h, x2) + u(x1, x2 + h) + u(x1, x2 - h) - 4.0 * u(x1, x2)) / (h * h)
    }

    #[test]
    fn closed_forms_satisfy_their_equations() {
        for p in [poisson_ex1(), helmholtz_ex1(), helmholtz_cubic(3.0).unwrap(), inverse_ex1()] {
            let psi = p.psi.clone().unwrap();
            for (x1, x2) in [(0.1, 0.2), (-0.5, 0.3), (0.6, -0.6)] {
                let lhs = laplacian(&p.exact, x1, x2) - p.spec.lambda() * (p.exact)(x1, x2);
                assert!((lhs - psi(x1, x2)).abs() < 1e-5);
            }
            for t in [0.0f64, 1.0, 2.5, 4.0] {
                assert!(((p.exact)(t.cos(), t.sin()) - (p.boundary)(t)).abs() < 1e-14);
            }
        }
        let u: ScalarField = Arc::new(bratu_exact);
        let (x1, x2) = (0.3, -0.4);
        let lhs = laplacian(&u, x1, x2);
        assert!((lhs - bratu_nonlinearity(x1, x2, bratu_exact(x1, x2))).abs() < 1e-5);
    }
}
