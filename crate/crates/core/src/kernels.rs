//! Fundamental solutions of `Δ` and `Δ − λ` in the plane, their normal
//! derivatives on the unit circle, and the differenced kernels `DΦ` and `δΦ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::geometry::PolarPoint;
use crate::special_functions::k0_k1;

const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Laplace,
    ModifiedHelmholtz,
}

/// Operator `Δ − λ` (λ = 0 for Laplace) and its fundamental solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    lambda: f64,
}

impl KernelSpec {
    pub fn laplace() -> Self {
        Self {
            family: KernelFamily::Laplace,
            lambda: 0.0,
        }
    }

    pub fn modified_helmholtz(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(PfnnError::InvalidArgument(format!(
                "modified Helmholtz needs lambda > 0, got {lambda}"
            )));
        }
        Ok(Self {
            family: KernelFamily::ModifiedHelmholtz,
            lambda,
        })
    }

    /// Laplace for `lambda == 0`, modified Helmholtz otherwise.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if lambda == 0.0 {
            Ok(Self::laplace())
        } else {
            Self::modified_helmholtz(lambda)
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Φ` as a function of the distance `d > 0` (unchecked).
    #[inline]
    pub fn phi_of_distance(&self, d: f64) -> f64 {
        match self.family {
            KernelFamily::Laplace => INV_2PI * d.ln(),
            KernelFamily::ModifiedHelmholtz => -INV_2PI * k0_k1(self.lambda.sqrt() * d).0,
        }
    }

    /// `∂Φ(x, y)/∂n_y` for `x = (r, θ1)` and `y = (1, θ2)` with `delta = θ1 − θ2`.
    ///
    /// Unchecked: the two points must differ.
    #[inline]
    pub fn dphi_dn_polar(&self, r: f64, delta: f64) -> f64 {
        let s = (0.5 * delta).sin();
        let one_minus_r = 1.0 - r;
        // 1 − r cos Δ and |x − y|², both free of cancellation
        let num = one_minus_r + 2.0 * r * s * s;
        let d2 = one_minus_r * one_minus_r + 4.0 * r * s * s;
        match self.family {
            KernelFamily::Laplace => INV_2PI * num / d2,
            KernelFamily::ModifiedHelmholtz => {
                let sl = self.lambda.sqrt();
                let d = d2.sqrt();
                INV_2PI * sl * k0_k1(sl * d).1 * num / d
            }
        }
    }
}

/// The `x → y` limit of `∂Φ(x, y)/∂n_y` along the circle, `1/(4π)`.
pub fn dphi_dn_diag(_spec: &KernelSpec) -> f64 {
    INV_4PI
}

/// Fundamental solution `Φ(x, y)`.
pub fn phi(spec: &KernelSpec, x: &PolarPoint, y: &PolarPoint) -> Result<f64> {
    let d = x.distance(y);
    if d == 0.0 {
        return Err(PfnnError::Singular("phi at coincident points".into()));
    }
    Ok(spec.phi_of_distance(d))
}

/// Normal derivative `∂Φ(x, y)/∂n_y` for `y` on the unit circle.
pub fn dphi_dn(spec: &KernelSpec, x: &PolarPoint, y: &PolarPoint) -> Result<f64> {
    if !y.is_on_boundary() {
        return Err(PfnnError::InvalidArgument(
            "normal derivative needs y on the unit circle".into(),
        ));
    }
    if x.distance(y) == 0.0 {
        return Err(PfnnError::Singular(
            "dphi_dn at coincident points; use dphi_dn_diag".into(),
        ));
    }
    Ok(spec.dphi_dn_polar(x.r(), x.theta() - y.theta()))
}

/// `DΦ(x, y) = ∂Φ(x, y)/∂n_y − ∂Φ(x*, y)/∂n_y`.
pub fn d_phi(spec: &KernelSpec, x: &PolarPoint, y: &PolarPoint) -> Result<f64> {
    if !y.is_on_boundary() {
        return Err(PfnnError::InvalidArgument(
            "DΦ needs y on the unit circle".into(),
        ));
    }
    if x.is_on_boundary() {
        return Ok(0.0);
    }
    let x_star = x.boundary_projection()?;
    let at_star = if x_star.distance(y) == 0.0 {
        dphi_dn_diag(spec)
    } else {
        spec.dphi_dn_polar(1.0, x_star.theta() - y.theta())
    };
    Ok(dphi_dn(spec, x, y)? - at_star)
}

/// `δΦ(x, y) = Φ(x, y) − Φ(x*, y)`.
pub fn delta_phi(spec: &KernelSpec, x: &PolarPoint, y: &PolarPoint) -> Result<f64> {
    let x_star = x.boundary_projection()?;
    if x.distance(y) == 0.0 || x_star.distance(y) == 0.0 {
        return Err(PfnnError::Singular("delta_phi at a singular point".into()));
    }
    if x.is_on_boundary() {
        return Ok(0.0);
    }
    Ok(phi(spec, x, y)? - phi(spec, &x_star, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{bessel_k0, bessel_k1};

    fn pt(r: f64, t: f64) -> PolarPoint {
        PolarPoint::new(r, t).unwrap()
    }

    #[test]
    fn phi_examples() {
        let l = KernelSpec::laplace();
        assert!(phi(&l, &pt(0.0, 0.0), &pt(1.0, 0.3)).unwrap().abs() < 1e-16);
        let v = phi(&l, &pt(1.0, 0.0), &pt(1.0, PI)).unwrap();
        assert!((v - 2f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!((v - 0.110_318).abs() < 1e-6);
        let h = KernelSpec::modified_helmholtz(1.0).unwrap();
        let v = phi(&h, &pt(0.0, 0.0), &pt(1.0, 2.0)).unwrap();
        assert!((v + bessel_k0(1.0).unwrap() / (2.0 * PI)).abs() < 1e-15);
        assert!((v + 0.067_008_120_508).abs() < 1e-11);
        assert!(phi(&l, &pt(0.5, 1.0), &pt(0.5, 1.0)).is_err());
    }

    #[test]
    fn dphi_dn_examples() {
        let l = KernelSpec::laplace();
        for t in [0.1, 1.0, 2.0, PI, 5.5] {
            let v = dphi_dn(&l, &pt(1.0, 0.0), &pt(1.0, t)).unwrap();
            assert!((v - 0.25 / PI).abs() < 1e-15);
            let c = dphi_dn(&l, &pt(0.0, 0.0), &pt(1.0, t)).unwrap();
            assert!((c - 0.5 / PI).abs() < 1e-15);
        }
        let h = KernelSpec::modified_helmholtz(1.0).unwrap();
        // chord 1 between boundary points: angle gap π/3
        let v = dphi_dn(&h, &pt(1.0, 0.0), &pt(1.0, PI / 3.0)).unwrap();
        assert!((v - bessel_k1(1.0).unwrap() / (4.0 * PI)).abs() < 1e-14);
        assert!((v - 0.047_898_255_484).abs() < 1e-11);
        for s in [&l, &h, &KernelSpec::modified_helmholtz(4.0).unwrap()] {
            assert!((dphi_dn_diag(s) - 0.079_577_47).abs() < 1e-8);
        }
        assert!(dphi_dn(&l, &pt(1.0, 0.2), &pt(1.0, 0.2)).is_err());
        assert!(dphi_dn(&l, &pt(0.2, 0.2), &pt(0.5, 0.2)).is_err());
    }

    #[test]
    fn d_phi_examples() {
        let l = KernelSpec::laplace();
        let v = d_phi(&l, &pt(0.5, 0.0), &pt(1.0, PI)).unwrap();
        let expect = 1.5 / (2.0 * PI * 2.25) - 0.25 / PI;
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.026_526).abs() < 1e-6);
        assert_eq!(d_phi(&l, &pt(1.0, 0.0), &pt(1.0, 0.0)).unwrap(), 0.0);
        let near = d_phi(&l, &pt(1.0 - 1e-6, 0.0), &pt(1.0, 2.0)).unwrap();
        assert!(near.abs() < 1e-6);
    }

    #[test]
    fn delta_phi_examples() {
        let l = KernelSpec::laplace();
        let v = delta_phi(&l, &pt(0.5, 0.0), &pt(1e-12, 0.0)).unwrap();
        assert!((v + 0.110_318).abs() < 1e-6);
        assert_eq!(delta_phi(&l, &pt(1.0, 0.0), &pt(0.3, 1.0)).unwrap(), 0.0);
        let h = KernelSpec::modified_helmholtz(1.0).unwrap();
        let v = delta_phi(&h, &pt(0.5, 0.0), &pt(1.0, PI)).unwrap();
        let expect = (-bessel_k0(1.5).unwrap() + bessel_k0(2.0).unwrap()) / (2.0 * PI);
        assert!((v - expect).abs() < 1e-15);
        assert!(delta_phi(&l, &pt(0.5, 0.0), &pt(1.0, 0.0)).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::modified_helmholtz(0.0).is_err());
        assert!(KernelSpec::modified_helmholtz(-1.0).is_err());
        assert_eq!(KernelSpec::from_lambda(0.0).unwrap().family(), KernelFamily::Laplace);
    }
}
