//! Measured error metrics and a-priori bounds.
//!
//! The domain and boundary bounds assemble the density error `‖β − β_M‖`
//! and four quadrature terms:
//! D1 (`λ∫δΦ`), D2 (`∫Φψ`), D3 (`∫(β_M − β_M(x*))DΦ`), D4 (`∫β_M ∂Φ/∂n`),
//! each estimated as `|coarse − reference|` over sample points.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::fredholm_net::{BoundaryDensity, FredholmNet};
use crate::geometry::{angle_diff, DiscGrid, PolarPoint};
use crate::kernels::dphi_dn_diag;
use crate::pfnn::{PotentialSolver, SolutionField};
use crate::quadrature::QuadratureSpec;
use crate::source::RadialPotential;

/// Refinement factor of the reference boundary quadrature.
pub const REFINEMENT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mae_interior: f64,
    pub linf_interior: f64,
    pub mae_boundary: f64,
    pub linf_boundary: f64,
    pub bound_interior: Option<f64>,
    pub bound_boundary: Option<f64>,
    pub components: BTreeMap<String, f64>,
}

/// MAE and L∞ against `exact` over interior nodes and the `r = 1` row.
pub fn metrics(field: &SolutionField, exact: &dyn Fn(f64, f64) -> f64) -> ErrorReport {
    let mut acc = [(0.0, 0.0_f64, 0usize); 2];
    for (p, v) in field.nodes() {
        let (x1, x2) = p.to_cartesian();
        let e = (v - exact(x1, x2)).abs();
        let a = &mut acc[p.is_on_boundary() as usize];
        a.0 += e;
        a.1 = a.1.max(e);
        a.2 += 1;
    }
    let mae = |a: (f64, f64, usize)| if a.2 == 0 { 0.0 } else { a.0 / a.2 as f64 };
    ErrorReport {
        mae_interior: mae(acc[0]),
        linf_interior: acc[0].1,
        mae_boundary: mae(acc[1]),
        linf_boundary: acc[1].1,
        bound_interior: None,
        bound_boundary: None,
        components: BTreeMap::new(),
    }
}

impl ErrorReport {
    pub fn with_bounds(mut self, c: &BoundComponents) -> Self {
        self.bound_interior = Some(domain_bound(c));
        self.bound_boundary = Some(boundary_bound(c));
        self.components = c.to_map();
        self
    }
}

/// A-priori error of the Krasnoselskii–Mann network with constant `κ`:
/// `e^{1−q}/(1−q) · (‖Tg − g‖ + D(b − a)²/(2n)) · e^{−(1−q)Mκ}`.
pub fn fnn_bound(
    q_eff: f64,
    kappa: f64,
    n_layers: usize,
    tg_minus_g: f64,
    d_const: f64,
    interval_len: f64,
    n_nodes: usize,
) -> Result<f64> {
    if !(q_eff < 1.0) {
        return Err(PfnnError::BoundDegenerate(format!(
            "contraction constant {q_eff} is not below 1"
        )));
    }
    if n_nodes == 0 {
        return Err(PfnnError::InvalidArgument("n_nodes must be positive".into()));
    }
    let gap = 1.0 - q_eff;
    let v_m = n_layers as f64 * kappa;
    let quad = d_const * interval_len * interval_len / (2.0 * n_nodes as f64);
    Ok(gap.exp() / gap * (tg_minus_g + quad) * (-gap * v_m).exp())
}

/// `ε + qⁿ·gap`.
pub fn recurrent_bound(eps: f64, q: f64, n: usize, init_gap: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(PfnnError::BoundDegenerate(format!("contraction ratio {q} outside (0, 1)")));
    }
    Ok(eps + q.powi(n as i32) * init_gap)
}

/// D-terms; `_domain` entries are maxima over interior samples, `_boundary`
/// over boundary samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationTerms {
    pub d1: f64,
    pub d2_domain: f64,
    pub d2_boundary: f64,
    pub d3: f64,
    pub d4_domain: f64,
    pub d4_boundary: f64,
}

/// Every radius of `disc` at `angles` evenly spaced angles (snapped to the
/// grid's angles), plus the same angles on the circle.
pub fn sample_points(disc: &DiscGrid, angles: usize) -> Vec<PolarPoint> {
    let n_t = disc.n_theta();
    let angles = angles.clamp(1, n_t);
    let mut cols: Vec<usize> = (0..angles).map(|a| a * n_t / angles).collect();
    cols.dedup();
    let mut out = Vec::new();
    for &r in disc.radii() {
        for &j in &cols {
            out.push(PolarPoint::new(r, disc.thetas()[j]).expect("grid point"));
        }
    }
    if disc.boundary_row().is_none() {
        out.extend(cols.iter().map(|&j| PolarPoint::boundary(disc.thetas()[j])));
    }
    out
}

/// Trigonometric interpolant of node values on a uniform periodic grid.
pub struct TrigInterpolant {
    n: usize,
    coef: Vec<(f64, f64)>,
}

impl TrigInterpolant {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let table: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                (t.cos(), t.sin())
            })
            .collect();
        let coef = (0..=n / 2)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (j, v) in values.iter().enumerate() {
                    let (c, s) = table[(k * j) % n];
                    re += v * c;
                    im -= v * s;
                }
                (re / n as f64, im / n as f64)
            })
            .collect();
        Self { n, coef }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (c1, s1) = (theta.cos(), theta.sin());
        let (mut c, mut s) = (1.0, 0.0);
        let mut sum = self.coef[0].0;
        for (k, &(re, im)) in self.coef.iter().enumerate().skip(1) {
            let nc = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = nc;
            let w = if 2 * k == self.n { 1.0 } else { 2.0 };
            sum += w * (re * c - im * s);
        }
        sum
    }
}

/// D1–D4 at `samples` for the density `beta` produced by `solver`'s network.
pub fn discretization_terms(
    solver: &PotentialSolver,
    beta: &BoundaryDensity,
    samples: &[PolarPoint],
    quad: &QuadratureSpec,
) -> Result<DiscretizationTerms> {
    let spec = *solver.spec();
    let grid = solver.boundary_grid();
    let n = grid.n_nodes();
    let dt = grid.d_theta();
    let nf = n * REFINEMENT;
    let dtf = 2.0 * PI / nf as f64;
    let interp = TrigInterpolant::new(&beta.values);
    let fine: Vec<f64> = (0..nf).into_par_iter().map(|l| interp.eval(l as f64 * dtf)).collect();
    let reference_quad = QuadratureSpec {
        rel_tol: quad.rel_tol / REFINEMENT as f64,
        max_subdivisions: quad.max_subdivisions + 4,
        ..*quad
    };
    let volume_ref = RadialPotential::new(spec, reference_quad);
    let kernel = solver.kernel();

    // ∫ β ∂Φ(x*, ·)/∂n at x* = (1, θ): coarse and refined
    let d4_at = |theta: f64| -> f64 {
        let coarse: f64 = -0.5 * kernel.row_at(theta).iter().zip(&beta.values).map(|(k, b)| k * b).sum::<f64>() * dt;
        let refined: f64 = fine
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let t = l as f64 * dtf;
                let d = angle_diff(theta, t);
                let k = if d.abs() < 1e-14 { dphi_dn_diag(&spec) } else { spec.dphi_dn_polar(1.0, d) };
                k * b
            })
            .sum::<f64>()
            * dtf;
        (coarse - refined).abs()
    };

    let per_sample: Vec<(bool, f64, f64, f64, f64)> = samples
        .par_iter()
        .map(|x| -> Result<(bool, f64, f64, f64, f64)> {
            let on_boundary = x.r() > crate::pfnn::BOUNDARY_SNAP;
            let theta = x.theta();
            let p = if on_boundary { PolarPoint::boundary(theta) } else { *x };
            let d2 = if solver.problem().source.is_zero() {
                0.0
            } else {
                (solver.problem().source.potential(&p)? - solver.problem().source.reference_potential(&p)?).abs()
            };
            let d4 = d4_at(theta);
            if on_boundary {
                return Ok((true, 0.0, d2, 0.0, d4));
            }
            let r = p.r();
            let d1 = if spec.lambda() > 0.0 {
                let coarse = solver.volume_term(r)?;
                let refined = spec.lambda() * (volume_ref.value(r)? - volume_ref.value(1.0)?);
                (coarse - refined).abs()
            } else {
                0.0
            };
            let layer = solver.potential_layer(&p, beta)?;
            let coarse3: f64 = layer
                .w_out
                .iter()
                .zip(&beta.values)
                .map(|(w, b)| w * (b - layer.beta_star))
                .sum();
            let bstar = interp.eval(theta);
            let refined3: f64 = fine
                .iter()
                .enumerate()
                .map(|(l, b)| {
                    let t = l as f64 * dtf;
                    let d = angle_diff(theta, t);
                    let at_star = if d.abs() < 1e-14 { dphi_dn_diag(&spec) } else { spec.dphi_dn_polar(1.0, d) };
                    (spec.dphi_dn_polar(r, d) - at_star) * (b - bstar)
                })
                .sum::<f64>()
                * dtf;
            Ok((false, d1, d2, (coarse3 - refined3).abs(), d4))
        })
        .collect::<Result<_>>()?;

    let mut t = DiscretizationTerms::default();
    for (on_b, d1, d2, d3, d4) in per_sample {
        if on_b {
            t.d2_boundary = t.d2_boundary.max(d2);
            t.d4_boundary = t.d4_boundary.max(d4);
        } else {
            t.d1 = t.d1.max(d1);
            t.d2_domain = t.d2_domain.max(d2);
            t.d3 = t.d3.max(d3);
            t.d4_domain = t.d4_domain.max(d4);
        }
    }
    Ok(t)
}

/// Everything the two bounds are assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    /// Estimate of `‖β − β_M‖`.
    pub fnn_term: f64,
    pub beta_norm: f64,
    /// `sup |∫∂Ω DΦ(x, y) dσ|` over the interior samples.
    pub dphi_integral: f64,
    /// `sup |λ∫Ω δΦ(x, y) dy|`.
    pub volume_integral: f64,
    /// `sup |∫∂Ω ∂Φ(x, y)/∂n dσ|` over the interior samples and their projections.
    pub flux_domain: f64,
    /// `|∫∂Ω ∂Φ(x*, y)/∂n dσ|` on the circle.
    pub flux_boundary: f64,
    /// Floating-point floor of the evaluated sums.
    pub rounding: f64,
    pub residual: f64,
    pub inverse_norm: f64,
    pub terms: DiscretizationTerms,
}

impl BoundComponents {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let t = &self.terms;
        [
            ("fnn_term", self.fnn_term),
            ("beta_norm", self.beta_norm),
            ("D1", t.d1),
            ("D2", t.d2_domain),
            ("D2_boundary", t.d2_boundary),
            ("D3", t.d3),
            ("D4", t.d4_domain),
            ("D4_boundary", t.d4_boundary),
            ("dphi_integral", self.dphi_integral),
            ("volume_integral", self.volume_integral),
            ("flux_domain", self.flux_domain),
            ("flux_boundary", self.flux_boundary),
            ("rounding", self.rounding),
            ("residual", self.residual),
            ("inverse_norm", self.inverse_norm),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Interior bound:
/// `‖β−β_M‖(½ + 2‖∫DΦ‖ + ‖λ∫δΦ‖ + ‖∫∂Φ/∂n‖) + ‖β_M‖D1 + D2 + D3 + D4`.
pub fn domain_bound(c: &BoundComponents) -> f64 {
    let t = &c.terms;
    c.fnn_term * (0.5 + 2.0 * c.dphi_integral + c.volume_integral + c.flux_domain)
        + c.beta_norm * t.d1
        + t.d2_domain
        + t.d3
        + t.d4_domain
        + c.rounding
}

/// Boundary bound: `‖β−β_M‖(½ + ‖∫∂Φ(x*,·)/∂n‖) + D2 + D4`.
pub fn boundary_bound(c: &BoundComponents) -> f64 {
    let t = &c.terms;
    c.fnn_term * (0.5 + c.flux_boundary) + t.d2_boundary + t.d4_boundary + c.rounding
}

/// Assemble the bound components for a forward solve. `‖β − β_M‖` is
/// estimated as `‖(I − K̃)⁻¹‖∞ (‖residual‖∞ + 2(D2 + D4) on the circle)`.
pub fn bound_components(
    solver: &PotentialSolver,
    net: &FredholmNet,
    beta: &BoundaryDensity,
    samples: &[PolarPoint],
    quad: &QuadratureSpec,
) -> Result<BoundComponents> {
    let terms = discretization_terms(solver, beta, samples, quad)?;
    let residual = net.residual(beta)?;
    let inverse_norm = net.inverse_norm_inf()?;
    let fnn_term = inverse_norm * (residual + 2.0 * (terms.d2_boundary + terms.d4_boundary));

    let spec = *solver.spec();
    let lambda = spec.lambda();
    let reference_quad = QuadratureSpec {
        rel_tol: quad.rel_tol / REFINEMENT as f64,
        max_subdivisions: quad.max_subdivisions + 4,
        ..*quad
    };
    let v = RadialPotential::new(spec, reference_quad);
    let v1 = if lambda > 0.0 { v.value(1.0)? } else { 0.0 };
    let flux_boundary = (0.5 + lambda * v1).abs();
    let (mut dphi_integral, mut volume_integral, mut flux_domain) = (0.0_f64, 0.0_f64, flux_boundary);
    for x in samples.iter().filter(|x| x.r() <= crate::pfnn::BOUNDARY_SNAP) {
        let vr = if lambda > 0.0 { v.value(x.r())? } else { 0.0 };
        dphi_integral = dphi_integral.max((0.5 + lambda * (vr - v1)).abs());
        volume_integral = volume_integral.max((lambda * (vr - v1)).abs());
        flux_domain = flux_domain.max((1.0 + lambda * vr).abs());
    }
    let beta_norm = beta.sup_norm();
    let s_max = solver.source_at_nodes().iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let n = beta.values.len() as f64;
    let rounding = 4.0 * n.sqrt() * f64::EPSILON * (beta_norm + s_max);
    Ok(BoundComponents {
        fnn_term,
        beta_norm,
        dphi_integral,
        volume_integral,
        flux_domain,
        flux_boundary,
        rounding,
        residual,
        inverse_norm,
        terms,
    })
}
