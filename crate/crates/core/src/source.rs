//! Domain potentials `S(x) = ∫Ω Φ(x, y) ψ(y) dy` for the source term.
//!
//! Three discretizations: adaptive singular quadrature of a closed-form
//! source, the plain polar grid sum used by the recurrent loop, and zero.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{PfnnError, Result};
use crate::geometry::{distance_polar, BoundaryGrid, DiscGrid, PolarPoint};
use crate::kernels::KernelSpec;
use crate::quadrature::{
    disc_integrate_singular, gauss_legendre, integrate_polar_rect, unwrap_angle, DiscSample, PolarRect,
    QuadratureSpec,
};

/// Scalar field on the plane in Cartesian coordinates.
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Discretized domain potential of a source term.
pub trait SourcePotential: Send + Sync {
    /// Approximation of `∫Ω Φ(x, y) ψ(y) dy`.
    fn potential(&self, x: &PolarPoint) -> Result<f64>;

    /// Higher-accuracy evaluation of the same integral (for D-terms).
    fn reference_potential(&self, x: &PolarPoint) -> Result<f64>;

    /// Potential at every node of `grid`, row-major.
    fn potential_on_grid(&self, grid: &DiscGrid) -> Result<Vec<f64>> {
        let pts: Vec<PolarPoint> = grid.points().collect();
        pts.par_iter().map(|p| self.potential(p)).collect()
    }

    /// Potential at the boundary collocation nodes.
    fn potential_on_boundary(&self, grid: &BoundaryGrid) -> Result<Vec<f64>> {
        (0..grid.n_nodes())
            .into_par_iter()
            .map(|i| self.potential(&grid.point(i)))
            .collect()
    }

    fn is_zero(&self) -> bool {
        false
    }
}

/// `ψ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl SourcePotential for ZeroSource {
    fn potential(&self, _x: &PolarPoint) -> Result<f64> {
        Ok(0.0)
    }

    fn reference_potential(&self, _x: &PolarPoint) -> Result<f64> {
        Ok(0.0)
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `V(r) = ∫Ω Φ(x, y) dy` for `|x| = r`, cached per radius.
pub struct RadialPotential {
    spec: KernelSpec,
    quad: QuadratureSpec,
    cache: Mutex<HashMap<u64, f64>>,
}

impl RadialPotential {
    pub fn new(spec: KernelSpec, quad: QuadratureSpec) -> Self {
        Self {
            spec,
            quad,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        let key = r.to_bits();
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = unit_potential(&self.spec, r, &self.quad)?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }
}

fn unit_potential(spec: &KernelSpec, r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let x = PolarPoint::new(r, 0.0)?;
    let spec = *spec;
    let f = move |s: &DiscSample| {
        let d = ((s.x1 - r).powi(2) + s.x2 * s.x2).sqrt();
        spec.phi_of_distance(d)
    };
    disc_integrate_singular(&f, &x, quad)
}

/// Closed-form source integrated by adaptive singular quadrature.
///
/// The singular part is subtracted: `S(x) = ∫ Φ(x, y)(ψ(y) − ψ(x)) dy +
/// ψ(x) V(|x|)`, so the adaptive integrand vanishes at the singular point.
pub struct AdaptiveSource {
    spec: KernelSpec,
    psi: ScalarField,
    quad: QuadratureSpec,
    radial: RadialPotential,
    reference_radial: RadialPotential,
}

impl AdaptiveSource {
    pub fn new(spec: KernelSpec, psi: ScalarField, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let reference = Self::reference_spec(&quad);
        Ok(Self {
            spec,
            psi,
            quad,
            radial: RadialPotential::new(spec, quad),
            reference_radial: RadialPotential::new(spec, reference),
        })
    }

    fn reference_spec(quad: &QuadratureSpec) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: quad.rel_tol / 16.0,
            max_subdivisions: quad.max_subdivisions + 4,
            ..*quad
        }
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    fn evaluate(&self, x: &PolarPoint, quad: &QuadratureSpec, radial: &RadialPotential) -> Result<f64> {
        let (a1, a2) = x.to_cartesian();
        let psi_x = (self.psi)(a1, a2);
        let spec = self.spec;
        let psi = &self.psi;
        let f = move |s: &DiscSample| {
            let d = ((s.x1 - a1).powi(2) + (s.x2 - a2).powi(2)).sqrt();
            if d == 0.0 {
                return 0.0;
            }
            spec.phi_of_distance(d) * (psi(s.x1, s.x2) - psi_x)
        };
        let regular = disc_integrate_singular(&f, x, quad)?;
        Ok(regular + psi_x * radial.value(x.r())?)
    }
}

impl SourcePotential for AdaptiveSource {
    fn potential(&self, x: &PolarPoint) -> Result<f64> {
        self.evaluate(x, &self.quad, &self.radial)
    }

    fn reference_potential(&self, x: &PolarPoint) -> Result<f64> {
        self.evaluate(x, &Self::reference_spec(&self.quad), &self.reference_radial)
    }
}

/// `Φ(|x − y|)·r_y Δr Δθ` for `x = (r_i, 0)`, `y = (r_k, θ_m)` on a uniform
/// polar grid, with the coincident node zeroed.
pub struct RotationTable {
    n_r: usize,
    n_t: usize,
    data: Vec<f64>,
}

impl RotationTable {
    pub fn new(spec: &KernelSpec, grid: &DiscGrid) -> Self {
        let n_r = grid.n_r();
        let n_t = grid.n_theta();
        let radii = grid.radii();
        let thetas = grid.thetas();
        let w = grid.d_r() * grid.d_theta();
        let data: Vec<f64> = (0..n_r)
            .into_par_iter()
            .flat_map_iter(|i| {
                let ri = radii[i];
                (0..n_r).flat_map(move |k| {
                    let rk = radii[k];
                    (0..n_t).map(move |m| {
                        if i == k && m == 0 {
                            0.0
                        } else {
                            spec.phi_of_distance(distance_polar(ri, 0.0, rk, thetas[m])) * rk * w
                        }
                    })
                })
            })
            .collect();
        Self { n_r, n_t, data }
    }

    #[inline]
    fn block(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.n_r + k) * self.n_t;
        &self.data[start..start + self.n_t]
    }
}

/// Source given by values on a uniform polar grid, integrated by the plain
/// grid sum (singular node excluded).
pub struct GridSource {
    spec: KernelSpec,
    grid: DiscGrid,
    values: Vec<f64>,
    table: Option<Arc<RotationTable>>,
    reference_quad: QuadratureSpec,
    on_own_grid: OnceLock<Vec<f64>>,
}

impl GridSource {
    pub fn new(spec: KernelSpec, grid: DiscGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(PfnnError::GridMismatch(format!(
                "{} source values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PfnnError::NonFinite("grid source value".into()));
        }
        Ok(Self {
            spec,
            grid,
            values,
            table: None,
            reference_quad: QuadratureSpec::adaptive(1e-7, 12)?,
            on_own_grid: OnceLock::new(),
        })
    }

    /// Attach a precomputed rotation table for fast whole-grid evaluation.
    pub fn with_table(mut self, table: Arc<RotationTable>) -> Result<Self> {
        if table.n_r != self.grid.n_r() || table.n_t != self.grid.n_theta() {
            return Err(PfnnError::GridMismatch("rotation table shape".into()));
        }
        self.table = Some(table);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    // Bilinear interpolant in (r, θ), periodic in θ, constant below the
    // first radius and above the last.
    fn interpolate(&self, r: f64, theta: f64) -> f64 {
        let radii = self.grid.radii();
        let n_t = self.grid.n_theta();
        let tt = theta.rem_euclid(2.0 * PI) / self.grid.d_theta();
        let j0 = (tt.floor() as usize) % n_t;
        let j1 = (j0 + 1) % n_t;
        let ft = tt - tt.floor();
        let (i0, i1, fr) = if r <= radii[0] {
            (0, 0, 0.0)
        } else if r >= radii[radii.len() - 1] {
            let l = radii.len() - 1;
            (l, l, 0.0)
        } else {
            let mut i = ((r - radii[0]) / self.grid.d_r()).floor() as usize;
            i = i.min(radii.len() - 2);
            (i, i + 1, (r - radii[i]) / (radii[i + 1] - radii[i]))
        };
        let v = |i: usize, j: usize| self.values[i * n_t + j];
        let a = v(i0, j0) * (1.0 - ft) + v(i0, j1) * ft;
        let b = v(i1, j0) * (1.0 - ft) + v(i1, j1) * ft;
        a * (1.0 - fr) + b * fr
    }
}

impl SourcePotential for GridSource {
    fn potential(&self, x: &PolarPoint) -> Result<f64> {
        let w = self.grid.d_r() * self.grid.d_theta();
        let mut total = 0.0;
        for (i, &rk) in self.grid.radii().iter().enumerate() {
            let mut row = 0.0;
            for (j, &tk) in self.grid.thetas().iter().enumerate() {
                let d = distance_polar(x.r(), x.theta(), rk, tk);
                if d == 0.0 {
                    continue;
                }
                row += self.spec.phi_of_distance(d) * self.values[i * self.grid.n_theta() + j];
            }
            total += row * rk;
        }
        Ok(total * w)
    }

    // Integrates the interpolant cell by cell: a 3×3 Gauss rule where the
    // integrand is smooth, adaptive quadrature on cells near `x`.
    fn reference_potential(&self, x: &PolarPoint) -> Result<f64> {
        let (a1, a2) = x.to_cartesian();
        let (xr, xt) = (x.r(), x.theta());
        let spec = self.spec;
        let f = |s: &DiscSample| {
            let d = ((s.x1 - a1).powi(2) + (s.x2 - a2).powi(2)).sqrt();
            if d == 0.0 {
                return 0.0;
            }
            spec.phi_of_distance(d) * self.interpolate(s.r, s.theta)
        };
        let radii = self.grid.radii();
        let mut edges = vec![0.0];
        edges.extend(radii.iter().copied().filter(|&r| r > 0.0));
        if edges[edges.len() - 1] < 1.0 {
            edges.push(1.0);
        }
        let dt = self.grid.d_theta();
        let (gx, gw) = gauss_legendre(3);
        let mut total = 0.0;
        for band in edges.windows(2) {
            let (r0, r1) = (band[0], band[1]);
            let (rc, hr) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
            let diam = (r1 - r0).max(r1 * dt);
            for &t0 in self.grid.thetas() {
                let tc = t0 + 0.5 * dt;
                if distance_polar(xr, xt, rc, tc) < 2.0 * diam {
                    let xu = unwrap_angle(xt, tc);
                    let inside = xr >= r0 && xr <= r1 && xu >= t0 && xu <= t0 + dt;
                    let rect = PolarRect { r0, r1, t0, t1: t0 + dt };
                    total += integrate_polar_rect(&f, rect, inside.then_some((xr, xu)), &self.reference_quad)?;
                    continue;
                }
                let mut acc = 0.0;
                for (ur, wr) in gx.iter().zip(&gw) {
                    let r = rc + hr * ur;
                    for (ut, wt) in gx.iter().zip(&gw) {
                        let t = tc + 0.5 * dt * ut;
                        let d = distance_polar(xr, xt, r, t);
                        acc += wr * wt * r * spec.phi_of_distance(d) * self.interpolate(r, t);
                    }
                }
                total += 0.5 * hr * dt * acc;
            }
        }
        if !total.is_finite() {
            return Err(PfnnError::NonFinite(format!("reference potential at r = {xr}")));
        }
        Ok(total)
    }

    fn potential_on_grid(&self, grid: &DiscGrid) -> Result<Vec<f64>> {
        let table = match &self.table {
            Some(t) if *grid == self.grid => t.clone(),
            _ => {
                let pts: Vec<PolarPoint> = grid.points().collect();
                return pts.par_iter().map(|p| self.potential(p)).collect();
            }
        };
        if let Some(v) = self.on_own_grid.get() {
            return Ok(v.clone());
        }
        let n_r = self.grid.n_r();
        let n_t = self.grid.n_theta();
        let rows: Vec<Vec<f64>> = (0..n_r)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0; n_t];
                for k in 0..n_r {
                    let blk = table.block(i, k);
                    let vals = &self.values[k * n_t..(k + 1) * n_t];
                    for (j, o) in out.iter_mut().enumerate() {
                        // y angle θ_j + θ_m
                        let mut acc = 0.0;
                        let split = n_t - j;
                        for m in 0..split {
                            acc += blk[m] * vals[j + m];
                        }
                        for m in split..n_t {
                            acc += blk[m] * vals[j + m - n_t];
                        }
                        *o += acc;
                    }
                }
                out
            })
            .collect();
        Ok(self.on_own_grid.get_or_init(|| rows.concat()).clone())
    }

    fn potential_on_boundary(&self, grid: &BoundaryGrid) -> Result<Vec<f64>> {
        if let (Some(row), true) = (self.grid.boundary_row(), grid.n_nodes() == self.grid.n_theta()) {
            if self.table.is_some() {
                let all = self.potential_on_grid(&self.grid)?;
                let n_t = self.grid.n_theta();
                return Ok(all[row * n_t..(row + 1) * n_t].to_vec());
            }
        }
        (0..grid.n_nodes())
            .into_par_iter()
            .map(|i| self.potential(&grid.point(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_source() {
        let z = ZeroSource;
        assert_eq!(z.potential(&PolarPoint::boundary(1.0)).unwrap(), 0.0);
        assert!(z.is_zero());
    }

    #[test]
    fn grid_table_matches_direct_sum() {
        let spec = KernelSpec::modified_helmholtz(1.0).unwrap();
        let grid = DiscGrid::uniform(6, 10).unwrap();
        let vals: Vec<f64> = grid.points().map(|p| p.r() * (1.0 + p.theta().cos())).collect();
        let table = Arc::new(RotationTable::new(&spec, &grid));
        let src = GridSource::new(spec, grid.clone(), vals).unwrap().with_table(table).unwrap();
        let fast = src.potential_on_grid(&grid).unwrap();
        for (p, v) in grid.points().zip(&fast) {
            let direct = src.potential(&p).unwrap();
            assert!((direct - v).abs() < 1e-13);
        }
        let b = src.potential_on_boundary(&BoundaryGrid::new(10).unwrap()).unwrap();
        assert_eq!(&b[..], &fast[50..60]);
    }

    #[test]
    fn adaptive_source_subtraction() {
        let spec = KernelSpec::laplace();
        let psi: ScalarField = Arc::new(|x1, _| 2.0 * x1);
        let src = AdaptiveSource::new(spec, psi, QuadratureSpec::default()).unwrap();
        let x = PolarPoint::new(0.5, 0.0).unwrap();
        assert!((src.potential(&x).unwrap() + 0.218_75).abs() < 1e-10);
        assert!((src.reference_potential(&x).unwrap() + 0.218_75).abs() < 1e-10);
    }
}
