//! Inverse source problem: learn `ψ_θ` in `Δu = ψ`, `u = f` from interior
//! samples of `u`.
//!
//! For fixed geometry and network hyperparameters the potential network is
//! affine in the source, so `û` at the data points is `Aψ + c` with `ψ` the
//! source sampled on a cell-centred polar grid. `A` is assembled once and
//! Levenberg–Marquardt then trains a one-hidden-layer tanh model through it.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::fredholm_net::bie_kernel_matrix;
use crate::geometry::{angle_diff, distance_polar, BoundaryGrid, DiscGrid, PolarPoint};
use crate::kernels::KernelSpec;
use crate::pfnn::{BoundaryFn, BoundaryValueProblem, PotentialSolver, BOUNDARY_SNAP};
use crate::quadrature::{gauss_legendre, integrate_polar_rect, unwrap_angle, DiscSample, PolarRect, QuadratureSpec};
use crate::source::{SourcePotential, ZeroSource};

/// Hidden width used by the reference experiment.
pub const DEFAULT_HIDDEN: usize = 20;

/// `ψ_θ(x) = w₂ᵀ tanh(W₁x + b₁) + b₀` with Cartesian input `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub hidden_weights: Vec<[f64; 2]>,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl SourceModel {
    /// Parameters drawn uniformly from `[−1, 1]`.
    pub fn random<R: Rng>(n_hidden: usize, rng: &mut R) -> Self {
        let mut u = || rng.gen_range(-1.0..=1.0);
        let hidden_weights = (0..n_hidden).map(|_| [u(), u()]).collect();
        let hidden_biases = (0..n_hidden).map(|_| u()).collect();
        let output_weights = (0..n_hidden).map(|_| u()).collect();
        Self {
            hidden_weights,
            hidden_biases,
            output_weights,
            output_bias: u(),
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_biases.len()
    }

    pub fn n_params(&self) -> usize {
        4 * self.n_hidden() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.n_hidden();
        if h == 0 || self.hidden_weights.len() != h || self.output_weights.len() != h {
            return Err(PfnnError::InvalidArgument("source model layer sizes disagree".into()));
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(PfnnError::NonFinite("source model parameter".into()));
        }
        Ok(())
    }

    /// Flat parameters: `W₁` row-major, `b₁`, `w₂`, `b₀`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for w in &self.hidden_weights {
            p.extend_from_slice(w);
        }
        p.extend_from_slice(&self.hidden_biases);
        p.extend_from_slice(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub fn from_params(n_hidden: usize, p: &[f64]) -> Result<Self> {
        if p.len() != 4 * n_hidden + 1 {
            return Err(PfnnError::InvalidArgument(format!(
                "{} parameters for {n_hidden} hidden units",
                p.len()
            )));
        }
        let h = n_hidden;
        Ok(Self {
            hidden_weights: (0..h).map(|i| [p[2 * i], p[2 * i + 1]]).collect(),
            hidden_biases: p[2 * h..3 * h].to_vec(),
            output_weights: p[3 * h..4 * h].to_vec(),
            output_bias: p[4 * h],
        })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut s = self.output_bias;
        for ((w, b), v) in self.hidden_weights.iter().zip(&self.hidden_biases).zip(&self.output_weights) {
            s += v * (w[0] * x1 + w[1] * x2 + b).tanh();
        }
        s
    }

    /// Values at `points` and the Jacobian `∂ψ(x_k)/∂θ` (rows: points).
    pub fn values_and_jacobian(&self, points: &[(f64, f64)]) -> (DVector<f64>, DMatrix<f64>) {
        let h = self.n_hidden();
        let mut values = DVector::from_element(points.len(), self.output_bias);
        let mut jac = DMatrix::zeros(points.len(), self.n_params());
        for (k, &(x1, x2)) in points.iter().enumerate() {
            for i in 0..h {
                let w = self.hidden_weights[i];
                let t = (w[0] * x1 + w[1] * x2 + self.hidden_biases[i]).tanh();
                let v = self.output_weights[i];
                let ds = v * (1.0 - t * t);
                values[k] += v * t;
                jac[(k, 2 * i)] = ds * x1;
                jac[(k, 2 * i + 1)] = ds * x2;
                jac[(k, 2 * h + i)] = ds;
                jac[(k, 3 * h + i)] = t;
            }
            jac[(k, 4 * h)] = 1.0;
        }
        (values, jac)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| PfnnError::InvalidArgument(format!("model to JSON: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| PfnnError::InvalidArgument(format!("model JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

/// Observations `ũ(x_i)` and the known boundary data.
#[derive(Clone)]
pub struct InverseDataset {
    pub points: Vec<PolarPoint>,
    pub values: Vec<f64>,
    pub boundary_f: BoundaryFn,
}

impl InverseDataset {
    pub fn new(points: Vec<PolarPoint>, values: Vec<f64>, boundary_f: BoundaryFn) -> Result<Self> {
        if points.len() != values.len() || points.is_empty() {
            return Err(PfnnError::GridMismatch(format!(
                "{} points with {} values",
                points.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PfnnError::NonFinite("observed value".into()));
        }
        Ok(Self {
            points,
            values,
            boundary_f,
        })
    }
}

/// Product-integration weights `w_k(x) = ∫_{cell k} Φ(x, y) dy` on a
/// cell-centred polar grid, so that `∫Ω Φ(x, y)ψ(y) dy ≈ Σ w_k(x) ψ_k` for
/// `ψ` sampled at the cell centres.
pub struct ProductWeights {
    spec: KernelSpec,
    grid: DiscGrid,
    quad: QuadratureSpec,
    centres: Vec<(f64, f64)>,
    areas: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl ProductWeights {
    pub fn new(spec: KernelSpec, n_r: usize, n_theta: usize, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let grid = DiscGrid::cell_centered(n_r, n_theta)?;
        let centres = grid.points().map(|p| p.to_cartesian()).collect();
        let areas = grid
            .points()
            .map(|p| p.r() * grid.d_r() * grid.d_theta())
            .collect();
        Ok(Self {
            spec,
            grid,
            quad,
            centres,
            areas,
            gl: gauss_legendre(3),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &DiscGrid {
        &self.grid
    }

    /// Cell centres in Cartesian coordinates, row-major.
    pub fn centres(&self) -> &[(f64, f64)] {
        &self.centres
    }

    /// Cell areas `r_k Δr Δθ`.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    /// Weight row at `x`. Cells within two diameters of `x` are integrated
    /// adaptively (with the log singularity when `x` lies in the cell), the
    /// rest by a 3×3 Gauss rule.
    pub fn row(&self, x: &PolarPoint) -> Result<Vec<f64>> {
        let (dr, dt) = (self.grid.d_r(), self.grid.d_theta());
        let (xr, xt) = (x.r(), x.theta());
        let (a1, a2) = x.to_cartesian();
        let spec = self.spec;
        let phi = move |s: &DiscSample| {
            let d = ((s.x1 - a1).powi(2) + (s.x2 - a2).powi(2)).sqrt();
            if d == 0.0 {
                0.0
            } else {
                spec.phi_of_distance(d)
            }
        };
        let (gx, gw) = &self.gl;
        let mut out = Vec::with_capacity(self.len());
        for (i, &rc) in self.grid.radii().iter().enumerate() {
            let (r0, r1) = (i as f64 * dr, (i + 1) as f64 * dr);
            let diam = dr.max(r1 * dt);
            for &tc in self.grid.thetas() {
                let (t0, t1) = (tc - 0.5 * dt, tc + 0.5 * dt);
                if distance_polar(xr, xt, rc, tc) < 2.0 * diam {
                    let xu = unwrap_angle(xt, tc);
                    let inside = xr >= r0 && xr <= r1 && xu >= t0 && xu <= t1;
                    let rect = PolarRect { r0, r1, t0, t1 };
                    out.push(integrate_polar_rect(&phi, rect, inside.then_some((xr, xu)), &self.quad)?);
                    continue;
                }
                let mut acc = 0.0;
                for (ur, wr) in gx.iter().zip(gw) {
                    let r = rc + 0.5 * dr * ur;
                    for (ut, wt) in gx.iter().zip(gw) {
                        let t = tc + 0.5 * dt * ut;
                        acc += wr * wt * r * spec.phi_of_distance(distance_polar(xr, xt, r, t));
                    }
                }
                out.push(0.25 * dr * dt * acc);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PfnnError::NonFinite(format!("product weight at r = {xr}, theta = {xt}")));
        }
        Ok(out)
    }

    /// Weight rows at many points, one matrix row per point.
    pub fn matrix(&self, points: &[PolarPoint]) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = points.par_iter().map(|p| self.row(p)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(points.len(), self.len(), |i, k| rows[i][k]))
    }
}

/// Source potential of cell values through [`ProductWeights`].
pub struct WeightedSource {
    weights: Arc<ProductWeights>,
    values: Vec<f64>,
}

impl WeightedSource {
    pub fn new(weights: Arc<ProductWeights>, values: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(PfnnError::GridMismatch(format!(
                "{} source values for {} cells",
                values.len(),
                weights.len()
            )));
        }
        Ok(Self { weights, values })
    }
}

impl SourcePotential for WeightedSource {
    fn potential(&self, x: &PolarPoint) -> Result<f64> {
        let row = self.weights.row(x)?;
        Ok(row.iter().zip(&self.values).map(|(w, v)| w * v).sum())
    }

    fn reference_potential(&self, x: &PolarPoint) -> Result<f64> {
        self.potential(x)
    }
}

/// `û(x_i) = (Aψ)_i + c_i` at fixed evaluation points.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub points: Vec<PolarPoint>,
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, psi: &DVector<f64>) -> DVector<f64> {
        &self.a * psi + &self.c
    }
}

/// Network and grid settings shared by data generation and training.
#[derive(Debug, Clone, Copy)]
pub struct ForwardSettings {
    pub kappa: f64,
    pub n_layers: usize,
    pub boundary_nodes: usize,
    pub quad: QuadratureSpec,
}

/// Assemble `A` and `c` so that `Aψ + c` equals the potential network's
/// output at `points` for the source with cell values `ψ`.
///
/// With `β_M = Lg`, `L = κ Σ_{m<M} Wᵐ` and `g = 2(f − W_bψ)`, every output
/// is `ℓ(x)ᵀβ_M + a(x)g(θ) + w(x)ψ`; off-node evaluation points bring in the
/// Nyström density `g(θ) + Δθ Σ K(θ, θ_j)β_j`.
pub fn source_to_solution_map(
    points: &[PolarPoint],
    boundary: &BoundaryFn,
    weights: &ProductWeights,
    settings: &ForwardSettings,
) -> Result<AffineMap> {
    let spec = *weights.spec();
    let bgrid = BoundaryGrid::new(settings.boundary_nodes)?;
    let kernel = Arc::new(bie_kernel_matrix(&spec, &bgrid));
    let zero = BoundaryValueProblem {
        spec,
        boundary: boundary.clone(),
        source: Arc::new(ZeroSource),
    };
    let solver = PotentialSolver::with_kernel(zero, kernel.clone(), &settings.quad)?;
    let net = solver.network(settings.kappa, settings.n_layers)?;
    let n = bgrid.n_nodes();
    let dt = bgrid.d_theta();

    let w = net.w_hidden();
    let mut l = DMatrix::<f64>::identity(n, n);
    for _ in 1..settings.n_layers {
        l = w * l + DMatrix::identity(n, n);
    }
    l *= settings.kappa;

    struct PointRow {
        ell: Vec<f64>,
        // coefficient of g(θ) (off-node points only)
        a_star: f64,
        off_node: bool,
        snapped: PolarPoint,
    }
    let rows: Vec<PointRow> = points
        .par_iter()
        .map(|x| {
            let theta = x.theta();
            let snapped = if x.r() > BOUNDARY_SNAP { PolarPoint::boundary(theta) } else { *x };
            let row = kernel.row_at(theta);
            let mut ell: Vec<f64> = row.iter().map(|k| -0.5 * k * dt).collect();
            let mut a = 0.5;
            if !snapped.is_on_boundary() {
                let r = snapped.r();
                for (j, (&t, &k)) in bgrid.thetas().iter().zip(&row).enumerate() {
                    let w_out = (spec.dphi_dn_polar(r, angle_diff(theta, t)) + 0.5 * k) * dt;
                    ell[j] += w_out;
                    a -= w_out;
                }
                a += solver.volume_term(r)?;
            }
            let node = bgrid.node_index(theta);
            match node {
                Some(k) => ell[k] += a,
                None => {
                    for (e, k) in ell.iter_mut().zip(&row) {
                        *e += a * k * dt;
                    }
                }
            }
            Ok(PointRow {
                ell,
                a_star: a,
                off_node: node.is_none(),
                snapped,
            })
        })
        .collect::<Result<_>>()?;

    let p = points.len();
    let lambda_mat = DMatrix::from_fn(p, n, |i, j| rows[i].ell[j]);
    let u = lambda_mat * l;
    let node_points: Vec<PolarPoint> = (0..n).map(|i| bgrid.point(i)).collect();
    let wb = weights.matrix(&node_points)?;
    let snapped: Vec<PolarPoint> = rows.iter().map(|r| r.snapped).collect();
    let wx = weights.matrix(&snapped)?;

    let mut a = &wx - 2.0 * &u * &wb;
    let g0 = DVector::from_column_slice(solver.g());
    let mut c = &u * g0;
    for (i, row) in rows.iter().enumerate() {
        if row.off_node {
            let theta = row.snapped.theta();
            // g(θ) = 2(f(θ) − w(x*)ψ); x* is the snapped point on the circle
            let star = if row.snapped.is_on_boundary() {
                wx.row(i).clone_owned()
            } else {
                RowDVector::from_vec(weights.row(&PolarPoint::boundary(theta))?)
            };
            let mut ai = a.row_mut(i);
            ai -= 2.0 * row.a_star * star;
            c[i] += 2.0 * row.a_star * boundary(theta);
        }
    }
    if a.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(PfnnError::NonFinite("affine source map".into()));
    }
    Ok(AffineMap {
        points: points.to_vec(),
        a,
        c,
    })
}

/// Residual vector `[(û − ũ)/√N; √(λ_reg|cell|) ψ]` and its pieces.
struct Residuals {
    r: DVector<f64>,
    loss: f64,
}

fn residuals(psi: &DVector<f64>, data: &InverseDataset, map: &AffineMap, areas: &[f64], lambda_reg: f64) -> Residuals {
    let nd = data.values.len();
    let k = psi.len();
    let u = map.apply(psi);
    let sn = (nd as f64).sqrt();
    let reg = lambda_reg > 0.0;
    let mut r = DVector::zeros(nd + if reg { k } else { 0 });
    for i in 0..nd {
        r[i] = (u[i] - data.values[i]) / sn;
    }
    if reg {
        for j in 0..k {
            r[nd + j] = (lambda_reg * areas[j]).sqrt() * psi[j];
        }
    }
    let loss = r.norm_squared();
    Residuals { r, loss }
}

/// `(1/N)Σ(ũ_i − û_i)² + λ_reg Σ ψ_θ(y_k)² r_k Δr Δθ`.
pub fn loss(
    model: &SourceModel,
    data: &InverseDataset,
    map: &AffineMap,
    weights: &ProductWeights,
    lambda_reg: f64,
) -> Result<f64> {
    check_map(data, map, weights)?;
    let psi = model_values(model, weights);
    Ok(residuals(&psi, data, map, weights.areas(), lambda_reg).loss)
}

fn check_map(data: &InverseDataset, map: &AffineMap, weights: &ProductWeights) -> Result<()> {
    if map.a.nrows() != data.values.len() || map.a.ncols() != weights.len() {
        return Err(PfnnError::GridMismatch(format!(
            "map is {}x{}, data has {} values and the grid {} cells",
            map.a.nrows(),
            map.a.ncols(),
            data.values.len(),
            weights.len()
        )));
    }
    Ok(())
}

fn model_values(model: &SourceModel, weights: &ProductWeights) -> DVector<f64> {
    DVector::from_iterator(weights.len(), weights.centres().iter().map(|&(x1, x2)| model.eval(x1, x2)))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LmSettings {
    pub iters: usize,
    pub lambda_reg: f64,
    pub mu_init: f64,
    pub mu_factor: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            iters: 600,
            lambda_reg: 1e-12,
            mu_init: 1e-3,
            mu_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub model: SourceModel,
    /// Loss after each iteration (the current accepted loss).
    pub trace: Vec<f64>,
    pub accepted: usize,
    pub loss: f64,
}

const MU_MAX: f64 = 1e30;

/// Levenberg–Marquardt on the residual vector. Each iteration is one damped
/// step; the Jacobian `A·∂ψ/∂θ` is rebuilt only after accepted steps.
pub fn lm_train(
    model0: &SourceModel,
    data: &InverseDataset,
    map: &AffineMap,
    weights: &ProductWeights,
    settings: &LmSettings,
) -> Result<LmOutcome> {
    model0.validate()?;
    check_map(data, map, weights)?;
    if !(settings.lambda_reg >= 0.0) || !(settings.mu_init > 0.0) || !(settings.mu_factor > 1.0) {
        return Err(PfnnError::InvalidArgument("LM settings out of range".into()));
    }
    let h = model0.n_hidden();
    let np = model0.n_params();
    let nd = data.values.len();
    let sn = (nd as f64).sqrt();
    let areas = weights.areas();
    let reg_scale: Vec<f64> = areas.iter().map(|a| (settings.lambda_reg * a).sqrt()).collect();

    let mut params = model0.params();
    let mut model = model0.clone();
    let (mut psi, mut jpsi) = model.values_and_jacobian(weights.centres());
    let mut res = residuals(&psi, data, map, areas, settings.lambda_reg);
    if !res.loss.is_finite() {
        return Err(PfnnError::NonFinite("initial loss".into()));
    }
    let mut mu = settings.mu_init;
    let mut trace = Vec::with_capacity(settings.iters);
    let mut accepted = 0;
    let mut normal = normal_equations(&jpsi, &res.r, map, &reg_scale, sn, nd);
    for _ in 0..settings.iters {
        if res.loss == 0.0 || mu > MU_MAX {
            break;
        }
        let (hess, grad) = &normal;
        let mut damped = hess.clone();
        for i in 0..np {
            damped[(i, i)] += mu;
        }
        let Some(chol) = damped.cholesky() else {
            mu *= settings.mu_factor;
            trace.push(res.loss);
            continue;
        };
        let step = chol.solve(&(-grad));
        let trial_params: Vec<f64> = params.iter().zip(step.iter()).map(|(p, d)| p + d).collect();
        let trial = SourceModel::from_params(h, &trial_params)?;
        let trial_psi = model_values(&trial, weights);
        let trial_res = residuals(&trial_psi, data, map, areas, settings.lambda_reg);
        if trial_res.loss.is_finite() && trial_res.loss < res.loss {
            params = trial_params;
            model = trial;
            (psi, jpsi) = model.values_and_jacobian(weights.centres());
            debug_assert!(psi.iter().zip(trial_psi.iter()).all(|(a, b)| a == b));
            res = trial_res;
            normal = normal_equations(&jpsi, &res.r, map, &reg_scale, sn, nd);
            mu = (mu / settings.mu_factor).max(1e-15);
            accepted += 1;
        } else {
            mu *= settings.mu_factor;
        }
        trace.push(res.loss);
    }
    Ok(LmOutcome {
        model,
        trace,
        accepted,
        loss: res.loss,
    })
}

// JᵀJ and Jᵀr for J = [A·∂ψ/∂θ / √N; diag(√(λ|cell|))·∂ψ/∂θ].
fn normal_equations(
    jpsi: &DMatrix<f64>,
    r: &DVector<f64>,
    map: &AffineMap,
    reg_scale: &[f64],
    sn: f64,
    nd: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let jd = (&map.a * jpsi) / sn;
    let rd = r.rows(0, nd);
    let mut hess = jd.tr_mul(&jd);
    let mut grad = jd.tr_mul(&rd);
    if r.len() > nd {
        let mut jr = jpsi.clone();
        for (mut row, s) in jr.row_iter_mut().zip(reg_scale) {
            row *= *s;
        }
        hess += jr.tr_mul(&jr);
        grad += jr.tr_mul(&r.rows(nd, r.len() - nd));
    }
    (hess, grad)
}

/// Mean and 10th/90th percentiles (linear interpolation between order
/// statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p10: percentile(&v, 0.1),
            p90: percentile(&v, 0.9),
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Metrics of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub loss: f64,
    pub train_mse: f64,
    pub train_linf: f64,
    pub test_mse: f64,
    pub test_linf: f64,
    pub interior_mae: f64,
    pub interior_linf: f64,
    pub boundary_mae: f64,
    pub boundary_linf: f64,
    pub accepted_steps: usize,
}

/// Ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_runs: usize,
    pub train_mse: Summary,
    pub train_linf: Summary,
    pub test_mse: Summary,
    pub test_linf: Summary,
    pub interior_mae: Summary,
    pub interior_linf: Summary,
    pub boundary_mae: Summary,
    pub boundary_linf: Summary,
}

/// Everything fixed across runs: the data, the train and test maps and the
/// reference solution on the test points.
pub struct InverseSetup {
    pub weights: Arc<ProductWeights>,
    pub data: InverseDataset,
    pub train_map: AffineMap,
    pub test_map: AffineMap,
    pub test_reference: Vec<f64>,
}

pub struct EnsembleResult {
    pub runs: Vec<RunMetrics>,
    pub stats: EnsembleStats,
    /// Model with the lowest training loss.
    pub best: SourceModel,
    pub best_run: usize,
}

/// Metrics of `model` against the data and the test reference.
pub fn evaluate_model(setup: &InverseSetup, model: &SourceModel, seed: u64, loss: f64, accepted_steps: usize) -> RunMetrics {
    let psi = model_values(model, &setup.weights);
    let train = setup.train_map.apply(&psi);
    let nd = setup.data.values.len() as f64;
    let (mut mse, mut linf) = (0.0, 0.0_f64);
    for (u, d) in train.iter().zip(&setup.data.values) {
        mse += (u - d).powi(2) / nd;
        linf = linf.max((u - d).abs());
    }
    let test = setup.test_map.apply(&psi);
    let nt = test.len() as f64;
    let (mut tmse, mut tlinf) = (0.0, 0.0_f64);
    let (mut si, mut mi, mut ni) = (0.0, 0.0_f64, 0usize);
    let (mut sb, mut mb, mut nb) = (0.0, 0.0_f64, 0usize);
    for ((u, e), p) in test.iter().zip(&setup.test_reference).zip(&setup.test_map.points) {
        let err = (u - e).abs();
        tmse += err * err / nt;
        tlinf = tlinf.max(err);
        if p.is_on_boundary() {
            sb += err;
            mb = mb.max(err);
            nb += 1;
        } else {
            si += err;
            mi = mi.max(err);
            ni += 1;
        }
    }
    RunMetrics {
        seed,
        loss,
        train_mse: mse,
        train_linf: linf,
        test_mse: tmse,
        test_linf: tlinf,
        interior_mae: si / ni.max(1) as f64,
        interior_linf: mi,
        boundary_mae: sb / nb.max(1) as f64,
        boundary_linf: mb,
        accepted_steps,
    }
}

/// Statistics of `runs`.
pub fn summarize(runs: &[RunMetrics]) -> EnsembleStats {
    let s = |f: fn(&RunMetrics) -> f64| Summary::of(&runs.iter().map(f).collect::<Vec<_>>());
    EnsembleStats {
        n_runs: runs.len(),
        train_mse: s(|m| m.train_mse),
        train_linf: s(|m| m.train_linf),
        test_mse: s(|m| m.test_mse),
        test_linf: s(|m| m.test_linf),
        interior_mae: s(|m| m.interior_mae),
        interior_linf: s(|m| m.interior_linf),
        boundary_mae: s(|m| m.boundary_mae),
        boundary_linf: s(|m| m.boundary_linf),
    }
}

/// `n_runs` independent trainings from uniform `[−1, 1]` initializations
/// seeded with `seed_base + run`.
pub fn run_ensemble(
    setup: &InverseSetup,
    n_runs: usize,
    seed_base: u64,
    n_hidden: usize,
    lm: &LmSettings,
) -> Result<EnsembleResult> {
    if n_runs == 0 || n_hidden == 0 {
        return Err(PfnnError::InvalidArgument("ensemble needs runs and hidden units".into()));
    }
    let outcomes: Vec<(RunMetrics, SourceModel)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = SourceModel::random(n_hidden, &mut rng);
            let out = lm_train(&init, &setup.data, &setup.train_map, &setup.weights, lm)?;
            Ok((evaluate_model(setup, &out.model, seed, out.loss, out.accepted), out.model))
        })
        .collect::<Result<_>>()?;
    let best_run = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.loss.total_cmp(&b.1 .0.loss))
        .map(|(i, _)| i)
        .expect("at least one run");
    let best = outcomes[best_run].1.clone();
    let runs: Vec<RunMetrics> = outcomes.into_iter().map(|(m, _)| m).collect();
    let stats = summarize(&runs);
    Ok(EnsembleResult {
        runs,
        stats,
        best,
        best_run,
    })
}

/// Forward-network observations `ũ` at `points` for the source potential
/// `source` and boundary data `f`.
pub fn forward_observations(
    spec: KernelSpec,
    source: Arc<dyn SourcePotential>,
    boundary: &BoundaryFn,
    points: &[PolarPoint],
    settings: &ForwardSettings,
) -> Result<InverseDataset> {
    let bvp = BoundaryValueProblem {
        spec,
        boundary: boundary.clone(),
        source,
    };
    let solver = PotentialSolver::new(bvp, &BoundaryGrid::new(settings.boundary_nodes)?, &settings.quad)?;
    let beta = solver.network(settings.kappa, settings.n_layers)?.forward()?;
    let values = points
        .par_iter()
        .map(|p| solver.evaluate(p, &beta))
        .collect::<Result<Vec<f64>>>()?;
    InverseDataset::new(points.to_vec(), values, boundary.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_roundtrip_and_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = SourceModel::random(5, &mut rng);
        assert_eq!(SourceModel::from_params(5, &m.params()).unwrap(), m);
        assert_eq!(SourceModel::from_json(&m.to_json().unwrap()).unwrap(), m);
        assert!(SourceModel::from_params(5, &[0.0; 3]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = SourceModel::random(4, &mut rng);
        let pts = [(0.3, -0.2), (-0.7, 0.1)];
        let (v, j) = m.values_and_jacobian(&pts);
        let p = m.params();
        for (k, &(x1, x2)) in pts.iter().enumerate() {
            assert!((v[k] - m.eval(x1, x2)).abs() < 1e-15);
            for i in 0..p.len() {
                let h = 1e-6;
                let mut a = p.clone();
                let mut b = p.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (SourceModel::from_params(4, &a).unwrap().eval(x1, x2)
                    - SourceModel::from_params(4, &b).unwrap().eval(x1, x2))
                    / (2.0 * h);
                assert!((fd - j[(k, i)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn summary_of_single_value() {
        let s = Summary::of(&[2.5]);
        assert_eq!((s.mean, s.p10, s.p90), (2.5, 2.5, 2.5));
        let s = Summary::of(&[4.0, 0.0, 1.0, 2.0, 3.0]);
        assert!((s.p10 - 0.4).abs() < 1e-15 && (s.p90 - 3.6).abs() < 1e-15);
    }

    #[test]
    fn product_weights_integrate_constant() {
        let w = ProductWeights::new(KernelSpec::laplace(), 8, 16, QuadratureSpec::default()).unwrap();
        // Newtonian potential of the unit disc: (r² − 1)/4
        for p in [PolarPoint::new(0.3, 1.0).unwrap(), PolarPoint::boundary(0.2), PolarPoint::new(0.0625, 0.0).unwrap()] {
            let s: f64 = w.row(&p).unwrap().iter().sum();
            assert!((s - (p.r() * p.r() - 1.0) / 4.0).abs() < 1e-6, "{s}");
        }
    }
}
