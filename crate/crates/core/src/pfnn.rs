//! Potential layer: evaluates the jump-free double-layer representation
//!
//! `u(x) = ∫∂Ω (β(y) − β(x*)) DΦ(x, y) dσ + β(x*)(½ + λ∫Ω δΦ(x, y) dy)
//!        + ∫∂Ω β(y) ∂Φ(x*, y)/∂n dσ + ∫Ω Φ(x, y) ψ(y) dy`
//!
//! on top of a [`FredholmNet`]. For Laplace the `δΦ` term is absent.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{PfnnError, Result};
use crate::fredholm_net::{bie_inhomogeneity, bie_kernel_matrix, build_fredholm_net, BieKernel, BoundaryDensity, FredholmNet};
use crate::geometry::{angle_diff, BoundaryGrid, DiscGrid, PolarPoint};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature::QuadratureSpec;
use crate::source::{RadialPotential, SourcePotential};

/// Points with `r` above this are evaluated with the boundary formula.
pub const BOUNDARY_SNAP: f64 = 1.0 - 1e-12;

/// Boundary data `f(θ)`.
pub type BoundaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `Δu − λu = ψ` in the disc (`λ = 0`: Poisson), `u = f` on the circle.
#[derive(Clone)]
pub struct BoundaryValueProblem {
    pub spec: KernelSpec,
    pub boundary: BoundaryFn,
    pub source: Arc<dyn SourcePotential>,
}

/// Output layer at one evaluation point: `u = Σ w_out_j (β_j − β*) + b_extra`.
#[derive(Debug, Clone)]
pub struct PotentialLayer {
    pub w_out: Vec<f64>,
    pub beta_star: f64,
    pub b_extra: f64,
}

impl PotentialLayer {
    pub fn apply(&self, beta: &BoundaryDensity) -> f64 {
        let s: f64 = self
            .w_out
            .iter()
            .zip(&beta.values)
            .map(|(w, b)| w * (b - self.beta_star))
            .sum();
        s + self.b_extra
    }
}

/// Solution values on a polar grid; the `r = 1` row (if any) is the boundary.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub grid: DiscGrid,
    pub values: Vec<f64>,
}

impl SolutionField {
    pub fn is_boundary_row(&self, i: usize) -> bool {
        self.grid.radii()[i] == 1.0
    }

    /// `(point, value)` pairs for nodes with `r < 1`.
    pub fn interior(&self) -> impl Iterator<Item = (PolarPoint, f64)> + '_ {
        self.nodes().filter(|(p, _)| !p.is_on_boundary())
    }

    /// `(point, value)` pairs on the `r = 1` row.
    pub fn boundary(&self) -> impl Iterator<Item = (PolarPoint, f64)> + '_ {
        self.nodes().filter(|(p, _)| p.is_on_boundary())
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.interior().map(|(_, v)| v).collect()
    }

    pub fn boundary_values(&self) -> Vec<f64> {
        self.boundary().map(|(_, v)| v).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (PolarPoint, f64)> + '_ {
        self.grid.points().zip(self.values.iter().copied())
    }

    /// CSV with header `r,theta,x1,x2,u_num[,u_exact,abs_err]`.
    pub fn to_csv(&self, exact: Option<&dyn Fn(f64, f64) -> f64>) -> String {
        let mut out = String::with_capacity(self.values.len() * 96);
        out.push_str("r,theta,x1,x2,u_num");
        if exact.is_some() {
            out.push_str(",u_exact,abs_err");
        }
        out.push('\n');
        for (p, u) in self.nodes() {
            let (x1, x2) = p.to_cartesian();
            let _ = write!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", p.r(), p.theta(), x1, x2, u);
            if let Some(e) = exact {
                let ue = e(x1, x2);
                let _ = write!(out, ",{:.17e},{:.17e}", ue, (u - ue).abs());
            }
            out.push('\n');
        }
        out
    }
}

/// A boundary value problem prepared on a boundary grid: kernel matrix,
/// inhomogeneity and domain potentials at the collocation nodes.
pub struct PotentialSolver {
    problem: BoundaryValueProblem,
    kernel: Arc<BieKernel>,
    g: Vec<f64>,
    s_nodes: Vec<f64>,
    volume: Option<RadialPotential>,
}

impl PotentialSolver {
    pub fn new(problem: BoundaryValueProblem, grid: &BoundaryGrid, quad: &QuadratureSpec) -> Result<Self> {
        let kernel = Arc::new(bie_kernel_matrix(&problem.spec, grid));
        Self::with_kernel(problem, kernel, quad)
    }

    /// Reuse a kernel matrix built for the same family and grid.
    pub fn with_kernel(problem: BoundaryValueProblem, kernel: Arc<BieKernel>, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        if *kernel.spec() != problem.spec {
            return Err(PfnnError::InvalidArgument("kernel built for another operator".into()));
        }
        let (g, s_nodes) = bie_inhomogeneity(&*problem.boundary, &*problem.source, kernel.grid())?;
        let volume = match problem.spec.family() {
            KernelFamily::Laplace => None,
            KernelFamily::ModifiedHelmholtz => Some(RadialPotential::new(problem.spec, *quad)),
        };
        Ok(Self {
            problem,
            kernel,
            g,
            s_nodes,
            volume,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.problem.spec
    }

    pub fn problem(&self) -> &BoundaryValueProblem {
        &self.problem
    }

    pub fn boundary_grid(&self) -> &BoundaryGrid {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &Arc<BieKernel> {
        &self.kernel
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Domain potentials `∫Ω Φ(x_i, y)ψ(y) dy` at the collocation nodes.
    pub fn source_at_nodes(&self) -> &[f64] {
        &self.s_nodes
    }

    pub fn network(&self, kappa: f64, n_layers: usize) -> Result<FredholmNet> {
        build_fredholm_net(self.g.clone(), self.kernel.clone(), kappa, n_layers)
    }

    fn check_density(&self, beta: &BoundaryDensity) -> Result<()> {
        if beta.values.len() != self.kernel.n_nodes() {
            return Err(PfnnError::GridMismatch(format!(
                "density has {} values, boundary grid {} nodes",
                beta.values.len(),
                self.kernel.n_nodes()
            )));
        }
        Ok(())
    }

    /// `β(θ)`: node value, or the Nyström interpolant between nodes.
    pub fn density_at(&self, beta: &BoundaryDensity, theta: f64) -> Result<f64> {
        self.check_density(beta)?;
        let grid = self.kernel.grid();
        if let Some(i) = grid.node_index(theta) {
            return Ok(beta.values[i]);
        }
        let s = self.problem.source.potential(&PolarPoint::boundary(theta))?;
        let g = 2.0 * ((self.problem.boundary)(theta) - s);
        let row = self.kernel.row_at(theta);
        Ok(g + row.iter().zip(&beta.values).map(|(k, b)| k * b).sum::<f64>() * grid.d_theta())
    }

    /// `λ ∫Ω δΦ(x, y) dy = λ(V(r) − V(1))`.
    pub fn volume_term(&self, r: f64) -> Result<f64> {
        match &self.volume {
            Some(v) if r < 1.0 => Ok(self.problem.spec.lambda() * (v.value(r)? - v.value(1.0)?)),
            _ => Ok(0.0),
        }
    }

    /// `∫∂Ω β(y) ∂Φ(x*, y)/∂n dσ` for `x* = (1, θ)`.
    fn boundary_flux(&self, beta: &BoundaryDensity, theta: f64) -> f64 {
        let row = self.kernel.row_at(theta);
        -0.5 * row.iter().zip(&beta.values).map(|(k, b)| k * b).sum::<f64>() * self.kernel.grid().d_theta()
    }

    fn source_at(&self, x: &PolarPoint) -> Result<f64> {
        if x.is_on_boundary() {
            if let Some(i) = self.kernel.grid().node_index(x.theta()) {
                return Ok(self.s_nodes[i]);
            }
        }
        self.problem.source.potential(x)
    }

    /// The output layer at `x`.
    pub fn potential_layer(&self, x: &PolarPoint, beta: &BoundaryDensity) -> Result<PotentialLayer> {
        self.layer_with_source(x, beta, None)
    }

    fn layer_with_source(&self, x: &PolarPoint, beta: &BoundaryDensity, source: Option<f64>) -> Result<PotentialLayer> {
        self.check_density(beta)?;
        let theta = x.theta();
        let snapped = if x.r() > BOUNDARY_SNAP {
            PolarPoint::boundary(theta)
        } else {
            *x
        };
        let beta_star = self.density_at(beta, theta)?;
        let grid = self.kernel.grid();
        let dt = grid.d_theta();
        let n = grid.n_nodes();
        let w_out = if snapped.is_on_boundary() {
            vec![0.0; n]
        } else {
            let r = snapped.r();
            let star = self.kernel.row_at(theta);
            grid.thetas()
                .iter()
                .zip(&star)
                .map(|(&t, &k)| (self.problem.spec.dphi_dn_polar(r, angle_diff(theta, t)) + 0.5 * k) * dt)
                .collect()
        };
        let b_extra = beta_star * (0.5 + self.volume_term(snapped.r())?)
            + self.boundary_flux(beta, theta)
            + match source {
                Some(s) if !(snapped.is_on_boundary() && grid.node_index(theta).is_some()) => s,
                _ => self.source_at(&snapped)?,
            };
        Ok(PotentialLayer {
            w_out,
            beta_star,
            b_extra,
        })
    }

    /// `u(x)` from the density `beta`.
    pub fn evaluate(&self, x: &PolarPoint, beta: &BoundaryDensity) -> Result<f64> {
        let v = self.potential_layer(x, beta)?.apply(beta);
        if !v.is_finite() {
            return Err(PfnnError::NonFinite(format!("u at r = {}, theta = {}", x.r(), x.theta())));
        }
        Ok(v)
    }

    /// Evaluate the field on `disc`. Rows of `DΦ` weights are rotated when
    /// the disc angles coincide with boundary nodes.
    pub fn field(&self, beta: &BoundaryDensity, disc: &DiscGrid) -> Result<SolutionField> {
        let sources = self.problem.source.potential_on_grid(disc)?;
        self.field_with_sources(beta, disc, &sources)
    }

    /// As [`field`](Self::field) with the domain potentials on `disc`
    /// supplied by the caller (row-major).
    pub fn field_with_sources(&self, beta: &BoundaryDensity, disc: &DiscGrid, sources: &[f64]) -> Result<SolutionField> {
        self.check_density(beta)?;
        if sources.len() != disc.len() {
            return Err(PfnnError::GridMismatch("source potentials length".into()));
        }
        let grid = self.kernel.grid();
        let n = grid.n_nodes();
        let dt = grid.d_theta();
        let node_of: Option<Vec<usize>> = disc.thetas().iter().map(|&t| grid.node_index(t)).collect();
        let Some(node_of) = node_of else {
            let pts: Vec<PolarPoint> = disc.points().collect();
            let values = pts
                .par_iter()
                .zip(sources.par_iter())
                .map(|(p, &s)| Ok(self.layer_with_source(p, beta, Some(s))?.apply(beta)))
                .collect::<Result<Vec<f64>>>()?;
            return finite_field(disc, values);
        };
        // ∫ β ∂Φ(x*_k, ·)/∂n at every boundary node
        let flux: Vec<f64> = (0..n)
            .map(|k| {
                -0.5 * (0..n).map(|j| self.kernel.entry(k, j) * beta.values[j]).sum::<f64>() * dt
            })
            .collect();
        let n_t = disc.n_theta();
        let rows: Vec<Vec<f64>> = disc
            .radii()
            .par_iter()
            .enumerate()
            .map(|(i, &r)| {
                let srow = &sources[i * n_t..(i + 1) * n_t];
                if r > BOUNDARY_SNAP {
                    return Ok(node_of
                        .iter()
                        .map(|&k| 0.5 * beta.values[k] + flux[k] + self.s_nodes[k])
                        .collect());
                }
                // DΦ((r, θ_k), y_j) Δθ depends on (j − k) mod N only
                let base: Vec<f64> = (0..n)
                    .map(|m| {
                        let t = grid.thetas()[m];
                        (self.problem.spec.dphi_dn_polar(r, -t) + 0.5 * self.kernel.entry(0, m)) * dt
                    })
                    .collect();
                let vol = 0.5 + self.volume_term(r)?;
                Ok(node_of
                    .iter()
                    .zip(srow)
                    .map(|(&k, &s)| {
                        let bs = beta.values[k];
                        let mut acc = 0.0;
                        for (j, b) in beta.values.iter().enumerate() {
                            acc += base[(j + n - k) % n] * (b - bs);
                        }
                        acc + bs * vol + flux[k] + s
                    })
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        finite_field(disc, rows.concat())
    }
}

fn finite_field(disc: &DiscGrid, values: Vec<f64>) -> Result<SolutionField> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(PfnnError::NonFinite(format!("field value at node {i}")));
    }
    Ok(SolutionField {
        grid: disc.clone(),
        values,
    })
}

fn require_family(solver: &PotentialSolver, family: KernelFamily) -> Result<()> {
    if solver.spec().family() != family {
        return Err(PfnnError::InvalidArgument(format!(
            "solver is set up for {:?}, not {family:?}",
            solver.spec().family()
        )));
    }
    Ok(())
}

/// Poisson solution at `x` from the density `beta`.
pub fn evaluate_poisson(x: &PolarPoint, beta: &BoundaryDensity, solver: &PotentialSolver) -> Result<f64> {
    require_family(solver, KernelFamily::Laplace)?;
    solver.evaluate(x, beta)
}

/// Modified-Helmholtz solution at `x` from the density `beta`.
pub fn evaluate_helmholtz(x: &PolarPoint, beta: &BoundaryDensity, solver: &PotentialSolver) -> Result<f64> {
    require_family(solver, KernelFamily::ModifiedHelmholtz)?;
    solver.evaluate(x, beta)
}

/// Network settings for a single forward solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub kappa: f64,
    pub n_layers: usize,
    pub quad: QuadratureSpec,
}

/// Result of [`solve_field`].
pub struct FieldSolution {
    pub solver: PotentialSolver,
    pub net: FredholmNet,
    pub beta: BoundaryDensity,
    pub field: SolutionField,
}

/// BIE setup, forward pass of the Fredholm network, then the potential
/// layer at every node of `disc`.
pub fn solve_field(
    problem: BoundaryValueProblem,
    disc: &DiscGrid,
    boundary: &BoundaryGrid,
    settings: &SolveSettings,
) -> Result<FieldSolution> {
    let solver = PotentialSolver::new(problem, boundary, &settings.quad)?;
    let net = solver.network(settings.kappa, settings.n_layers)?;
    let beta = net.forward()?;
    let field = solver.field(&beta, disc)?;
    Ok(FieldSolution {
        solver,
        net,
        beta,
        field,
    })
}
