//! Recurrent network for semi-linear problems `Δu = F(x, u)`.
//!
//! Each outer step solves `Δu_{n+1} − λu_{n+1} = −λu_n + F(x, u_n)` with the
//! potential network, integrating the source by the plain grid sum over the
//! solution grid so no interpolation of `u_n` is needed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::fredholm_net::{bie_kernel_matrix, BoundaryDensity, FredholmNet};
use crate::geometry::{BoundaryGrid, DiscGrid};
use crate::kernels::KernelSpec;
use crate::pfnn::{BoundaryFn, BoundaryValueProblem, PotentialSolver, SolutionField};
use crate::quadrature::QuadratureSpec;
use crate::source::{GridSource, RotationTable, ScalarField};

/// `F(x₁, x₂, u)`.
pub type Nonlinearity = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InitialGuess {
    /// `u₀(r, θ) = f(θ)`.
    BoundaryExtension,
    /// Values on the solution grid, row-major.
    Field(Vec<f64>),
}

#[derive(Clone)]
pub struct SemiLinearProblem {
    pub nonlinearity: Nonlinearity,
    pub boundary: BoundaryFn,
    pub lambda: f64,
    pub initial: InitialGuess,
    pub n_outer: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RecurrentSettings {
    pub kappa: f64,
    pub n_layers: usize,
    pub quad: QuadratureSpec,
    /// Stop once `‖u_{n+1} − u_n‖∞` falls below this.
    pub early_stop: Option<f64>,
}

/// One line of the per-iteration log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationMetrics {
    pub n: usize,
    pub max_update: f64,
    pub mae_interior: Option<f64>,
    pub mae_boundary: f64,
    pub linf_interior: Option<f64>,
    pub beta_norm: f64,
    /// `(Σ β² Δθ)^½`
    pub beta_l2: f64,
}

pub struct RecurrentRun {
    /// `u_1, …, u_{N′}` (the initial guess is not included).
    pub iterates: Vec<SolutionField>,
    pub densities: Vec<BoundaryDensity>,
    pub metrics: Vec<IterationMetrics>,
    /// Solver and network of the last outer step (for error bounds).
    pub last_step: Option<(PotentialSolver, FredholmNet)>,
}

impl RecurrentRun {
    pub fn last(&self) -> &SolutionField {
        self.iterates.last().expect("at least one iterate")
    }

    /// Metrics as JSON lines.
    pub fn metrics_jsonl(&self) -> String {
        self.metrics
            .iter()
            .map(|m| serde_json::to_string(m).expect("metrics serialize") + "\n")
            .collect()
    }

    /// Ratios `‖u_{n+1} − u_n‖ / ‖u_n − u_{n−1}‖` of consecutive updates.
    pub fn update_ratios(&self) -> Vec<f64> {
        self.metrics
            .windows(2)
            .map(|w| w[1].max_update / w[0].max_update)
            .collect()
    }
}

/// `ψ_n = −λu_n + F(x, u_n)` at every node.
pub fn source_update(u: &SolutionField, nonlinearity: &Nonlinearity, lambda: f64) -> Result<Vec<f64>> {
    u.nodes()
        .map(|(p, v)| {
            if !v.is_finite() {
                return Err(PfnnError::NonFinite("iterate value".into()));
            }
            let (x1, x2) = p.to_cartesian();
            let f = nonlinearity(x1, x2, v);
            if !f.is_finite() {
                return Err(PfnnError::NonFinite(format!(
                    "F at ({x1}, {x2}, {v})"
                )));
            }
            Ok(-lambda * v + f)
        })
        .collect()
}

fn validate(problem: &SemiLinearProblem, disc: &DiscGrid, settings: &RecurrentSettings) -> Result<()> {
    if !(problem.lambda > 0.0) {
        return Err(PfnnError::InvalidArgument("shift lambda must be positive".into()));
    }
    if problem.n_outer == 0 {
        return Err(PfnnError::InvalidArgument("n_outer must be at least 1".into()));
    }
    if disc.boundary_row().is_none() {
        return Err(PfnnError::GridMismatch("solution grid needs an r = 1 row".into()));
    }
    if let InitialGuess::Field(v) = &problem.initial {
        if v.len() != disc.len() {
            return Err(PfnnError::GridMismatch("initial guess length".into()));
        }
    }
    settings.quad.validate()
}

/// Run the outer iteration on the uniform polar grid `disc` (which must
/// contain the `r = 1` row; its angles are the collocation nodes).
pub fn rpfnn_solve(
    problem: &SemiLinearProblem,
    disc: &DiscGrid,
    settings: &RecurrentSettings,
    exact: Option<&ScalarField>,
) -> Result<RecurrentRun> {
    validate(problem, disc, settings)?;
    let spec = KernelSpec::modified_helmholtz(problem.lambda)?;
    let bgrid = BoundaryGrid::new(disc.n_theta())?;
    let kernel = Arc::new(bie_kernel_matrix(&spec, &bgrid));
    let table = Arc::new(RotationTable::new(&spec, disc));

    let mut current = SolutionField {
        grid: disc.clone(),
        values: match &problem.initial {
            InitialGuess::Field(v) => v.clone(),
            InitialGuess::BoundaryExtension => disc.points().map(|p| (problem.boundary)(p.theta())).collect(),
        },
    };
    let mut run = RecurrentRun {
        iterates: Vec::new(),
        densities: Vec::new(),
        metrics: Vec::new(),
        last_step: None,
    };
    let mut growth = 0;
    for n in 1..=problem.n_outer {
        let psi = source_update(&current, &problem.nonlinearity, problem.lambda)?;
        let source = GridSource::new(spec, disc.clone(), psi)?.with_table(table.clone())?;
        let bvp = BoundaryValueProblem {
            spec,
            boundary: problem.boundary.clone(),
            source: Arc::new(source),
        };
        let solver = PotentialSolver::with_kernel(bvp, kernel.clone(), &settings.quad)?;
        let net = solver.network(settings.kappa, settings.n_layers)?;
        let beta = net.forward()?;
        let next = solver.field(&beta, disc)?;

        let max_update = next
            .values
            .iter()
            .zip(&current.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let metrics = iteration_metrics(n, max_update, &next, &beta, &problem.boundary, exact);
        if let Some(prev) = run.metrics.last() {
            growth = if metrics.max_update > prev.max_update { growth + 1 } else { 0 };
        }
        run.metrics.push(metrics);
        run.iterates.push(next.clone());
        run.densities.push(beta);
        run.last_step = Some((solver, net));
        if growth >= 3 {
            let history: Vec<String> = run.metrics.iter().map(|m| format!("{:e}", m.max_update)).collect();
            return Err(PfnnError::Divergence {
                iterations: n,
                detail: format!("update norms grew 3 times in a row: [{}]", history.join(", ")),
            });
        }
        current = next;
        if settings.early_stop.is_some_and(|tol| max_update < tol) {
            break;
        }
    }
    Ok(run)
}

fn iteration_metrics(
    n: usize,
    max_update: f64,
    field: &SolutionField,
    beta: &BoundaryDensity,
    boundary: &BoundaryFn,
    exact: Option<&ScalarField>,
) -> IterationMetrics {
    let (mut sum_b, mut cnt_b) = (0.0, 0usize);
    for (p, v) in field.boundary() {
        sum_b += (v - boundary(p.theta())).abs();
        cnt_b += 1;
    }
    let (mae_interior, linf_interior) = match exact {
        Some(u) => {
            let (mut sum, mut max, mut cnt) = (0.0, 0.0_f64, 0usize);
            for (p, v) in field.interior() {
                let (x1, x2) = p.to_cartesian();
                let e = (v - u(x1, x2)).abs();
                sum += e;
                max = max.max(e);
                cnt += 1;
            }
            (Some(sum / cnt.max(1) as f64), Some(max))
        }
        None => (None, None),
    };
    IterationMetrics {
        n,
        max_update,
        mae_interior,
        mae_boundary: sum_b / cnt_b.max(1) as f64,
        linf_interior,
        beta_norm: beta.sup_norm(),
        beta_l2: beta.l2_norm(std::f64::consts::TAU / beta.values.len() as f64),
    }
}
