use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{eval_polynomial, InitialKind, Placement, ProblemKind, RunConfig};
use crate::error::{PfnnError, Result};
use crate::error_analysis::{
    bound_components, boundary_bound, domain_bound, metrics, recurrent_bound, sample_points, ErrorReport,
};
use crate::geometry::{BoundaryGrid, DiscGrid};
use crate::inverse::{
    evaluate_model, forward_observations, run_ensemble, source_to_solution_map, EnsembleStats, ForwardSettings,
    InverseSetup, LmSettings, ProductWeights, RunMetrics, SourceModel,
};
use crate::kernels::KernelSpec;
use crate::pfnn::{BoundaryValueProblem, PotentialSolver, SolutionField};
use crate::problems::{bratu_exact, bratu_nonlinearity, helmholtz_cubic, inverse_ex1, poisson_ex1};
use crate::quadrature::QuadratureSpec;
use crate::recurrent::{rpfnn_solve, InitialGuess, RecurrentRun, RecurrentSettings, SemiLinearProblem};
use crate::source::{AdaptiveSource, ScalarField, SourcePotential, ZeroSource};

/// Files written together once a command has finished; each goes through a
/// temporary file and a rename.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| PfnnError::InvalidArgument(format!("serializing {name}: {e}")))?;
        self.add(name, text + "\n");
        Ok(())
    }

    pub fn commit(self) -> Result<PathBuf> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| PfnnError::Io { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        for (name, bytes) in &self.files {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            let dst = self.dir.join(name);
            std::fs::write(&tmp, bytes).map_err(io(&tmp))?;
            std::fs::rename(&tmp, &dst).map_err(io(&dst))?;
        }
        Ok(self.dir)
    }
}

/// Every setting a run depended on.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub package: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub threads: usize,
}

impl Provenance {
    fn new(command: &str, config: &RunConfig, seed: Option<u64>) -> Self {
        Self {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config: config.clone(),
            seed,
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Measured {
    pub mae_interior: f64,
    pub linf_interior: f64,
    pub mae_boundary: f64,
    pub linf_boundary: f64,
}

impl From<&ErrorReport> for Measured {
    fn from(r: &ErrorReport) -> Self {
        Self {
            mae_interior: r.mae_interior,
            linf_interior: r.linf_interior,
            mae_boundary: r.mae_boundary,
            linf_boundary: r.linf_boundary,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    pub interior: f64,
    pub boundary: f64,
    pub components: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrentSummary {
    pub iterations: usize,
    pub update_norms: Vec<f64>,
    pub update_ratios: Vec<f64>,
    /// Largest update ratio from the second ratio on.
    pub q: Option<f64>,
    pub first_beta_norm: f64,
    pub first_beta_l2: f64,
    pub first_linf_interior: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub command: String,
    pub name: String,
    pub problem: ProblemKind,
    pub n_layers: usize,
    pub beta_norm: f64,
    pub beta_l2: f64,
    pub residual: f64,
    pub measured: Option<Measured>,
    pub bounds: Option<Bounds>,
    pub recurrent: Option<RecurrentSummary>,
    pub provenance: Provenance,
}

/// Output directory of `command` unless overridden.
pub fn output_dir(cfg: &RunConfig, command: &str, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let sub = match command {
                "solve" | "inverse" => cfg.name.clone(),
                other => format!("{}-{other}", cfg.name),
            };
            Path::new(&cfg.output).join(sub)
        }
    }
}

fn timing(start: Instant) -> String {
    format!("elapsed_seconds={:.3}\n", start.elapsed().as_secs_f64())
}

/// A linear problem and its closed-form solution, if known.
pub struct LinearCase {
    pub problem: BoundaryValueProblem,
    pub exact: Option<ScalarField>,
}

pub fn linear_case(cfg: &RunConfig, quad: &QuadratureSpec) -> Result<LinearCase> {
    let manufactured = match cfg.problem {
        ProblemKind::Poisson => poisson_ex1(),
        ProblemKind::Helmholtz => helmholtz_cubic(cfg.lambda)?,
        ProblemKind::Inverse => inverse_ex1(),
        ProblemKind::Custom => {
            let c = cfg.custom.clone().ok_or_else(|| PfnnError::Config("missing [custom]".into()))?;
            let spec = KernelSpec::from_lambda(cfg.lambda)?;
            let boundary = c.boundary.clone();
            let source: Arc<dyn SourcePotential> = if c.source.is_empty() {
                Arc::new(ZeroSource)
            } else {
                let terms = c.source.clone();
                Arc::new(AdaptiveSource::new(
                    spec,
                    Arc::new(move |x1, x2| eval_polynomial(&terms, x1, x2)),
                    *quad,
                )?)
            };
            return Ok(LinearCase {
                problem: BoundaryValueProblem {
                    spec,
                    boundary: Arc::new(move |t| boundary.eval(t)),
                    source,
                },
                exact: None,
            });
        }
        ProblemKind::Bratu => {
            return Err(PfnnError::Config("bratu is semi-linear".into()));
        }
    };
    Ok(LinearCase {
        problem: manufactured.bvp(quad)?,
        exact: Some(manufactured.exact.clone()),
    })
}

/// One forward evaluation at `n_layers` on a prepared solver.
pub struct LinearRun {
    pub field: SolutionField,
    pub beta_norm: f64,
    pub beta_l2: f64,
    pub residual: f64,
    pub error: Option<ErrorReport>,
    pub bounds: Option<Bounds>,
}

fn linear_run(
    cfg: &RunConfig,
    solver: &PotentialSolver,
    disc: &DiscGrid,
    sources: &[f64],
    exact: Option<&ScalarField>,
    n_layers: usize,
    quad: &QuadratureSpec,
) -> Result<LinearRun> {
    let net = solver.network(cfg.kappa, n_layers)?;
    let beta = net.forward()?;
    let field = solver.field_with_sources(&beta, disc, sources)?;
    let residual = net.residual(&beta)?;
    let bounds = if cfg.bounds.enabled {
        let c = bound_components(solver, &net, &beta, &sample_points(disc, cfg.bounds.sample_angles), quad)?;
        Some(Bounds {
            interior: domain_bound(&c),
            boundary: boundary_bound(&c),
            components: c.to_map(),
        })
    } else {
        None
    };
    Ok(LinearRun {
        beta_norm: beta.sup_norm(),
        beta_l2: l2(&beta),
        residual,
        error: exact.map(|u| metrics(&field, &**u)),
        bounds,
        field,
    })
}

fn l2(beta: &crate::fredholm_net::BoundaryDensity) -> f64 {
    beta.l2_norm(std::f64::consts::TAU / beta.values.len() as f64)
}

fn disc_of(cfg: &RunConfig) -> Result<DiscGrid> {
    DiscGrid::uniform(cfg.disc.n_r, cfg.disc.n_theta)
}

/// Bratu run plus its summary and bounds.
pub struct SemiLinearOutcome {
    pub run: RecurrentRun,
    pub error: ErrorReport,
    pub summary: RecurrentSummary,
    pub bounds: Option<Bounds>,
}

fn semilinear_run(cfg: &RunConfig, n_layers: usize, quad: &QuadratureSpec) -> Result<SemiLinearOutcome> {
    let rc = cfg.recurrent.ok_or_else(|| PfnnError::Config("missing [recurrent]".into()))?;
    let disc = disc_of(cfg)?;
    let problem = SemiLinearProblem {
        nonlinearity: Arc::new(bratu_nonlinearity),
        boundary: Arc::new(|_| 0.0),
        lambda: cfg.lambda,
        initial: match rc.initial {
            InitialKind::BoundaryExtension => InitialGuess::BoundaryExtension,
            InitialKind::Zero => InitialGuess::Field(vec![0.0; disc.len()]),
        },
        n_outer: rc.n_outer,
    };
    let exact: ScalarField = Arc::new(bratu_exact);
    let settings = RecurrentSettings {
        kappa: cfg.kappa,
        n_layers,
        quad: *quad,
        early_stop: rc.early_stop,
    };
    let run = rpfnn_solve(&problem, &disc, &settings, Some(&exact))?;
    let error = metrics(run.last(), &*exact);
    let ratios = run.update_ratios();
    let q = ratios.iter().skip(1).copied().reduce(f64::max).or(ratios.first().copied());
    let summary = RecurrentSummary {
        iterations: run.metrics.len(),
        update_norms: run.metrics.iter().map(|m| m.max_update).collect(),
        update_ratios: ratios,
        q,
        first_beta_norm: run.metrics[0].beta_norm,
        first_beta_l2: run.metrics[0].beta_l2,
        first_linf_interior: run.metrics[0].linf_interior,
    };

    let bounds = match (&run.last_step, q) {
        (Some((solver, net)), Some(q)) if cfg.bounds.enabled && q > 0.0 && q < 1.0 => {
            let beta = run.densities.last().expect("one density per iterate");
            let c = bound_components(solver, net, beta, &sample_points(&disc, cfg.bounds.sample_angles), quad)?;
            let (mut gap_int, mut gap_bnd) = (0.0_f64, 0.0_f64);
            for p in disc.points() {
                let (x1, x2) = p.to_cartesian();
                let u0 = match &problem.initial {
                    InitialGuess::BoundaryExtension => (problem.boundary)(p.theta()),
                    InitialGuess::Field(_) => 0.0,
                };
                let g = (u0 - exact(x1, x2)).abs();
                if p.is_on_boundary() {
                    gap_bnd = gap_bnd.max(g);
                } else {
                    gap_int = gap_int.max(g);
                }
            }
            // each outer step adds at most one single-solve error, damped by q
            let n = summary.iterations;
            let eps_int = domain_bound(&c) / (1.0 - q);
            let eps_bnd = boundary_bound(&c) / (1.0 - q);
            let mut components = c.to_map();
            components.insert("single_solve_interior".into(), domain_bound(&c));
            components.insert("single_solve_boundary".into(), boundary_bound(&c));
            components.insert("q".into(), q);
            components.insert("initial_gap_interior".into(), gap_int);
            Some(Bounds {
                interior: recurrent_bound(eps_int, q, n, gap_int)?,
                boundary: recurrent_bound(eps_bnd, q, n, gap_bnd)?,
                components,
            })
        }
        _ => None,
    };
    Ok(SemiLinearOutcome {
        run,
        error,
        summary,
        bounds,
    })
}

/// `pfnn solve`: field CSV and `report.json`.
pub fn cmd_solve(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<PathBuf> {
    let start = Instant::now();
    let quad = cfg.quadrature.spec()?;
    let dir = output_dir(cfg, "solve", out);
    let mut art = Artifacts::new(&dir);
    let report = if cfg.problem == ProblemKind::Bratu {
        let o = semilinear_run(cfg, cfg.n_layers, &quad)?;
        let exact: ScalarField = Arc::new(bratu_exact);
        art.add("solution.csv", o.run.last().to_csv(Some(&*exact)));
        art.add("iterations.jsonl", o.run.metrics_jsonl());
        let (_, net) = o.run.last_step.as_ref().expect("at least one outer step");
        let beta = o.run.densities.last().expect("one density per iterate");
        SolveReport {
            command: "solve".into(),
            name: cfg.name.clone(),
            problem: cfg.problem,
            n_layers: cfg.n_layers,
            beta_norm: beta.sup_norm(),
            beta_l2: l2(beta),
            residual: net.residual(beta)?,
            measured: Some(Measured::from(&o.error)),
            bounds: o.bounds,
            recurrent: Some(o.summary),
            provenance: Provenance::new("solve", cfg, seed),
        }
    } else {
        let case = linear_case(cfg, &quad)?;
        let disc = disc_of(cfg)?;
        let sources = case.problem.source.potential_on_grid(&disc)?;
        let solver = PotentialSolver::new(case.problem, &BoundaryGrid::new(cfg.boundary_nodes)?, &quad)?;
        let r = linear_run(cfg, &solver, &disc, &sources, case.exact.as_ref(), cfg.n_layers, &quad)?;
        art.add("solution.csv", r.field.to_csv(case.exact.as_deref().map(|u| u as &dyn Fn(f64, f64) -> f64)));
        SolveReport {
            command: "solve".into(),
            name: cfg.name.clone(),
            problem: cfg.problem,
            n_layers: cfg.n_layers,
            beta_norm: r.beta_norm,
            beta_l2: r.beta_l2,
            residual: r.residual,
            measured: r.error.as_ref().map(Measured::from),
            bounds: r.bounds,
            recurrent: None,
            provenance: Provenance::new("solve", cfg, seed),
        }
    };
    art.add_json("report.json", &report)?;
    art.add("timing.txt", timing(start));
    art.commit()
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub mae_int: Option<f64>,
    pub linf_int: Option<f64>,
    pub mae_bnd: Option<f64>,
    pub linf_bnd: Option<f64>,
    pub bound_int: Option<f64>,
    pub bound_bnd: Option<f64>,
    pub beta_norm: f64,
    /// in report.json only
    pub beta_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
struct StudyReport {
    command: String,
    name: String,
    rows: Vec<StudyRow>,
    provenance: Provenance,
}

pub const STUDY_HEADER: &str = "M,mae_int,linf_int,mae_bnd,linf_bnd,bound_int,bound_bnd,beta_norm";

pub fn study_csv(rows: &[StudyRow]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    let mut s = String::from(STUDY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.17e}",
            r.m,
            f(r.mae_int),
            f(r.linf_int),
            f(r.mae_bnd),
            f(r.linf_bnd),
            f(r.bound_int),
            f(r.bound_bnd),
            r.beta_norm
        );
    }
    s
}

/// `pfnn study`: one row per layer count. For the semi-linear problem
/// `beta_norm` is the density norm of the first outer iteration.
pub fn cmd_study(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<PathBuf> {
    let start = Instant::now();
    let layers = cfg.study.as_ref().map(|s| s.n_layers.clone()).unwrap_or_default();
    if layers.len() < 2 {
        return Err(PfnnError::Config("a study needs at least two layer counts in [study].n_layers".into()));
    }
    let quad = cfg.quadrature.spec()?;
    let dir = output_dir(cfg, "study", out);
    let mut rows = Vec::with_capacity(layers.len());
    if cfg.problem == ProblemKind::Bratu {
        for &m in &layers {
            let o = semilinear_run(cfg, m, &quad)?;
            rows.push(StudyRow {
                m,
                mae_int: Some(o.error.mae_interior),
                linf_int: Some(o.error.linf_interior),
                mae_bnd: Some(o.error.mae_boundary),
                linf_bnd: Some(o.error.linf_boundary),
                bound_int: o.bounds.as_ref().map(|b| b.interior),
                bound_bnd: o.bounds.as_ref().map(|b| b.boundary),
                beta_norm: o.summary.first_beta_norm,
                beta_l2: o.summary.first_beta_l2,
            });
        }
    } else {
        let case = linear_case(cfg, &quad)?;
        let disc = disc_of(cfg)?;
        let sources = case.problem.source.potential_on_grid(&disc)?;
        let solver = PotentialSolver::new(case.problem, &BoundaryGrid::new(cfg.boundary_nodes)?, &quad)?;
        for &m in &layers {
            let r = linear_run(cfg, &solver, &disc, &sources, case.exact.as_ref(), m, &quad)?;
            rows.push(StudyRow {
                m,
                mae_int: r.error.as_ref().map(|e| e.mae_interior),
                linf_int: r.error.as_ref().map(|e| e.linf_interior),
                mae_bnd: r.error.as_ref().map(|e| e.mae_boundary),
                linf_bnd: r.error.as_ref().map(|e| e.linf_boundary),
                bound_int: r.bounds.as_ref().map(|b| b.interior),
                bound_bnd: r.bounds.as_ref().map(|b| b.boundary),
                beta_norm: r.beta_norm,
                beta_l2: r.beta_l2,
            });
        }
    }
    let mut art = Artifacts::new(&dir);
    art.add("study.csv", study_csv(&rows));
    art.add_json(
        "report.json",
        &StudyReport {
            command: "study".into(),
            name: cfg.name.clone(),
            rows,
            provenance: Provenance::new("study", cfg, seed),
        },
    )?;
    art.add("timing.txt", timing(start));
    art.commit()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub command: String,
    pub name: String,
    pub stats: EnsembleStats,
    pub best_run: usize,
    /// Boundary errors of the first run's untrained initialization.
    pub untrained_boundary_mae: f64,
    pub untrained_boundary_linf: f64,
    pub runs: Vec<RunMetrics>,
    pub provenance: Provenance,
}

fn placed_grid(placement: Placement, n_r: usize, n_theta: usize) -> Result<DiscGrid> {
    match placement {
        Placement::Uniform => DiscGrid::uniform(n_r, n_theta),
        Placement::CellCentered => DiscGrid::cell_centered(n_r, n_theta),
    }
}

/// `pfnn inverse`: trained model, ensemble statistics and reconstructed
/// fields on the train and test grids.
pub fn cmd_inverse(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<PathBuf> {
    let start = Instant::now();
    if cfg.problem != ProblemKind::Inverse {
        return Err(PfnnError::Config("the inverse command needs problem = \"inverse\"".into()));
    }
    let inv = cfg.inverse.ok_or_else(|| PfnnError::Config("missing [inverse]".into()))?;
    let seed = seed.unwrap_or(inv.seed);
    let quad = cfg.quadrature.spec()?;
    let dir = output_dir(cfg, "inverse", out);
    let truth = inverse_ex1();

    let weights = Arc::new(ProductWeights::new(
        truth.spec,
        inv.source_grid.n_r,
        inv.source_grid.n_theta,
        quad,
    )?);
    let train_grid = placed_grid(inv.placement, inv.data_grid.n_r, inv.data_grid.n_theta)?;
    let test_grid = placed_grid(inv.placement, inv.test_grid.n_r, inv.test_grid.n_theta)?;
    let train_points: Vec<_> = train_grid.points().collect();
    let test_points: Vec<_> = test_grid.points().collect();

    let data_settings = ForwardSettings {
        kappa: cfg.kappa,
        n_layers: inv.data_layers,
        boundary_nodes: inv.data_nodes,
        quad,
    };
    let bvp = truth.bvp(&quad)?;
    let data = forward_observations(truth.spec, bvp.source.clone(), &truth.boundary, &train_points, &data_settings)?;

    let settings = ForwardSettings {
        kappa: cfg.kappa,
        n_layers: cfg.n_layers,
        boundary_nodes: cfg.boundary_nodes,
        quad,
    };
    let setup = InverseSetup {
        train_map: source_to_solution_map(&train_points, &truth.boundary, &weights, &settings)?,
        test_map: source_to_solution_map(&test_points, &truth.boundary, &weights, &settings)?,
        test_reference: test_points
            .iter()
            .map(|p| {
                let (x1, x2) = p.to_cartesian();
                (truth.exact)(x1, x2)
            })
            .collect(),
        weights: weights.clone(),
        data,
    };

    let untrained = SourceModel::random(inv.hidden, &mut ChaCha8Rng::seed_from_u64(seed));
    let raw = evaluate_model(&setup, &untrained, seed, f64::NAN, 0);

    let lm = LmSettings {
        iters: inv.iters,
        lambda_reg: inv.lambda_reg,
        ..LmSettings::default()
    };
    let ens = run_ensemble(&setup, inv.n_runs, seed, inv.hidden, &lm)?;

    let psi = nalgebra::DVector::from_iterator(
        weights.len(),
        weights.centres().iter().map(|&(x1, x2)| ens.best.eval(x1, x2)),
    );
    let exact = truth.exact.clone();
    let field = |grid: &DiscGrid, map: &crate::inverse::AffineMap| {
        SolutionField {
            grid: grid.clone(),
            values: map.apply(&psi).iter().copied().collect(),
        }
        .to_csv(Some(&*exact))
    };
    let mut art = Artifacts::new(&dir);
    art.add("model.json", ens.best.to_json()? + "\n");
    art.add("train_field.csv", field(&train_grid, &setup.train_map));
    art.add("test_field.csv", field(&test_grid, &setup.test_map));
    art.add_json(
        "ensemble.json",
        &EnsembleReport {
            command: "inverse".into(),
            name: cfg.name.clone(),
            stats: ens.stats,
            best_run: ens.best_run,
            untrained_boundary_mae: raw.boundary_mae,
            untrained_boundary_linf: raw.boundary_linf,
            runs: ens.runs,
            provenance: Provenance::new("inverse", cfg, Some(seed)),
        },
    )?;
    art.add("timing.txt", timing(start));
    art.commit()
}
