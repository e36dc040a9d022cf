//! Run configuration: a TOML file validated before any computation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Poisson,
    Helmholtz,
    Bratu,
    Inverse,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self {
            rel_tol: q.rel_tol,
            max_subdivisions: q.max_subdivisions,
        }
    }
}

impl QuadratureConfig {
    pub fn spec(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::adaptive(self.rel_tol, self.max_subdivisions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub enabled: bool,
    /// Angles per radius at which the D-terms are sampled.
    pub sample_angles: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            sample_angles: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n_layers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `u₀(r, θ) = f(θ)`.
    BoundaryExtension,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrentConfig {
    pub n_outer: usize,
    #[serde(default = "default_initial")]
    pub initial: InitialKind,
    #[serde(default)]
    pub early_stop: Option<f64>,
}

fn default_initial() -> InitialKind {
    InitialKind::BoundaryExtension
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Radii `i/n`, `i = 1..=n` (includes the circle).
    Uniform,
    /// Radii `(i − ½)/n`.
    CellCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub data_grid: GridSize,
    pub test_grid: GridSize,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    /// Cell grid on which the source is sampled.
    pub source_grid: GridSize,
    /// Layers and nodes of the forward network that generates the data.
    pub data_layers: usize,
    pub data_nodes: usize,
    pub lambda_reg: f64,
    pub iters: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub hidden: usize,
}

fn default_placement() -> Placement {
    Placement::Uniform
}

/// `f(θ) = a₀ + Σ aₖ cos kθ + bₖ sin kθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierBoundary {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierBoundary {
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.constant;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * ((k + 1) as f64 * t).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * ((k + 1) as f64 * t).sin();
        }
        v
    }
}

/// User problem: Fourier boundary data and a polynomial source
/// `ψ = Σ c x₁ᵖ x₂^q` given as `[c, p, q]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub boundary: FourierBoundary,
    #[serde(default)]
    pub source: Vec<[f64; 3]>,
}

pub fn eval_polynomial(terms: &[[f64; 3]], x1: f64, x2: f64) -> f64 {
    terms
        .iter()
        .map(|[c, p, q]| c * x1.powi(*p as i32) * x2.powi(*q as i32))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemKind,
    /// Shift `λ` of `Δu − λu` (the outer-loop shift for semi-linear runs).
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub n_layers: usize,
    pub boundary_nodes: usize,
    pub disc: GridSize,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub recurrent: Option<RecurrentConfig>,
    #[serde(default)]
    pub inverse: Option<InverseConfig>,
    #[serde(default)]
    pub custom: Option<CustomConfig>,
    /// Root directory for artifacts.
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_kappa() -> f64 {
    0.5
}

fn default_output() -> String {
    "out".into()
}

/// Built-in configurations, addressable by name in place of a path.
pub const PRESETS: [(&str, &str); 4] = [
    ("poisson-ex1", include_str!("../../presets/poisson-ex1.toml")),
    ("helmholtz-ex1", include_str!("../../presets/helmholtz-ex1.toml")),
    ("bratu-ex1", include_str!("../../presets/bratu-ex1.toml")),
    ("inverse-ex1", include_str!("../../presets/inverse-ex1.toml")),
];

fn bad(msg: impl Into<String>) -> PfnnError {
    PfnnError::Config(msg.into())
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(bad(format!("{name} must be positive")));
    }
    Ok(())
}

fn grid(name: &str, g: &GridSize) -> Result<()> {
    positive(&format!("{name}.n_r"), g.n_r)?;
    positive(&format!("{name}.n_theta"), g.n_theta)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file, or a preset when `path` names one and no such
    /// file exists.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some((_, text)) = PRESETS.iter().find(|(n, _)| Path::new(n) == path) {
                return Self::parse(text);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|source| PfnnError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| bad(format!("unknown preset {name}")))?;
        Self::parse(text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(bad("name must be a non-empty file name"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(bad(format!("kappa must lie in (0, 1], got {}", self.kappa)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(bad(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        positive("n_layers", self.n_layers)?;
        positive("boundary_nodes", self.boundary_nodes)?;
        grid("disc", &self.disc)?;
        self.quadrature.spec().map_err(|e| bad(e.to_string()))?;
        if self.bounds.enabled {
            positive("bounds.sample_angles", self.bounds.sample_angles)?;
        }
        if let Some(s) = &self.study {
            if s.n_layers.iter().any(|&m| m == 0) {
                return Err(bad("study.n_layers entries must be positive"));
            }
        }
        match self.problem {
            ProblemKind::Poisson | ProblemKind::Inverse if self.lambda != 0.0 => {
                return Err(bad("poisson and inverse problems need lambda = 0"));
            }
            ProblemKind::Helmholtz | ProblemKind::Bratu if self.lambda == 0.0 => {
                return Err(bad("helmholtz and bratu problems need lambda > 0"));
            }
            _ => {}
        }
        if self.problem == ProblemKind::Bratu {
            let r = self.recurrent.ok_or_else(|| bad("bratu needs a [recurrent] section"))?;
            positive("recurrent.n_outer", r.n_outer)?;
            if self.boundary_nodes != self.disc.n_theta {
                return Err(bad("bratu needs boundary_nodes = disc.n_theta"));
            }
            if r.early_stop.is_some_and(|t| !(t > 0.0)) {
                return Err(bad("recurrent.early_stop must be positive"));
            }
        }
        if self.problem == ProblemKind::Custom && self.custom.is_none() {
            return Err(bad("custom problem needs a [custom] section"));
        }
        if let Some(c) = &self.custom {
            if c.source.iter().any(|[c, p, q]| !c.is_finite() || *p < 0.0 || *q < 0.0 || p.fract() != 0.0 || q.fract() != 0.0) {
                return Err(bad("custom.source terms are [coefficient, p, q] with integer p, q >= 0"));
            }
        }
        if let Some(inv) = &self.inverse {
            grid("inverse.data_grid", &inv.data_grid)?;
            grid("inverse.test_grid", &inv.test_grid)?;
            grid("inverse.source_grid", &inv.source_grid)?;
            positive("inverse.data_layers", inv.data_layers)?;
            positive("inverse.data_nodes", inv.data_nodes)?;
            positive("inverse.iters", inv.iters)?;
            positive("inverse.n_runs", inv.n_runs)?;
            positive("inverse.hidden", inv.hidden)?;
            if !(inv.lambda_reg >= 0.0) || !inv.lambda_reg.is_finite() {
                return Err(bad("inverse.lambda_reg must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            assert_eq!(RunConfig::preset(name).unwrap().name, name);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let base = RunConfig::preset("poisson-ex1").unwrap();
        let text = toml::to_string(&base).unwrap();
        assert!(RunConfig::parse(&text.replace("kappa = 0.5", "kappa = 1.5")).is_err());
        assert!(RunConfig::parse(&text.replace("boundary_nodes = 1000", "boundary_nodes = 0")).is_err());
        assert!(RunConfig::parse(&format!("{text}\nbogus = 1\n")).is_err());
        assert!(RunConfig::parse("not toml [").is_err());
    }

    #[test]
    fn fourier_and_polynomial() {
        let f = FourierBoundary {
            constant: 1.0,
            cos: vec![0.0, 2.0],
            sin: vec![3.0],
        };
        let t = 0.4_f64;
        assert!((f.eval(t) - (1.0 + 2.0 * (2.0 * t).cos() + 3.0 * t.sin())).abs() < 1e-15);
        assert_eq!(eval_polynomial(&[[2.0, 1.0, 0.0], [1.0, 0.0, 2.0]], 3.0, 2.0), 10.0);
    }
}
