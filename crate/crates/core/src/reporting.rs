//! Reproduction report: measured metrics from a directory of CLI artifacts
//! compared against fixed targets.
//!
//! Expected layout under the artifact root (the default `pfnn` output
//! names): `poisson-ex1/`, `helmholtz-ex1/`, `bratu-ex1/`,
//! `poisson-ex1-study/`, `bratu-ex1-study/`, `inverse-ex1/` and
//! `poisson-ex1-validate/`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{PfnnError, Result};

/// How `measured` is compared with `target_value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Tolerance {
    /// `measured ≤ target`
    AtMost,
    /// `measured < target`
    Below,
    /// `measured ≥ target`
    AtLeast,
    /// `measured > target`
    Above,
    /// `|measured − target| ≤ tol·|target|`
    Relative(f64),
    /// `|log10(measured / target)| ≤ 1`
    OrderOfMagnitude,
}

impl Tolerance {
    pub fn accepts(&self, measured: f64, target: f64) -> bool {
        if !measured.is_finite() {
            return false;
        }
        match *self {
            Tolerance::AtMost => measured <= target,
            Tolerance::Below => measured < target,
            Tolerance::AtLeast => measured >= target,
            Tolerance::Above => measured > target,
            Tolerance::Relative(tol) => (measured - target).abs() <= tol * target.abs(),
            Tolerance::OrderOfMagnitude => {
                measured > 0.0 && target > 0.0 && (measured / target).log10().abs() <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub criterion: String,
    pub name: String,
    pub target_value: f64,
    pub target_source: String,
    pub measured: Option<f64>,
    pub tolerance: Tolerance,
    pub pass: bool,
    pub status: Status,
    /// Artifacts that were absent or unreadable when skipped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub records: Vec<Record>,
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_skipped: usize,
    pub pass: bool,
}

impl ReproductionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per record.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let tag = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let m = r.measured.map_or("-".to_string(), |v| format!("{v:.6e}"));
            s.push_str(&format!(
                "{tag} {:<4} {:<34} measured {m} target {:.6e} ({:?})\n",
                r.criterion, r.name, r.target_value, r.tolerance
            ));
        }
        s.push_str(&format!(
            "overall {} ({} pass, {} fail, {} skipped)\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.n_pass,
            self.n_fail,
            self.n_skipped
        ));
        s
    }
}

/// Absolute error changes at or below this are rounding noise.
pub const FLOAT_TIE: f64 = 1e-15;

struct Dir<'a>(&'a Path);

impl Dir<'_> {
    fn json(&self, rel: &str) -> std::result::Result<Value, String> {
        let text = std::fs::read_to_string(self.0.join(rel)).map_err(|_| rel.to_string())?;
        serde_json::from_str(&text).map_err(|_| rel.to_string())
    }

    fn elapsed(&self, rel: &str) -> std::result::Result<f64, String> {
        let text = std::fs::read_to_string(self.0.join(rel)).map_err(|_| rel.to_string())?;
        text.lines()
            .find_map(|l| l.strip_prefix("elapsed_seconds=")?.trim().parse().ok())
            .ok_or_else(|| rel.to_string())
    }

    // study.csv as rows of named columns
    fn study(&self, rel: &str) -> std::result::Result<Vec<StudyRow>, String> {
        let text = std::fs::read_to_string(self.0.join(rel)).map_err(|_| rel.to_string())?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| rel.to_string())?.split(',').collect();
        let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| rel.to_string());
        let idx = [
            col("M")?,
            col("mae_int")?,
            col("linf_int")?,
            col("mae_bnd")?,
            col("linf_bnd")?,
            col("bound_int")?,
            col("bound_bnd")?,
            col("beta_norm")?,
        ];
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            let get = |k: usize| -> std::result::Result<f64, String> {
                let c = cells.get(idx[k]).ok_or_else(|| rel.to_string())?;
                // empty cells mean "not computed"
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse().map_err(|_| rel.to_string())
                }
            };
            rows.push(StudyRow {
                m: get(0)?,
                mae_int: get(1)?,
                linf_int: get(2)?,
                mae_bnd: get(3)?,
                linf_bnd: get(4)?,
                bound_int: get(5)?,
                bound_bnd: get(6)?,
                beta_norm: get(7)?,
            });
        }
        if rows.is_empty() {
            return Err(rel.to_string());
        }
        Ok(rows)
    }
}

struct StudyRow {
    m: f64,
    mae_int: f64,
    linf_int: f64,
    mae_bnd: f64,
    linf_bnd: f64,
    bound_int: f64,
    bound_bnd: f64,
    beta_norm: f64,
}

fn num(v: &Value, path: &[&str], file: &str) -> std::result::Result<f64, String> {
    let mut cur = v;
    for k in path {
        cur = cur.get(k).ok_or_else(|| format!("{file}: {}", path.join(".")))?;
    }
    cur.as_f64().ok_or_else(|| format!("{file}: {}", path.join(".")))
}

struct Target {
    criterion: &'static str,
    name: &'static str,
    target: f64,
    source: &'static str,
    tolerance: Tolerance,
}

fn record(c: Target, measured: std::result::Result<f64, String>) -> Record {
    match measured {
        Ok(m) => {
            let pass = c.tolerance.accepts(m, c.target);
            Record {
                criterion: c.criterion.into(),
                name: c.name.into(),
                target_value: c.target,
                target_source: c.source.into(),
                measured: Some(m),
                tolerance: c.tolerance,
                pass,
                status: if pass { Status::Pass } else { Status::Fail },
                missing: Vec::new(),
            }
        }
        Err(missing) => Record {
            criterion: c.criterion.into(),
            name: c.name.into(),
            target_value: c.target,
            target_source: c.source.into(),
            measured: None,
            tolerance: c.tolerance,
            pass: false,
            status: Status::Skipped,
            missing: vec![missing],
        },
    }
}

fn check_value(v: &Value, name: &str) -> std::result::Result<f64, String> {
    v.get("checks")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().find(|c| c.get("name").and_then(Value::as_str) == Some(name)))
        .and_then(|c| c.get("value"))
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("validate.json: {name}"))
}

// min that keeps NaN, so a bound that was never computed fails
fn min_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

// bound minus measured error, smallest over interior and boundary
fn bound_margin(v: &Value, file: &str) -> std::result::Result<f64, String> {
    let bi = num(v, &["bounds", "interior"], file)?;
    let bb = num(v, &["bounds", "boundary"], file)?;
    let mi = num(v, &["measured", "linf_interior"], file)?;
    let mb = num(v, &["measured", "linf_boundary"], file)?;
    Ok(min_nan(bi - mi, bb - mb))
}

/// Assemble the report from the artifacts under `dir`. Records whose
/// artifacts are missing are marked skipped, and any skipped record makes
/// the overall flag false.
pub fn build_report(dir: &Path) -> ReproductionReport {
    let d = Dir(dir);
    let poisson = d.json("poisson-ex1/report.json");
    let helmholtz = d.json("helmholtz-ex1/report.json");
    let bratu = d.json("bratu-ex1/report.json");
    let inverse = d.json("inverse-ex1/ensemble.json");
    let validate = d.json("poisson-ex1-validate/validate.json");
    let pstudy = d.study("poisson-ex1-study/study.csv");
    let bstudy = d.study("bratu-ex1-study/study.csv");
    let field = |r: &std::result::Result<Value, String>, path: &[&str], file: &str| {
        r.as_ref().map_err(Clone::clone).and_then(|v| num(v, path, file))
    };
    let from_validate = |name: &str| validate.as_ref().map_err(Clone::clone).and_then(|v| check_value(v, name));
    let beta_at = |m: f64| -> std::result::Result<f64, String> {
        let rows = bstudy.as_ref().map_err(Clone::clone)?;
        rows.iter()
            .find(|r| r.m == m)
            .map(|r| r.beta_norm)
            .ok_or_else(|| format!("bratu-ex1-study/study.csv: M = {m}"))
    };

    let mut records = vec![
        record(
            Target {
                criterion: "A1",
                name: "poisson_interior_linf",
                target: 5e-2,
                source: "closed form x1(x1^2+x2^2-1)/4, N = 1000, M = 100",
                tolerance: Tolerance::AtMost,
            },
            field(&poisson, &["measured", "linf_interior"], "poisson-ex1/report.json"),
        ),
        record(
            Target {
                criterion: "A1",
                name: "poisson_interior_mae",
                target: 1e-2,
                source: "closed form x1(x1^2+x2^2-1)/4, N = 1000, M = 100",
                tolerance: Tolerance::AtMost,
            },
            field(&poisson, &["measured", "mae_interior"], "poisson-ex1/report.json"),
        ),
        record(
            Target {
                criterion: "A1",
                name: "poisson_runtime_seconds",
                target: 300.0,
                source: "five minute budget",
                tolerance: Tolerance::AtMost,
            },
            d.elapsed("poisson-ex1/timing.txt"),
        ),
    ];
    for (name, r, file) in [
        ("poisson_boundary_mae", &poisson, "poisson-ex1/report.json"),
        ("helmholtz_boundary_mae", &helmholtz, "helmholtz-ex1/report.json"),
    ] {
        records.push(record(
            Target {
                criterion: "A2",
                name,
                target: 1e-10,
                source: "boundary exactness of the jump-free representation",
                tolerance: Tolerance::AtMost,
            },
            field(r, &["measured", "mae_boundary"], file),
        ));
    }
    records.push(record(
        Target {
            criterion: "A2",
            name: "inverse_untrained_boundary_mae",
            target: 1e-10,
            source: "boundary exactness independent of the learned source",
            tolerance: Tolerance::AtMost,
        },
        field(&inverse, &["untrained_boundary_mae"], "inverse-ex1/ensemble.json"),
    ));
    records.push(record(
        Target {
            criterion: "A3",
            name: "helmholtz_interior_linf",
            target: 5e-2,
            source: "closed form x1^3 - 2 x2^2, lambda = 1",
            tolerance: Tolerance::AtMost,
        },
        field(&helmholtz, &["measured", "linf_interior"], "helmholtz-ex1/report.json"),
    ));
    records.push(record(
        Target {
            criterion: "A4",
            name: "bratu_interior_linf",
            target: 5e-2,
            source: "closed form 1 - r^2 after 12 outer iterations",
            tolerance: Tolerance::AtMost,
        },
        field(&bratu, &["measured", "linf_interior"], "bratu-ex1/report.json"),
    ));
    records.push(record(
        Target {
            criterion: "A4",
            name: "bratu_update_ratio_q",
            target: 1.0,
            source: "contraction of the outer iteration",
            tolerance: Tolerance::Below,
        },
        field(&bratu, &["recurrent", "q"], "bratu-ex1/report.json"),
    ));
    records.push(record(
        Target {
            criterion: "A5",
            name: "bratu_beta_norm_m20",
            target: 1.0442995,
            source: "reference density norm at M = 20",
            tolerance: Tolerance::Relative(1e-3),
        },
        beta_at(20.0),
    ));
    records.push(record(
        Target {
            criterion: "A5",
            name: "bratu_beta_norm_m30",
            target: 1.0443096,
            source: "reference density norm at M = 30",
            tolerance: Tolerance::Relative(1e-3),
        },
        beta_at(30.0),
    ));
    records.push(record(
        Target {
            criterion: "A5",
            name: "bratu_beta_norm_increment",
            target: 0.0,
            source: "norm at M = 30 exceeds norm at M = 20",
            tolerance: Tolerance::Above,
        },
        beta_at(30.0).and_then(|b30| Ok(b30 - beta_at(20.0)?)),
    ));

    let (bnd_increase, int_excess) = match &pstudy {
        Ok(rows) => {
            let (mut bnd, mut int) = (0.0_f64, 0.0_f64);
            // changes below the floating-point floor are ties
            let rise = |a: f64, b: f64| if b - a <= FLOAT_TIE { 0.0 } else { b - a };
            for w in rows.windows(2) {
                bnd = bnd.max(rise(w[0].mae_bnd, w[1].mae_bnd));
                let rel = rise(w[0].mae_int, w[1].mae_int) / w[0].mae_int;
                let allowance = if w[1].beta_norm > w[0].beta_norm { 1e-4 } else { 0.0 };
                int = int.max(rel - allowance);
            }
            (Ok(bnd), Ok(int))
        }
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    records.push(record(
        Target {
            criterion: "A6",
            name: "poisson_study_boundary_mae_increase",
            target: 0.0,
            source: "errors decrease monotonically in M (changes up to 1e-15 are ties)",
            tolerance: Tolerance::AtMost,
        },
        bnd_increase,
    ));
    records.push(record(
        Target {
            criterion: "A6",
            name: "poisson_study_interior_mae_excess",
            target: 0.0,
            source: "relative increase beyond 1e-4 where the density norm grows, any increase elsewhere",
            tolerance: Tolerance::AtMost,
        },
        int_excess,
    ));

    let mut margin: std::result::Result<f64, String> = Ok(f64::INFINITY);
    for (r, file) in [
        (&poisson, "poisson-ex1/report.json"),
        (&helmholtz, "helmholtz-ex1/report.json"),
        (&bratu, "bratu-ex1/report.json"),
    ] {
        margin = margin.and_then(|m| Ok(min_nan(m, bound_margin(r.as_ref().map_err(Clone::clone)?, file)?)));
    }
    for s in [&pstudy, &bstudy] {
        margin = margin.and_then(|m| {
            let rows = s.as_ref().map_err(Clone::clone)?;
            Ok(rows.iter().fold(m, |acc, r| {
                min_nan(min_nan(acc, r.bound_int - r.linf_int), r.bound_bnd - r.linf_bnd)
            }))
        });
    }
    records.push(record(
        Target {
            criterion: "A7",
            name: "bound_minus_measured_linf",
            target: 0.0,
            source: "a priori error bound over every preset run",
            tolerance: Tolerance::AtLeast,
        },
        margin,
    ));

    for (name, path, target) in [
        ("inverse_train_mse_mean", ["stats", "train_mse", "mean"], 1e-5),
        ("inverse_test_linf_mean", ["stats", "test_linf", "mean"], 5e-2),
        ("inverse_boundary_mae_mean", ["stats", "boundary_mae", "mean"], 1e-12),
    ] {
        records.push(record(
            Target {
                criterion: "A8",
                name,
                target,
                source: "50-run ensemble, reference 8.45e-7 / 7.73e-3 / 1.95e-15",
                tolerance: Tolerance::AtMost,
            },
            field(&inverse, &path, "inverse-ex1/ensemble.json"),
        ));
    }
    records.push(record(
        Target {
            criterion: "A8",
            name: "inverse_runtime_seconds",
            target: 7200.0,
            source: "two hour budget",
            tolerance: Tolerance::AtMost,
        },
        d.elapsed("inverse-ex1/timing.txt"),
    ));

    for (criterion, name, target) in [
        ("A9", "fredholm_vs_direct", 1e-8),
        ("A9", "gauss_interior_laplace", 1e-6),
        ("A9", "gauss_boundary_laplace", 1e-6),
        ("A10", "bessel_integral_oracle", 1e-10),
        ("A10", "bessel_derivative", 1e-6),
    ] {
        records.push(record(
            Target {
                criterion,
                name,
                target,
                source: "invariant suite",
                tolerance: Tolerance::AtMost,
            },
            from_validate(name),
        ));
    }

    let n_pass = records.iter().filter(|r| r.status == Status::Pass).count();
    let n_fail = records.iter().filter(|r| r.status == Status::Fail).count();
    let n_skipped = records.len() - n_pass - n_fail;
    ReproductionReport {
        pass: n_pass == records.len(),
        records,
        n_pass,
        n_fail,
        n_skipped,
    }
}

/// Build the report and write it to `<dir>/reproduction.json`.
pub fn write_report(dir: &Path) -> Result<ReproductionReport> {
    let report = build_report(dir);
    let path = dir.join("reproduction.json");
    std::fs::write(&path, report.to_json()).map_err(|source| PfnnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_semantics() {
        assert!(Tolerance::AtMost.accepts(1.0, 1.0));
        assert!(!Tolerance::Below.accepts(1.0, 1.0));
        assert!(Tolerance::Relative(1e-3).accepts(1.0005, 1.0));
        assert!(!Tolerance::Relative(1e-3).accepts(1.002, 1.0));
        assert!(Tolerance::OrderOfMagnitude.accepts(5e-15, 1.95e-15));
        assert!(!Tolerance::OrderOfMagnitude.accepts(5e-13, 1.95e-15));
        assert!(!Tolerance::AtLeast.accepts(f64::NAN, 0.0));
    }
}
