//! Boundary Riemann sums, polar grid sums, and adaptive Gauss–Legendre
//! integration of weakly singular integrands over the disc.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::geometry::{angle_diff, BoundaryGrid, DiscGrid, PolarPoint};

const GL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMode {
    BoundaryRiemann,
    DiscGridSum,
    AdaptiveSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadratureMode,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            mode: QuadratureMode::AdaptiveSingular,
            rel_tol: 1e-8,
            max_subdivisions: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn adaptive(rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            mode: QuadratureMode::AdaptiveSingular,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(PfnnError::InvalidArgument(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(PfnnError::InvalidArgument(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Rule {
    // nodes and weights mapped to [0, 1]
    x: [f64; GL_ORDER],
    w: [f64; GL_ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (n, w) = gauss_legendre(GL_ORDER);
        let mut x = [0.0; GL_ORDER];
        let mut ww = [0.0; GL_ORDER];
        for i in 0..GL_ORDER {
            x[i] = 0.5 * (n[i] + 1.0);
            ww[i] = 0.5 * w[i];
        }
        Rule { x, w: ww }
    })
}

/// `Σ f(θ_i) Δθ` over the boundary nodes.
pub fn boundary_integrate<F: Fn(f64) -> f64>(f: F, grid: &BoundaryGrid) -> Result<f64> {
    let mut sum = 0.0;
    for &t in grid.thetas() {
        let v = f(t);
        if !v.is_finite() {
            return Err(PfnnError::NonFinite(format!(
                "boundary integrand at theta = {t}"
            )));
        }
        sum += v;
    }
    Ok(sum * grid.d_theta())
}

/// `Σ v(r, θ) r Δr Δθ` over a polar grid (values row-major, radius-major).
pub fn disc_integrate_grid(values: &[f64], grid: &DiscGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(PfnnError::GridMismatch(format!(
            "{} values for a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let n_t = grid.n_theta();
    let mut total = 0.0;
    for (i, &r) in grid.radii().iter().enumerate() {
        let mut row = 0.0;
        for &v in &values[i * n_t..(i + 1) * n_t] {
            if !v.is_finite() {
                return Err(PfnnError::NonFinite("disc grid value".into()));
            }
            row += v;
        }
        total += row * r;
    }
    Ok(total * grid.d_r() * grid.d_theta())
}

/// Quadrature node handed to disc integrands.
#[derive(Debug, Clone, Copy)]
pub struct DiscSample {
    pub r: f64,
    pub theta: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Axis-aligned rectangle in the `(r, θ)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRect {
    pub r0: f64,
    pub r1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl PolarRect {
    // Halve the physically longer side, or both when comparable; the angular
    // side is measured at radius `metric_r`. Returns the children and whether
    // the split was isotropic.
    fn split(&self, force_both: bool, metric_r: f64) -> ([PolarRect; 4], usize, bool) {
        let rm = 0.5 * (self.r0 + self.r1);
        let tm = 0.5 * (self.t0 + self.t1);
        let lr = self.r1 - self.r0;
        let lt = (self.t1 - self.t0) * metric_r;
        let p = *self;
        if !force_both && lt > 2.0 * lr {
            let a = PolarRect { t1: tm, ..p };
            let b = PolarRect { t0: tm, ..p };
            ([a, b, a, b], 2, false)
        } else if !force_both && lr > 2.0 * lt {
            let a = PolarRect { r1: rm, ..p };
            let b = PolarRect { r0: rm, ..p };
            ([a, b, a, b], 2, false)
        } else {
            (
                [
                    PolarRect { r1: rm, t1: tm, ..p },
                    PolarRect { r0: rm, t1: tm, ..p },
                    PolarRect { r1: rm, t0: tm, ..p },
                    PolarRect { r0: rm, t0: tm, ..p },
                ],
                4,
                true,
            )
        }
    }
}

// Corner of a rectangle where the singularity sits.
#[derive(Debug, Clone, Copy)]
struct Corner {
    r_low: bool,
    t_low: bool,
}

impl Corner {
    fn holds(&self, parent: &PolarRect, child: &PolarRect) -> bool {
        let r_ok = if self.r_low { child.r0 == parent.r0 } else { child.r1 == parent.r1 };
        let t_ok = if self.t_low { child.t0 == parent.t0 } else { child.t1 == parent.t1 };
        r_ok && t_ok
    }
}

// Cap on consecutive one-directional splits before both sides are halved.
const MAX_ANISOTROPIC: usize = 48;

#[derive(Debug, Clone, Copy, Default)]
struct Estimate {
    value: f64,
    abs: f64,
}

struct Adaptive<'a, F> {
    f: &'a F,
    max_depth: usize,
    unresolved: f64,
    evaluations: usize,
}

impl<F: Fn(&DiscSample) -> f64> Adaptive<'_, F> {
    fn gl(&mut self, p: &PolarRect) -> Estimate {
        let rule = rule();
        let hr = p.r1 - p.r0;
        let ht = p.t1 - p.t0;
        let mut rs = [0.0; GL_ORDER];
        for i in 0..GL_ORDER {
            rs[i] = p.r0 + hr * rule.x[i];
        }
        let mut est = Estimate::default();
        for j in 0..GL_ORDER {
            let t = p.t0 + ht * rule.x[j];
            let (s, c) = t.sin_cos();
            let mut col = 0.0;
            let mut col_abs = 0.0;
            for i in 0..GL_ORDER {
                let r = rs[i];
                let v = (self.f)(&DiscSample { r, theta: t, x1: r * c, x2: r * s }) * r * rule.w[i];
                col += v;
                col_abs += v.abs();
            }
            est.value += col * rule.w[j];
            est.abs += col_abs * rule.w[j];
        }
        self.evaluations += GL_ORDER * GL_ORDER;
        est.value *= hr * ht;
        est.abs *= hr * ht;
        est
    }

    // Duffy transform of the two triangles meeting at the singular corner,
    // with u = w² grading toward the corner.
    fn duffy(&mut self, p: &PolarRect, corner: Corner) -> Estimate {
        let rule = rule();
        let a = p.r1 - p.r0;
        let b = p.t1 - p.t0;
        let (rc, sr) = if corner.r_low { (p.r0, 1.0) } else { (p.r1, -1.0) };
        let (tc, st) = if corner.t_low { (p.t0, 1.0) } else { (p.t1, -1.0) };
        let mut est = Estimate::default();
        for tri in 0..2 {
            for iw in 0..GL_ORDER {
                let w = rule.x[iw];
                let u = w * w;
                let jac = 2.0 * w * u * a * b;
                let mut acc = 0.0;
                let mut acc_abs = 0.0;
                for iv in 0..GL_ORDER {
                    let v = rule.x[iv];
                    let (rho, tau) = if tri == 0 { (u, u * v) } else { (u * v, u) };
                    let r = rc + sr * a * rho;
                    let t = tc + st * b * tau;
                    let (s, c) = t.sin_cos();
                    let val = (self.f)(&DiscSample { r, theta: t, x1: r * c, x2: r * s }) * r * rule.w[iv];
                    acc += val;
                    acc_abs += val.abs();
                }
                est.value += acc * jac * rule.w[iw];
                est.abs += acc_abs * jac * rule.w[iw];
            }
        }
        self.evaluations += 2 * GL_ORDER * GL_ORDER;
        est
    }

    fn regular(&mut self, p: &PolarRect, whole: f64, tol: f64, depth: usize, aniso: usize) -> f64 {
        let (kids, n, iso) = p.split(aniso >= MAX_ANISOTROPIC, p.r1);
        let mut ests = [0.0; 4];
        for k in 0..n {
            ests[k] = self.gl(&kids[k]).value;
        }
        let sum: f64 = ests[..n].iter().sum();
        let err = (sum - whole).abs();
        if err <= tol {
            return sum;
        }
        let (depth, aniso) = if iso { (depth + 1, 0) } else { (depth, aniso + 1) };
        if depth > self.max_depth {
            self.unresolved += err;
            return sum;
        }
        let child_tol = tol / (n as f64).sqrt();
        let mut total = 0.0;
        for k in 0..n {
            total += self.regular(&kids[k], ests[k], child_tol, depth, aniso);
        }
        total
    }

    fn corner(&mut self, p: &PolarRect, c: Corner, whole: f64, tol: f64, depth: usize, aniso: usize) -> f64 {
        // near the singular corner the angular side has length Δθ·r_corner
        let rc = if c.r_low { p.r0 } else { p.r1 };
        let (kids, n, iso) = p.split(aniso >= MAX_ANISOTROPIC, rc);
        let mut ci = 0;
        let mut ests = [0.0; 4];
        for k in 0..n {
            ests[k] = if c.holds(p, &kids[k]) {
                ci = k;
                self.duffy(&kids[k], c).value
            } else {
                self.gl(&kids[k]).value
            };
        }
        let sum: f64 = ests[..n].iter().sum();
        let err = (sum - whole).abs();
        if err <= tol && iso && (depth > 0 || aniso > 0) {
            return sum;
        }
        let (depth, aniso) = if iso { (depth + 1, 0) } else { (depth, aniso + 1) };
        if depth > self.max_depth {
            self.unresolved += err;
            return sum;
        }
        let child_tol = tol / (n as f64).sqrt();
        let mut total = 0.0;
        for k in 0..n {
            total += if k == ci {
                self.corner(&kids[k], c, ests[k], child_tol, depth, aniso)
            } else {
                self.regular(&kids[k], ests[k], child_tol, 0, 0)
            };
        }
        total
    }
}

/// Adaptive integral of `f(y)` over a polar rectangle, where `f` may carry
/// a logarithmic singularity at `singular = (r_s, θ_s)` (angle in the same
/// unwrapped coordinate as the rectangle). The rectangle is cut along
/// `r = r_s` and `θ = θ_s` so the singular point sits at panel corners.
/// The Jacobian `r` is applied internally.
pub fn integrate_polar_rect<F: Fn(&DiscSample) -> f64>(
    f: &F,
    rect: PolarRect,
    singular: Option<(f64, f64)>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    let mut rcuts = vec![rect.r0];
    let mut tcuts = vec![rect.t0];
    let mut point = None;
    if let Some((rs, ts)) = singular {
        if rs > rect.r0 && rs < rect.r1 {
            rcuts.push(rs);
        }
        if ts > rect.t0 && ts < rect.t1 {
            tcuts.push(ts);
        }
        if rs >= rect.r0 && rs <= rect.r1 && ts >= rect.t0 && ts <= rect.t1 {
            point = Some((rs, ts));
        }
    }
    rcuts.push(rect.r1);
    tcuts.push(rect.t1);

    let mut engine = Adaptive {
        f,
        max_depth: spec.max_subdivisions,
        unresolved: 0.0,
        evaluations: 0,
    };
    let mut pieces = Vec::new();
    for w in rcuts.windows(2) {
        for v in tcuts.windows(2) {
            let p = PolarRect { r0: w[0], r1: w[1], t0: v[0], t1: v[1] };
            if p.r1 <= p.r0 || p.t1 <= p.t0 {
                continue;
            }
            let corner = point.and_then(|(rs, ts)| {
                let r_low = rs == p.r0;
                let r_high = rs == p.r1;
                let t_low = ts == p.t0;
                let t_high = ts == p.t1;
                if (r_low || r_high) && (t_low || t_high) {
                    Some(Corner { r_low, t_low })
                } else {
                    None
                }
            });
            let est = match corner {
                Some(c) => engine.duffy(&p, c),
                None => engine.gl(&p),
            };
            pieces.push((p, corner, est));
        }
    }
    let scale: f64 = pieces.iter().map(|(_, _, e)| e.abs).sum();
    let tol_total = spec.rel_tol * scale;
    let tol_piece = tol_total / pieces.len().max(1) as f64;
    let mut total = 0.0;
    for (p, corner, est) in &pieces {
        total += match corner {
            Some(c) => engine.corner(p, *c, est.value, tol_piece, 0, 0),
            None => engine.regular(p, est.value, tol_piece, 0, 0),
        };
    }
    if !total.is_finite() {
        return Err(PfnnError::NonFinite("adaptive quadrature estimate".into()));
    }
    if engine.unresolved > tol_total {
        return Err(PfnnError::QuadratureBudget {
            estimate: total,
            achieved: if scale > 0.0 { engine.unresolved / scale } else { engine.unresolved },
        });
    }
    Ok(total)
}

/// Adaptive integral of `f` over the unit disc with a weak singularity at
/// `singular_at`. The Jacobian `r` is applied internally.
pub fn disc_integrate_singular<F: Fn(&DiscSample) -> f64>(
    f: &F,
    singular_at: &PolarPoint,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let ts = singular_at.theta();
    let rect = PolarRect { r0: 0.0, r1: 1.0, t0: ts - PI, t1: ts + PI };
    integrate_polar_rect(f, rect, Some((singular_at.r(), ts)), spec)
}

/// Express angle `theta` in the unwrapped coordinate closest to `reference`.
pub fn unwrap_angle(theta: f64, reference: f64) -> f64 {
    reference + angle_diff(theta, reference)
}
