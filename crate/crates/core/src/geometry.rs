//! Unit disc geometry: polar points, the boundary circle grid and tensor
//! product polar grids.

use std::f64::consts::{PI, TAU};

use crate::error::{PfnnError, Result};

/// Normalize an angle to `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed angle difference `a - b` mapped to `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Point of the closed unit disc in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    r: f64,
    theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || !theta.is_finite() {
            return Err(PfnnError::InvalidArgument(format!(
                "non-finite polar point ({r}, {theta})"
            )));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(PfnnError::InvalidArgument(format!(
                "radius {r} outside [0, 1]"
            )));
        }
        Ok(Self {
            r,
            theta: normalize_angle(theta),
        })
    }

    /// Point on the unit circle.
    pub fn boundary(theta: f64) -> Self {
        Self {
            r: 1.0,
            theta: normalize_angle(theta),
        }
    }

    /// Build from Cartesian coordinates; radii in `(1, 1 + 1e-12]` are snapped to 1.
    pub fn from_cartesian(x1: f64, x2: f64) -> Result<Self> {
        let mut r = x1.hypot(x2);
        if r > 1.0 && r <= 1.0 + 1e-12 {
            r = 1.0;
        }
        Self::new(r, x2.atan2(x1))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_cartesian(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.r * c, self.r * s)
    }

    pub fn is_on_boundary(&self) -> bool {
        self.r == 1.0
    }

    /// The point `x* = (1, θ)` sharing the angle of `self`.
    pub fn boundary_projection(&self) -> Result<PolarPoint> {
        if self.r <= 0.0 {
            return Err(PfnnError::InvalidArgument(
                "boundary projection undefined at the origin".into(),
            ));
        }
        Ok(PolarPoint::boundary(self.theta))
    }

    pub fn distance(&self, other: &PolarPoint) -> f64 {
        distance_polar(self.r, self.theta, other.r, other.theta)
    }
}

/// Euclidean distance between `(r1, t1)` and `(r2, t2)`.
///
/// Uses `d² = (r1 − r2)² + 4 r1 r2 sin²(Δ/2)`, which stays accurate for
/// nearby points.
pub fn distance_polar(r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
    let s = (0.5 * (t1 - t2)).sin();
    let dr = r1 - r2;
    (dr * dr + 4.0 * r1 * r2 * s * s).sqrt()
}

/// `N` equispaced nodes on the unit circle, `θ_i = 2πi/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    thetas: Vec<f64>,
    d_theta: f64,
}

impl BoundaryGrid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(PfnnError::InvalidArgument(
                "boundary grid needs at least one node".into(),
            ));
        }
        let d_theta = TAU / n_nodes as f64;
        let thetas = (0..n_nodes).map(|i| i as f64 * d_theta).collect();
        Ok(Self { thetas, d_theta })
    }

    pub fn n_nodes(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn point(&self, i: usize) -> PolarPoint {
        PolarPoint::boundary(self.thetas[i])
    }

    /// Index of the node at angle `theta`, if `theta` is a node up to 1e-12.
    pub fn node_index(&self, theta: f64) -> Option<usize> {
        let n = self.thetas.len();
        let k = (normalize_angle(theta) / self.d_theta).round() as usize % n;
        if angle_diff(theta, self.thetas[k]).abs() <= 1e-12 {
            Some(k)
        } else {
            None
        }
    }
}

/// Tensor-product polar grid `radii × thetas` on the disc (origin excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrid {
    radii: Vec<f64>,
    thetas: Vec<f64>,
    d_r: f64,
    d_theta: f64,
}

impl DiscGrid {
    /// Radii `i/M_r` for `i = 1..=M_r` (the last row is the boundary) and
    /// angles `2πj/M_θ`.
    pub fn uniform(n_r: usize, n_theta: usize) -> Result<Self> {
        Self::check_counts(n_r, n_theta)?;
        let d_r = 1.0 / n_r as f64;
        let radii = (1..=n_r).map(|i| i as f64 / n_r as f64).collect();
        Ok(Self::with_parts(radii, n_theta, d_r))
    }

    /// Cell-centred radii `(i − ½)/M_r` for `i = 1..=M_r`, same angles.
    pub fn cell_centered(n_r: usize, n_theta: usize) -> Result<Self> {
        Self::check_counts(n_r, n_theta)?;
        let d_r = 1.0 / n_r as f64;
        let radii = (0..n_r).map(|i| (i as f64 + 0.5) * d_r).collect();
        Ok(Self::with_parts(radii, n_theta, d_r))
    }

    fn check_counts(n_r: usize, n_theta: usize) -> Result<()> {
        if n_r == 0 || n_theta == 0 {
            return Err(PfnnError::InvalidArgument(format!(
                "disc grid needs positive counts, got {n_r}x{n_theta}"
            )));
        }
        Ok(())
    }

    fn with_parts(radii: Vec<f64>, n_theta: usize, d_r: f64) -> Self {
        let d_theta = TAU / n_theta as f64;
        let thetas = (0..n_theta).map(|j| j as f64 * d_theta).collect();
        Self {
            radii,
            thetas,
            d_r,
            d_theta,
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn d_r(&self) -> f64 {
        self.d_r
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn n_r(&self) -> usize {
        self.radii.len()
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat row-major index (radius-major).
    pub fn index(&self, i_r: usize, j_theta: usize) -> usize {
        i_r * self.thetas.len() + j_theta
    }

    pub fn point(&self, i_r: usize, j_theta: usize) -> PolarPoint {
        PolarPoint {
            r: self.radii[i_r],
            theta: self.thetas[j_theta],
        }
    }

    /// All nodes in row-major order.
    pub fn points(&self) -> impl Iterator<Item = PolarPoint> + '_ {
        self.radii.iter().flat_map(move |&r| {
            self.thetas.iter().map(move |&theta| PolarPoint { r, theta })
        })
    }

    /// Index of the `r = 1` row, if present.
    pub fn boundary_row(&self) -> Option<usize> {
        self.radii.iter().position(|&r| r == 1.0)
    }
}
