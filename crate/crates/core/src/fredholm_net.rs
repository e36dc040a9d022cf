//! Fredholm network for the boundary integral equation
//! `β(x) = g(x) + ∫∂Ω K(x, y) β(y) dσ_y`, `K = −2 ∂Φ/∂n_y`.
//!
//! Hidden layers replay the Krasnoselskii–Mann iteration
//! `β ← (1 − κ)β + κ(g + K̃β)` on the uniform boundary grid, with
//! `K̃_ij = K(x_i, y_j) Δθ` and the diagonal set to the `−1/(2π)` limit.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PfnnError, Result};
use crate::geometry::{angle_diff, BoundaryGrid};
use crate::kernels::{dphi_dn_diag, KernelSpec};
use crate::source::SourcePotential;

/// States larger than this (sup norm) are treated as divergence.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// `K(x_i, y_j)` on a boundary grid, without the `Δθ` factor.
#[derive(Debug, Clone)]
pub struct BieKernel {
    spec: KernelSpec,
    grid: BoundaryGrid,
    // circulant: entry (i, j) depends on (j − i) mod N only
    first_row: Vec<f64>,
}

impl BieKernel {
    /// Arbitrary circulant kernel: entry `(i, j)` is `first_row[(j − i) mod N]`.
    pub fn from_first_row(spec: KernelSpec, grid: &BoundaryGrid, first_row: Vec<f64>) -> Result<Self> {
        if first_row.len() != grid.n_nodes() {
            return Err(PfnnError::GridMismatch(format!(
                "{} kernel entries for {} nodes",
                first_row.len(),
                grid.n_nodes()
            )));
        }
        if first_row.iter().any(|v| !v.is_finite()) {
            return Err(PfnnError::NonFinite("kernel entry".into()));
        }
        Ok(Self {
            spec,
            grid: grid.clone(),
            first_row,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.n_nodes();
        self.first_row[(j + n - i) % n]
    }

    /// Dense `N × N` matrix, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut m = Vec::with_capacity(n * n);
        for i in 0..n {
            m.extend((0..n).map(|j| self.entry(i, j)));
        }
        m
    }

    /// `K((1, θ), y_j)` for every node `y_j`; the diagonal limit is used where
    /// `θ` coincides with a node.
    pub fn row_at(&self, theta: f64) -> Vec<f64> {
        if let Some(i) = self.grid.node_index(theta) {
            return (0..self.n_nodes()).map(|j| self.entry(i, j)).collect();
        }
        self.grid
            .thetas()
            .iter()
            .map(|&t| -2.0 * self.spec.dphi_dn_polar(1.0, angle_diff(theta, t)))
            .collect()
    }
}

/// Kernel matrix of the boundary integral equation on `grid`.
pub fn bie_kernel_matrix(spec: &KernelSpec, grid: &BoundaryGrid) -> BieKernel {
    let thetas = grid.thetas();
    let first_row = (0..grid.n_nodes())
        .map(|m| {
            if m == 0 {
                -2.0 * dphi_dn_diag(spec)
            } else {
                -2.0 * spec.dphi_dn_polar(1.0, -thetas[m])
            }
        })
        .collect();
    BieKernel {
        spec: *spec,
        grid: grid.clone(),
        first_row,
    }
}

/// `g_i = 2(f(x_i) − ∫Ω Φ(x_i, y) ψ(y) dy)` at the boundary nodes.
///
/// Returns `(g, S)` where `S` holds the domain potentials at the nodes.
pub fn bie_inhomogeneity(
    boundary: &dyn Fn(f64) -> f64,
    source: &dyn SourcePotential,
    grid: &BoundaryGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = source.potential_on_boundary(grid)?;
    let g: Vec<f64> = grid
        .thetas()
        .iter()
        .zip(&s)
        .map(|(&t, &si)| 2.0 * (boundary(t) - si))
        .collect();
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(PfnnError::NonFinite(format!("inhomogeneity at node {i}")));
    }
    Ok((g, s))
}

/// Density values at the boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub values: Vec<f64>,
}

impl BoundaryDensity {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L²(∂Ω)` norm `(Σ β_j² Δθ)^½`.
    pub fn l2_norm(&self, d_theta: f64) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * d_theta).sqrt()
    }
}

/// Serialized weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FredholmWeights {
    pub kappa: f64,
    pub n_nodes: usize,
    pub n_layers: usize,
    /// Hidden-layer weight matrix, row-major.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub g: Vec<f64>,
}

/// Network whose hidden layers are KM iterations of the discretized BIE.
#[derive(Debug, Clone)]
pub struct FredholmNet {
    kappa: f64,
    n_layers: usize,
    kernel: Arc<BieKernel>,
    g: Vec<f64>,
    w_hidden: DMatrix<f64>,
    b_hidden: DVector<f64>,
}

/// Build the network for inhomogeneity `g` on the kernel's grid.
///
/// `n_layers` counts the first layer `β_1 = κg` and the `n_layers − 1`
/// hidden updates.
pub fn build_fredholm_net(
    g: Vec<f64>,
    kernel: Arc<BieKernel>,
    kappa: f64,
    n_layers: usize,
) -> Result<FredholmNet> {
    let n = kernel.n_nodes();
    if g.len() != n {
        return Err(PfnnError::GridMismatch(format!(
            "inhomogeneity has {} values for {n} nodes",
            g.len()
        )));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(PfnnError::InvalidArgument(format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    if n_layers == 0 {
        return Err(PfnnError::InvalidArgument("n_layers must be at least 1".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(PfnnError::NonFinite("inhomogeneity".into()));
    }
    let dt = kernel.grid().d_theta();
    let w_hidden = DMatrix::from_fn(n, n, |i, j| {
        let k = kappa * kernel.entry(i, j) * dt;
        if i == j {
            k + 1.0 - kappa
        } else {
            k
        }
    });
    let b_hidden = DVector::from_iterator(n, g.iter().map(|v| kappa * v));
    Ok(FredholmNet {
        kappa,
        n_layers,
        kernel,
        g,
        w_hidden,
        b_hidden,
    })
}

impl FredholmNet {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_nodes(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn kernel(&self) -> &Arc<BieKernel> {
        &self.kernel
    }

    pub fn w_hidden(&self) -> &DMatrix<f64> {
        &self.w_hidden
    }

    pub fn b_hidden(&self) -> &DVector<f64> {
        &self.b_hidden
    }

    /// `β_M`: the output of the last hidden layer.
    pub fn forward(&self) -> Result<BoundaryDensity> {
        self.forward_with(|_, _| {})
    }

    /// Forward pass calling `observe(layer, state)` after every layer
    /// (`layer` is 1-based).
    pub fn forward_with(&self, mut observe: impl FnMut(usize, &[f64])) -> Result<BoundaryDensity> {
        let mut state = self.b_hidden.clone();
        observe(1, state.as_slice());
        let mut next = DVector::zeros(state.len());
        for layer in 2..=self.n_layers {
            next.copy_from(&self.b_hidden);
            next.gemv(1.0, &self.w_hidden, &state, 1.0);
            std::mem::swap(&mut state, &mut next);
            let sup = state.amax();
            if !sup.is_finite() || sup > DIVERGENCE_GUARD {
                return Err(PfnnError::Divergence {
                    iterations: layer,
                    detail: format!("density sup norm {sup:e}"),
                });
            }
            observe(layer, state.as_slice());
        }
        Ok(BoundaryDensity {
            values: state.as_slice().to_vec(),
        })
    }

    /// `‖β − (g + K̃β)‖∞`.
    pub fn residual(&self, beta: &BoundaryDensity) -> Result<f64> {
        let r = self.residual_vector(&beta.values)?;
        Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    fn residual_vector(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_nodes();
        if beta.len() != n {
            return Err(PfnnError::GridMismatch("density length".into()));
        }
        let dt = self.kernel.grid().d_theta();
        Ok((0..n)
            .map(|i| {
                let kb: f64 = (0..n).map(|j| self.kernel.entry(i, j) * beta[j]).sum();
                beta[i] - self.g[i] - kb * dt
            })
            .collect())
    }

    /// Density at an arbitrary boundary angle: the node value on a node,
    /// otherwise the Nyström interpolant `g(θ) + Σ K(θ, y_j) β_j Δθ`.
    pub fn evaluate_density(&self, beta: &BoundaryDensity, theta: f64, g_theta: f64) -> f64 {
        if let Some(i) = self.kernel.grid().node_index(theta) {
            return beta.values[i];
        }
        let dt = self.kernel.grid().d_theta();
        let row = self.kernel.row_at(theta);
        g_theta + row.iter().zip(&beta.values).map(|(k, b)| k * b).sum::<f64>() * dt
    }

    /// `I − K̃` as a dense matrix.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let dt = self.kernel.grid().d_theta();
        DMatrix::from_fn(n, n, |i, j| {
            let k = -self.kernel.entry(i, j) * dt;
            if i == j {
                1.0 + k
            } else {
                k
            }
        })
    }

    /// Direct LU solution of `(I − K̃)β = g`.
    pub fn dense_solve(&self) -> Result<BoundaryDensity> {
        let lu = self.system_matrix().lu();
        let b = DVector::from_column_slice(&self.g);
        let x = lu
            .solve(&b)
            .ok_or_else(|| PfnnError::LinearAlgebra("I − K̃ is singular".into()))?;
        Ok(BoundaryDensity {
            values: x.as_slice().to_vec(),
        })
    }

    /// `‖(I − K̃)⁻¹‖∞`.
    pub fn inverse_norm_inf(&self) -> Result<f64> {
        let inv = self
            .system_matrix()
            .try_inverse()
            .ok_or_else(|| PfnnError::LinearAlgebra("I − K̃ is singular".into()))?;
        Ok(inv
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }

    /// `‖W‖∞` of the hidden-layer matrix.
    pub fn hidden_norm_inf(&self) -> f64 {
        self.w_hidden
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn weights(&self) -> FredholmWeights {
        FredholmWeights {
            kappa: self.kappa,
            n_nodes: self.n_nodes(),
            n_layers: self.n_layers,
            w_hidden: self.w_hidden.transpose().as_slice().to_vec(),
            b_hidden: self.b_hidden.as_slice().to_vec(),
            g: self.g.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.weights())
            .map_err(|e| PfnnError::InvalidArgument(format!("weight serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplace_kernel_is_constant() {
        let grid = BoundaryGrid::new(16).unwrap();
        let k = bie_kernel_matrix(&KernelSpec::laplace(), &grid);
        for v in k.matrix() {
            assert_eq!(v, -1.0 / (2.0 * PI));
        }
    }

    #[test]
    fn row_at_matches_matrix_on_nodes() {
        let grid = BoundaryGrid::new(12).unwrap();
        let spec = KernelSpec::modified_helmholtz(1.0).unwrap();
        let k = bie_kernel_matrix(&spec, &grid);
        let row = k.row_at(grid.thetas()[5]);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, k.entry(5, j));
        }
        let off = k.row_at(grid.thetas()[5] + 1e-9);
        assert!((off[0] - k.entry(5, 0)).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_kappa() {
        let grid = BoundaryGrid::new(4).unwrap();
        let k = Arc::new(bie_kernel_matrix(&KernelSpec::laplace(), &grid));
        assert!(build_fredholm_net(vec![0.0; 4], k.clone(), 0.0, 3).is_err());
        assert!(build_fredholm_net(vec![0.0; 4], k.clone(), 1.5, 3).is_err());
        assert!(build_fredholm_net(vec![0.0; 3], k, 0.5, 3).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let grid = BoundaryGrid::new(5).unwrap();
        let k = Arc::new(bie_kernel_matrix(&KernelSpec::laplace(), &grid));
        let net = build_fredholm_net(vec![1.0; 5], k, 0.5, 4).unwrap();
        let w: FredholmWeights = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        assert_eq!(w.w_hidden.len(), 25);
        assert_eq!(w.w_hidden[1], net.w_hidden()[(0, 1)]);
        assert_eq!(w.b_hidden, vec![0.5; 5]);
    }
}
