//! Potential Fredholm neural networks on the unit disc.
//!
//! Deep networks with closed-form weights that replay Krasnoselskii–Mann
//! iterations of a boundary integral equation, followed by a potential layer
//! that evaluates the double-layer representation of the solution. Covers the
//! Poisson and modified-Helmholtz problems, semi-linear problems through an
//! outer fixed-point loop, and an inverse source problem.

pub mod cli;
pub mod error;
pub mod error_analysis;
pub mod fredholm_net;
pub mod geometry;
pub mod inverse;
pub mod kernels;
pub mod pfnn;
pub mod problems;
pub mod quadrature;
pub mod recurrent;
pub mod reporting;
pub mod source;
pub mod special_functions;

pub use error::{PfnnError, Result};
pub use geometry::{BoundaryGrid, DiscGrid, PolarPoint};
pub use kernels::{KernelFamily, KernelSpec};
pub use quadrature::{QuadratureMode, QuadratureSpec};
