//! Solver and diagnostics suite for 2D chemotactic aggregation in a linear
//! strain flow.
//!
//! The crate simulates a parabolic–elliptic aggregation–diffusion equation
//! for a bacterial density n(x, t) on a truncated plane: cells diffuse,
//! drift up the gradient of a self-generated log-kernel potential, and are
//! transported by an incompressible strain field b = A(−x₁, x₂). Modules:
//!
//! - [`grid`]: cell-centered fields, quadrature, half-plane statistics
//! - [`kernel`]: regularized log kernel and free-space FFT convolution
//! - [`dynamics`]: Strang-split stepper (spectral diffusion + upwind
//!   transport) with blow-up detection
//! - [`diagnostics`]: entropy, free energy, dissipation, virial residuals,
//!   and the inequality monitors
//! - [`experiments`]: scenario presets, hypothesis validation, run driver,
//!   and parameter sweeps

pub mod diagnostics;
pub mod dynamics;
pub mod error;
mod fft;
pub mod grid;
pub mod kernel;
pub mod experiments;

pub use error::{PksError, Result};
pub use grid::{DensityField, Grid2D, HalfPlaneStats, MomentWeight, VectorField2D};
pub use kernel::{
    build_kernel, convolve, verify_kernel_bounds, BridgeKind, ChemoSolution, GradMode,
    KernelBoundsReport, KernelTable,
};
