//! Regularized logarithmic interaction kernel and the free-space FFT
//! convolution producing the chemoattractant potential c = K^ε ∗ n and its
//! gradient.
//!
//! The convolution is computed on a zero-padded, domain-doubled grid so the
//! far field stays the free-space log potential instead of a periodic image
//! sum. Kernel spectra are tabulated once per run.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{PksError, Result};
use crate::fft::Fft2;
use crate::grid::{DensityField, Grid2D, VectorField2D};

const INV_2PI: f64 = 1.0 / (2.0 * PI);

/// Profile of the regularized kernel in the transition region ε ≤ |z| ≤ 4ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeKind {
    /// Capped logarithm: K^ε(z) = −(1/2π) log max(|z|, ε).
    ///
    /// Continuous with a kink at |z| = ε. Satisfies |∇K^ε| ≤ 1/(2π|z|) with
    /// equality outside the core, and K^ε ≤ −(1/2π) log|z| everywhere.
    LogCap,
    /// C² radial quintic Hermite blend between the flat core and the log
    /// tail, matching value, first, and second derivative at |z| = ε and 4ε.
    ///
    /// No smooth blend between those two exact branches can satisfy the
    /// 1/(2π|z|) gradient bound: the potential drop across the transition
    /// annulus equals the integral of the bound exactly, so a profile that
    /// starts flat must exceed the bound somewhere inside. Kept for
    /// smoothness cross-checks; `LogCap` is the default.
    QuinticHermite,
}

impl Default for BridgeKind {
    fn default() -> Self {
        BridgeKind::LogCap
    }
}

impl BridgeKind {
    pub fn name(&self) -> &'static str {
        match self {
            BridgeKind::LogCap => "log_cap",
            BridgeKind::QuinticHermite => "quintic_hermite",
        }
    }
}

/// Quintic coefficients for K¹ on 1 ≤ s ≤ 4 in the variable t = (s−1)/3,
/// q(t) = a t³ + b t⁴ + c t⁵ (value and first two derivatives vanish at
/// s = 1 by construction).
fn quintic_coefficients() -> (f64, f64, f64) {
    let v = -(4.0f64.ln()) * INV_2PI;
    let d1 = -3.0 / (8.0 * PI);
    let d2 = 9.0 / (32.0 * PI);
    let c = 0.5 * d2 + 6.0 * v - 3.0 * d1;
    let b = 7.0 * d1 - 15.0 * v - d2;
    let a = 10.0 * v - 4.0 * d1 + 0.5 * d2;
    (a, b, c)
}

fn profile_value(bridge: BridgeKind, epsilon: f64, r: f64) -> f64 {
    match bridge {
        BridgeKind::LogCap => -INV_2PI * r.max(epsilon).ln(),
        BridgeKind::QuinticHermite => {
            let s = r / epsilon;
            if s <= 1.0 {
                -INV_2PI * epsilon.ln()
            } else if s >= 4.0 {
                -INV_2PI * r.ln()
            } else {
                let (a, b, c) = quintic_coefficients();
                let t = (s - 1.0) / 3.0;
                let q = ((c * t + b) * t + a) * t * t * t;
                q - INV_2PI * epsilon.ln()
            }
        }
    }
}

/// Signed radial derivative dK^ε/dr (non-positive).
fn profile_slope(bridge: BridgeKind, epsilon: f64, r: f64) -> f64 {
    match bridge {
        BridgeKind::LogCap => {
            if r < epsilon {
                0.0
            } else {
                -INV_2PI / r
            }
        }
        BridgeKind::QuinticHermite => {
            let s = r / epsilon;
            if s <= 1.0 {
                0.0
            } else if s >= 4.0 {
                -INV_2PI / r
            } else {
                let (a, b, c) = quintic_coefficients();
                let t = (s - 1.0) / 3.0;
                let dq = ((5.0 * c * t + 4.0 * b) * t + 3.0 * a) * t * t;
                dq / (3.0 * epsilon)
            }
        }
    }
}

/// How ∇c is produced by [`convolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// Direct convolution with the tabulated ∇K^ε (default; avoids
    /// compounding differentiation error near the regularization core).
    Convolution,
    /// Central differences of the convolved potential, retained for
    /// cross-validation.
    CentralDifference,
}

impl Default for GradMode {
    fn default() -> Self {
        GradMode::Convolution
    }
}

impl GradMode {
    pub fn name(&self) -> &'static str {
        match self {
            GradMode::Convolution => "convolution",
            GradMode::CentralDifference => "central_difference",
        }
    }
}

/// Tabulated spectra of K^ε and ∇K^ε on the doubled grid.
pub struct KernelTable {
    grid: Grid2D,
    epsilon: f64,
    bridge: BridgeKind,
    padded: usize,
    pub(crate) fft: Fft2,
    /// Real spectrum of the (even) kernel samples.
    pub(crate) value_hat: Vec<f64>,
    /// Spectrum of gx + i·gy, so one inverse transform yields both gradient
    /// components.
    pub(crate) grad_hat: Vec<Complex64>,
    max_grad: f64,
}

impl KernelTable {
    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn bridge(&self) -> BridgeKind {
        self.bridge
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn padded_size(&self) -> usize {
        self.padded
    }

    /// Largest sampled |∇K^ε| (the measured C_ε).
    #[inline]
    pub fn max_grad(&self) -> f64 {
        self.max_grad
    }

    /// Radial kernel value at distance r.
    pub fn value_at(&self, r: f64) -> f64 {
        profile_value(self.bridge, self.epsilon, r)
    }

    /// |∇K^ε| at distance r.
    pub fn grad_magnitude_at(&self, r: f64) -> f64 {
        profile_slope(self.bridge, self.epsilon, r).abs()
    }
}

/// Signed offset of padded index p on the doubled, wrapped grid.
#[inline]
pub(crate) fn wrapped_offset(p: usize, n: usize) -> i64 {
    if p <= n {
        p as i64
    } else {
        p as i64 - 2 * n as i64
    }
}

/// Build the kernel table for a grid. Requires h ≤ ε < L/4.
pub fn build_kernel(epsilon: f64, grid: Grid2D, bridge: BridgeKind) -> Result<KernelTable> {
    let h = grid.spacing();
    if epsilon < h {
        return Err(PksError::KernelUnderResolved {
            epsilon,
            spacing: h,
        });
    }
    if epsilon >= grid.half_width() / 4.0 {
        return Err(PksError::KernelTooWide {
            epsilon,
            half_width: grid.half_width(),
        });
    }
    let n = grid.cells_per_side();
    let p = 2 * n;
    let fft = Fft2::new(p);

    let mut value = vec![Complex64::default(); p * p];
    let mut gx = vec![Complex64::default(); p * p];
    let mut gy = vec![Complex64::default(); p * p];
    let mut max_grad = 0.0f64;
    for q in 0..p {
        let dy = wrapped_offset(q, n) as f64 * h;
        for pi in 0..p {
            let dx = wrapped_offset(pi, n) as f64 * h;
            let r = (dx * dx + dy * dy).sqrt();
            let k = q * p + pi;
            value[k] = Complex64::new(profile_value(bridge, epsilon, r), 0.0);
            if r > 0.0 {
                let slope = profile_slope(bridge, epsilon, r);
                // The Nyquist offsets (index n) are never touched by the
                // zero-padded convolution; zeroing them keeps the sampled
                // gradient exactly odd.
                gx[k] = Complex64::new(
                    if pi == n { 0.0 } else { slope * dx / r },
                    0.0,
                );
                gy[k] = Complex64::new(
                    if q == n { 0.0 } else { slope * dy / r },
                    0.0,
                );
                max_grad = max_grad.max(slope.abs());
            }
        }
    }

    fft.forward(&mut value);
    fft.forward(&mut gx);
    fft.forward(&mut gy);

    // Even kernel -> real spectrum; odd gradients -> imaginary spectra.
    // Dropping the rounding-level off-structure parts keeps mirrored inputs
    // mirrored to machine precision.
    let value_hat: Vec<f64> = value.iter().map(|v| v.re).collect();
    let grad_hat: Vec<Complex64> = gx
        .iter()
        .zip(gy.iter())
        .map(|(x, y)| Complex64::new(-y.im, x.im))
        .collect();

    Ok(KernelTable {
        grid,
        epsilon,
        bridge,
        padded: p,
        fft,
        value_hat,
        grad_hat,
        max_grad,
    })
}

/// Copy an N×N field into the zero-padded 2N×2N complex buffer.
pub(crate) fn pad_field(values: &[f64], n: usize, buf: &mut [Complex64]) {
    let p = 2 * n;
    debug_assert_eq!(buf.len(), p * p);
    buf.fill(Complex64::default());
    for j in 0..n {
        let src = &values[j * n..(j + 1) * n];
        let dst = &mut buf[j * p..j * p + n];
        for (d, &s) in dst.iter_mut().zip(src.iter()) {
            *d = Complex64::new(s, 0.0);
        }
    }
}

/// The chemoattractant potential and its gradient on the physical grid.
pub struct ChemoSolution {
    grid: Grid2D,
    pub c: Vec<f64>,
    pub grad: VectorField2D,
    pub mode: GradMode,
}

impl ChemoSolution {
    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }
}

/// c = h² Σ K^ε(x−y) n(y) by zero-padded FFT on the doubled grid, with ∇c
/// per the requested mode.
pub fn convolve(n: &DensityField, table: &KernelTable, mode: GradMode) -> ChemoSolution {
    let grid = n.grid();
    assert_eq!(grid, table.grid, "kernel table built for a different grid");
    let nn = grid.cells_per_side();
    let p = table.padded;
    let h2 = grid.cell_area();

    let mut hat = vec![Complex64::default(); p * p];
    pad_field(n.values(), nn, &mut hat);
    table.fft.forward(&mut hat);

    let mut work: Vec<Complex64> = hat
        .iter()
        .zip(table.value_hat.iter())
        .map(|(a, &k)| a * (k * h2))
        .collect();
    table.fft.inverse(&mut work);
    let mut c = vec![0.0; nn * nn];
    for j in 0..nn {
        for i in 0..nn {
            c[j * nn + i] = work[j * p + i].re;
        }
    }

    let mut grad = VectorField2D::zeros(grid);
    match mode {
        GradMode::Convolution => {
            for (w, (a, g)) in work
                .iter_mut()
                .zip(hat.iter().zip(table.grad_hat.iter()))
            {
                *w = a * g * h2;
            }
            table.fft.inverse(&mut work);
            for j in 0..nn {
                for i in 0..nn {
                    let v = work[j * p + i];
                    grad.x1[j * nn + i] = v.re;
                    grad.x2[j * nn + i] = v.im;
                }
            }
        }
        GradMode::CentralDifference => {
            central_gradient(&c, grid, &mut grad);
        }
    }

    ChemoSolution {
        grid,
        c,
        grad,
        mode,
    }
}

/// Central differences of a scalar field, one-sided on the box edge.
pub fn central_gradient(c: &[f64], grid: Grid2D, out: &mut VectorField2D) {
    let (gx, gy) = out.components_mut();
    central_gradient_into(c, grid, gx, gy);
}

pub(crate) fn central_gradient_into(c: &[f64], grid: Grid2D, gx: &mut [f64], gy: &mut [f64]) {
    let n = grid.cells_per_side();
    let inv2h = 1.0 / (2.0 * grid.spacing());
    let invh = 1.0 / grid.spacing();
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            gx[k] = if i == 0 {
                (c[k + 1] - c[k]) * invh
            } else if i == n - 1 {
                (c[k] - c[k - 1]) * invh
            } else {
                (c[k + 1] - c[k - 1]) * inv2h
            };
            gy[k] = if j == 0 {
                (c[k + n] - c[k]) * invh
            } else if j == n - 1 {
                (c[k] - c[k - n]) * invh
            } else {
                (c[k + n] - c[k - n]) * inv2h
            };
        }
    }
}

/// Outcome of sampling the kernel bounds on a geometric radial grid.
#[derive(Debug, Clone)]
pub struct KernelBoundsReport {
    pub samples: usize,
    /// Worst value of 1/(2π r) − |∇K^ε(r)| and the radius attaining it.
    pub grad_slack: (f64, f64),
    /// Worst value of −(1/2π) log r − K^ε(r) and the radius attaining it.
    pub value_slack: (f64, f64),
    /// Measured C_ε = max |∇K^ε|.
    pub max_grad: f64,
}

/// Evaluate |∇K^ε(z)| ≤ 1/(2π|z|) and K^ε(z) ≤ −(1/2π) log|z| on a
/// geometric radial sample covering [ε/4, 8ε]. Fails if either inequality is
/// violated by more than 1e−12.
pub fn verify_kernel_bounds(table: &KernelTable, samples: usize) -> Result<KernelBoundsReport> {
    if samples < 1_000 {
        return Err(PksError::InvalidConfig(format!(
            "kernel bound verification needs at least 1000 samples, got {samples}"
        )));
    }
    let eps = table.epsilon;
    let lo = eps / 4.0;
    let ratio = 32.0f64.powf(1.0 / (samples as f64 - 1.0));
    let mut grad_worst = (f64::INFINITY, lo);
    let mut value_worst = (f64::INFINITY, lo);
    let mut r = lo;
    for _ in 0..samples {
        let gslack = INV_2PI / r - table.grad_magnitude_at(r);
        if gslack < grad_worst.0 {
            grad_worst = (gslack, r);
        }
        let vslack = -INV_2PI * r.ln() - table.value_at(r);
        if vslack < value_worst.0 {
            value_worst = (vslack, r);
        }
        r *= ratio;
    }
    const TOL: f64 = 1e-12;
    if grad_worst.0 < -TOL {
        return Err(PksError::KernelBoundViolated {
            bound: "|grad K| <= 1/(2 pi |z|)",
            radius: grad_worst.1,
            slack: grad_worst.0,
        });
    }
    if value_worst.0 < -TOL {
        return Err(PksError::KernelBoundViolated {
            bound: "K <= -(1/2 pi) log|z|",
            radius: value_worst.1,
            slack: value_worst.0,
        });
    }
    Ok(KernelBoundsReport {
        samples,
        grad_slack: grad_worst,
        value_slack: value_worst,
        max_grad: table.max_grad,
    })
}
