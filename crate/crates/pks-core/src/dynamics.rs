//! Time integration of the regularized aggregation–diffusion equation
//!
//! ∂n/∂t + ∇·(n ∇c) + b·∇n = Δn, with c = K^ε ∗ n and b = A(−x₁, x₂),
//!
//! by Strang splitting: a half step of diffusion (exact in Fourier on the
//! doubled zero-padded grid), one conservative upwind finite-volume
//! transport step for the combined drift u = ∇c + b, then the second half
//! step of diffusion. The split preserves the three properties every
//! diagnostic depends on: nonnegativity, exact interior-flux conservation,
//! and mirror symmetry.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{PksError, Result};
use crate::grid::{neumaier_sum, DensityField, Grid2D};
use crate::kernel::{central_gradient_into, pad_field, wrapped_offset, GradMode, KernelTable};

/// Incompressible linear strain flow b(x) = A(−x₁, x₂), the gradient of the
/// harmonic potential H(x) = (A/2)(x₂² − x₁²).
#[derive(Debug, Clone, Copy)]
pub struct StrainField {
    amplitude: f64,
}

impl StrainField {
    pub fn new(amplitude: f64) -> Self {
        assert!(
            amplitude >= 0.0 && amplitude.is_finite(),
            "strain amplitude must be finite and nonnegative"
        );
        Self { amplitude }
    }

    #[inline]
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// b(x) = A(−x₁, x₂).
    #[inline]
    pub fn velocity(&self, x1: f64, x2: f64) -> (f64, f64) {
        (-self.amplitude * x1, self.amplitude * x2)
    }

    /// H(x) = (A/2)(x₂² − x₁²), the potential entering the free energy.
    #[inline]
    pub fn potential(&self, x1: f64, x2: f64) -> f64 {
        0.5 * self.amplitude * (x2 * x2 - x1 * x1)
    }

    /// Exact flow map of ẋ = b(x).
    #[inline]
    pub fn flow_map(&self, x1: f64, x2: f64, t: f64) -> (f64, f64) {
        (
            x1 * (-self.amplitude * t).exp(),
            x2 * (self.amplitude * t).exp(),
        )
    }
}

/// Strain amplitude A = M₊/δ² sufficient to hold the near-axis strip mass
/// below its bound.
pub fn select_amplitude(upper_mass: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(PksError::InvalidConfig(format!(
            "strip half-width delta must be positive, got {delta}"
        )));
    }
    Ok(upper_mass / (delta * delta))
}

/// Transport discretization for the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportScheme {
    /// First-order donor-cell upwind fluxes.
    Upwind1,
    /// Second-order MUSCL reconstruction with the monotonized-central
    /// limiter; still conservative and positivity-preserving, at half the
    /// CFL headroom.
    Muscl,
}

impl TransportScheme {
    pub fn name(&self) -> &'static str {
        match self {
            TransportScheme::Upwind1 => "upwind1",
            TransportScheme::Muscl => "muscl",
        }
    }

    /// Largest admissible per-cell outflow coefficient.
    #[inline]
    fn coef_limit(&self) -> f64 {
        match self {
            TransportScheme::Upwind1 => 1.0,
            TransportScheme::Muscl => 0.5,
        }
    }
}

/// Verdict of the blow-up proxy detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Healthy,
    Suspected,
    BlownUp,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Healthy => "healthy",
            Verdict::Suspected => "suspected",
            Verdict::BlownUp => "blown_up",
        }
    }
}

/// Thresholds for [`detect_blowup`].
#[derive(Debug, Clone, Copy)]
pub struct BlowupThresholds {
    /// Peak growth factor max n / max n₀ that alone declares blow-up.
    pub ratio: f64,
    /// Mass fraction in a 3×3 cell block for the under-resolution clause.
    pub support_fraction: f64,
    /// Peak growth factor gating the under-resolution clause.
    pub support_ratio: f64,
    /// Number of trailing records of decreasing second moment that raises
    /// `Suspected` on a supercritical run.
    pub trend_window: usize,
}

impl Default for BlowupThresholds {
    fn default() -> Self {
        Self {
            ratio: 1e3,
            support_fraction: 0.25,
            support_ratio: 1e2,
            trend_window: 5,
        }
    }
}

/// Classify the current state. `recent_second_moments` are the latest
/// emitted values of V(t), oldest first; `supercritical` flags M > 8π.
pub fn detect_blowup(
    n: &DensityField,
    max_n0: f64,
    recent_second_moments: &[f64],
    supercritical: bool,
    cfg: &BlowupThresholds,
) -> Verdict {
    let peak = n.max_value();
    if max_n0 > 0.0 && peak >= cfg.ratio * max_n0 {
        return Verdict::BlownUp;
    }
    if max_n0 > 0.0 && peak >= cfg.support_ratio * max_n0 {
        let mass = n.integrate();
        if mass > 0.0 && n.max_block3_mass() >= cfg.support_fraction * mass {
            return Verdict::BlownUp;
        }
    }
    if supercritical && recent_second_moments.len() >= cfg.trend_window {
        let tail = &recent_second_moments[recent_second_moments.len() - cfg.trend_window..];
        if tail.windows(2).all(|w| w[1] < w[0]) {
            return Verdict::Suspected;
        }
    }
    Verdict::Healthy
}

/// Stepper configuration.
#[derive(Debug, Clone, Copy)]
pub struct StepperOptions {
    pub cfl: f64,
    pub transport: TransportScheme,
    /// How the drift gradient ∇c is produced.
    pub grad_mode: GradMode,
    pub diffusion: bool,
    pub chemotaxis: bool,
    /// Upper bound on any single time step (typically the output interval).
    pub dt_cap: f64,
    /// Track the mirror-symmetry error after every accepted step.
    pub track_symmetry: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            transport: TransportScheme::Muscl,
            grad_mode: GradMode::Convolution,
            diffusion: true,
            chemotaxis: true,
            dt_cap: 0.05,
            track_symmetry: true,
        }
    }
}

/// Evolving state plus the conservation ledgers.
#[derive(Debug, Clone)]
pub struct StepperState {
    pub n: DensityField,
    pub t: f64,
    /// Last accepted time step.
    pub dt: f64,
    pub step_count: u64,
    /// Cumulative mass metered out through the box boundary (transport
    /// outflow plus diffusion leak into the padding region).
    pub boundary_outflow: f64,
    /// Cumulative mass added by clamping rounding-level negatives to zero.
    pub clamped_mass: f64,
    /// Worst per-step interior conservation residual |ΔM + outflow|.
    pub max_interior_drift: f64,
    /// Most negative value (relative to max n) seen before clamping.
    pub max_negative_excursion: f64,
    /// Worst mirror-symmetry error seen after any accepted step.
    pub max_symmetry_error: f64,
    pub cfl_halvings: u32,
}

impl StepperState {
    pub fn new(n: DensityField) -> Self {
        Self {
            n,
            t: 0.0,
            dt: 0.0,
            step_count: 0,
            boundary_outflow: 0.0,
            clamped_mass: 0.0,
            max_interior_drift: 0.0,
            max_negative_excursion: 0.0,
            max_symmetry_error: 0.0,
            cfl_halvings: 0,
        }
    }
}

/// Owns the strain field, stepping options, and all work buffers; borrows
/// the kernel table, which is immutable and shareable.
pub struct Stepper<'a> {
    table: &'a KernelTable,
    strain: StrainField,
    opts: StepperOptions,
    grid: Grid2D,
    hat: Vec<Complex64>,
    work: Vec<Complex64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    ufx: Vec<f64>,
    ufy: Vec<f64>,
    div: Vec<f64>,
    backup: Vec<f64>,
    diff_1d: Vec<f64>,
    diff_tau: f64,
    drift_bound: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(table: &'a KernelTable, strain: StrainField, opts: StepperOptions) -> Self {
        let grid = table.grid();
        let n = grid.cells_per_side();
        let p = table.padded_size();
        Self {
            table,
            strain,
            opts,
            grid,
            hat: vec![Complex64::default(); p * p],
            work: vec![Complex64::default(); p * p],
            grad_x: vec![0.0; n * n],
            grad_y: vec![0.0; n * n],
            ufx: vec![0.0; (n + 1) * n],
            ufy: vec![0.0; n * (n + 1)],
            div: vec![0.0; n * n],
            backup: vec![0.0; n * n],
            diff_1d: Vec::new(),
            diff_tau: f64::NAN,
            drift_bound: 0.0,
        }
    }

    #[inline]
    pub fn options(&self) -> &StepperOptions {
        &self.opts
    }

    #[inline]
    pub fn strain(&self) -> StrainField {
        self.strain
    }

    /// Seed the drift-magnitude estimate from the initial state. Must be
    /// called once before stepping.
    pub fn prime(&mut self, state: &StepperState) {
        if self.opts.chemotaxis {
            pad_field(state.n.values(), self.grid.cells_per_side(), &mut self.hat);
            self.table.fft.forward(&mut self.hat);
            self.extract_gradients();
        } else {
            self.grad_x.fill(0.0);
            self.grad_y.fill(0.0);
        }
        self.update_drift_bound();
    }

    fn update_drift_bound(&mut self) {
        let n = self.grid.cells_per_side();
        let a = self.strain.amplitude();
        let mut worst = 0.0f64;
        for j in 0..n {
            let x2 = self.grid.x2(j);
            for i in 0..n {
                let x1 = self.grid.x1(i);
                let k = j * n + i;
                let u = (self.grad_x[k] - a * x1).abs() + (self.grad_y[k] + a * x2).abs();
                if u > worst {
                    worst = u;
                }
            }
        }
        self.drift_bound = worst;
    }

    /// Fill grad_x/grad_y from the spectrum currently held in `hat`, either
    /// by direct convolution with the tabulated gradient kernel or by
    /// central-differencing the convolved potential.
    fn extract_gradients(&mut self) {
        let n = self.grid.cells_per_side();
        let p = self.table.padded_size();
        let h2 = self.grid.cell_area();
        match self.opts.grad_mode {
            GradMode::Convolution => {
                for (w, (a, g)) in self
                    .work
                    .iter_mut()
                    .zip(self.hat.iter().zip(self.table.grad_hat.iter()))
                {
                    *w = a * g * h2;
                }
                self.table.fft.inverse(&mut self.work);
                for j in 0..n {
                    for i in 0..n {
                        let v = self.work[j * p + i];
                        self.grad_x[j * n + i] = v.re;
                        self.grad_y[j * n + i] = v.im;
                    }
                }
            }
            GradMode::CentralDifference => {
                for (w, (a, &k)) in self
                    .work
                    .iter_mut()
                    .zip(self.hat.iter().zip(self.table.value_hat.iter()))
                {
                    *w = a * (k * h2);
                }
                self.table.fft.inverse(&mut self.work);
                let mut c = vec![0.0; n * n];
                for j in 0..n {
                    for i in 0..n {
                        c[j * n + i] = self.work[j * p + i].re;
                    }
                }
                central_gradient_into(&c, self.grid, &mut self.grad_x, &mut self.grad_y);
            }
        }
    }

    fn diffusion_multiplier(&mut self, tau: f64) {
        if self.diff_tau == tau && !self.diff_1d.is_empty() {
            return;
        }
        let n = self.grid.cells_per_side();
        let p = self.table.padded_size();
        let dk = PI / (2.0 * self.grid.half_width());
        self.diff_1d = (0..p)
            .map(|q| {
                let k = wrapped_offset(q, n) as f64 * dk;
                (-k * k * tau).exp()
            })
            .collect();
        self.diff_tau = tau;
    }

    /// Multiply the spectrum in `hat` by the separable heat multiplier.
    fn apply_diffusion_spectrum(&mut self, tau: f64) {
        self.diffusion_multiplier(tau);
        let p = self.table.padded_size();
        for q in 0..p {
            let fq = self.diff_1d[q];
            let row = &mut self.hat[q * p..(q + 1) * p];
            for (v, &fx) in row.iter_mut().zip(self.diff_1d.iter()) {
                *v *= fx * fq;
            }
        }
    }

    /// Inverse-transform `hat` and write the physical block back into the
    /// state, metering the padding leak. The spectral step can ring a few
    /// far-tail cells slightly negative; those are clipped and the clipped
    /// mass restored by a proportional rescale (relative size ~1e−12 per
    /// step, metered), so the state stays nonnegative and ΔM still equals
    /// the metered outflow exactly.
    fn extract_density(&mut self, state: &mut StepperState) {
        let n = self.grid.cells_per_side();
        let p = self.table.padded_size();
        let h2 = self.grid.cell_area();
        self.work.copy_from_slice(&self.hat);
        self.table.fft.inverse(&mut self.work);
        // DC coefficient carries the total padded-grid mass exactly.
        let total = self.hat[0].re * h2;
        let peak_before = state.n.max_value();
        let mut block_sum = 0.0;
        let mut block_comp = 0.0;
        let mut clamped = 0.0;
        let mut worst_neg = 0.0f64;
        let values = state.n.values_mut();
        for j in 0..n {
            for i in 0..n {
                let mut v = self.work[j * p + i].re;
                let t = block_sum + v;
                block_comp += if block_sum.abs() >= v.abs() {
                    (block_sum - t) + v
                } else {
                    (v - t) + block_sum
                };
                block_sum = t;
                if v < 0.0 {
                    worst_neg = worst_neg.max(-v);
                    clamped -= v;
                    v = 0.0;
                }
                values[j * n + i] = v;
            }
        }
        let block_sum = block_sum + block_comp;
        state.boundary_outflow += total - block_sum * h2;
        if clamped > 0.0 && block_sum > 0.0 {
            let scale = block_sum / (block_sum + clamped);
            for v in values.iter_mut() {
                *v *= scale;
            }
            state.clamped_mass += clamped * h2;
        }
        if peak_before > 0.0 {
            state.max_negative_excursion =
                state.max_negative_excursion.max(worst_neg / peak_before);
        }
    }

    /// One Strang step, no longer than `dt_limit`. On a CFL breach the step
    /// is rolled back and retried with half the step until the positivity
    /// coefficient fits.
    pub fn step(&mut self, state: &mut StepperState, dt_limit: f64) -> Result<()> {
        let h = self.grid.spacing();
        let mut dt = if self.drift_bound > 0.0 {
            self.opts.cfl * h / self.drift_bound
        } else {
            f64::INFINITY
        };
        dt = dt.min(self.opts.dt_cap).min(dt_limit);
        if !(dt > 0.0) {
            return Err(PksError::InvalidConfig(format!(
                "non-positive time step requested (dt_limit {dt_limit})"
            )));
        }

        self.backup.copy_from_slice(state.n.values());
        let outflow0 = state.boundary_outflow;
        let clamped0 = state.clamped_mass;
        let mut halvings = 0u32;
        loop {
            match self.attempt(state, dt) {
                Ok(()) => break,
                Err(PksError::TimeStepUnderflow { .. }) => {
                    // positivity coefficient too large: roll back and halve
                    state.n.values_mut().copy_from_slice(&self.backup);
                    state.boundary_outflow = outflow0;
                    state.clamped_mass = clamped0;
                    dt *= 0.5;
                    halvings += 1;
                    state.cfl_halvings += 1;
                    log::debug!(
                        "step {}: CFL breach, halving dt to {dt:e}",
                        state.step_count
                    );
                    if halvings > 60 {
                        return Err(PksError::TimeStepUnderflow {
                            step: state.step_count,
                            halvings,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        state.t += dt;
        state.dt = dt;
        state.step_count += 1;
        if self.opts.track_symmetry {
            state.max_symmetry_error = state
                .max_symmetry_error
                .max(state.n.mirror_symmetry_error());
        }
        Ok(())
    }

    fn attempt(&mut self, state: &mut StepperState, dt: f64) -> Result<()> {
        let n = self.grid.cells_per_side();
        let needs_spectrum = self.opts.diffusion || self.opts.chemotaxis;

        if needs_spectrum {
            pad_field(state.n.values(), n, &mut self.hat);
            self.table.fft.forward(&mut self.hat);
            if self.opts.diffusion {
                self.apply_diffusion_spectrum(0.5 * dt);
                self.extract_density(state);
            }
            if self.opts.chemotaxis {
                self.extract_gradients();
            } else {
                self.grad_x.fill(0.0);
                self.grad_y.fill(0.0);
            }
        } else {
            self.grad_x.fill(0.0);
            self.grad_y.fill(0.0);
        }

        self.transport(state, dt)?;

        if self.opts.diffusion {
            pad_field(state.n.values(), n, &mut self.hat);
            self.table.fft.forward(&mut self.hat);
            self.apply_diffusion_spectrum(0.5 * dt);
            self.extract_density(state);
        }

        self.update_drift_bound();
        Ok(())
    }

    /// Conservative finite-volume transport with metered boundary outflow.
    fn transport(&mut self, state: &mut StepperState, dt: f64) -> Result<()> {
        let n = self.grid.cells_per_side();
        let h = self.grid.spacing();
        let halfw = self.grid.half_width();
        let a = self.strain.amplitude();

        // face velocities: chemo gradient averaged to faces, strain exact
        for j in 0..n {
            let row = j * (n + 1);
            for f in 0..=n {
                let xf = -halfw + f as f64 * h;
                let chemo = if f == 0 {
                    self.grad_x[j * n]
                } else if f == n {
                    self.grad_x[j * n + n - 1]
                } else {
                    0.5 * (self.grad_x[j * n + f - 1] + self.grad_x[j * n + f])
                };
                self.ufx[row + f] = chemo - a * xf;
            }
        }
        for f in 0..=n {
            let yf = -halfw + f as f64 * h;
            let frow = f * n;
            for i in 0..n {
                let chemo = if f == 0 {
                    self.grad_y[i]
                } else if f == n {
                    self.grad_y[(n - 1) * n + i]
                } else {
                    0.5 * (self.grad_y[(f - 1) * n + i] + self.grad_y[f * n + i])
                };
                self.ufy[frow + i] = chemo + a * yf;
            }
        }

        // positivity gate: per-cell outflow coefficient
        let limit = self.opts.transport.coef_limit();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let ue = self.ufx[j * (n + 1) + i + 1].max(0.0);
                let uw = (-self.ufx[j * (n + 1) + i]).max(0.0);
                let vn = self.ufy[(j + 1) * n + i].max(0.0);
                let vs = (-self.ufy[j * n + i]).max(0.0);
                let coef = ue + uw + vn + vs;
                if coef > worst {
                    worst = coef;
                }
            }
        }
        if dt * worst / h > limit {
            return Err(PksError::TimeStepUnderflow {
                step: state.step_count,
                halvings: 0,
            });
        }

        let muscl = self.opts.transport == TransportScheme::Muscl;
        let values = state.n.values();
        self.div.fill(0.0);
        let mut outflow = 0.0;

        // monotonized-central limited slope from the one-sided differences
        #[inline]
        fn minmod(dm: f64, dp: f64) -> f64 {
            if dm > 0.0 && dp > 0.0 {
                (0.5 * (dm + dp)).min(2.0 * dm).min(2.0 * dp)
            } else if dm < 0.0 && dp < 0.0 {
                (0.5 * (dm + dp)).max(2.0 * dm).max(2.0 * dp)
            } else {
                0.0
            }
        }

        // x-direction fluxes
        for j in 0..n {
            let base = j * n;
            for f in 0..=n {
                let u = self.ufx[j * (n + 1) + f];
                let flux = if f == 0 {
                    if u < 0.0 {
                        u * values[base]
                    } else {
                        0.0
                    }
                } else if f == n {
                    if u > 0.0 {
                        u * values[base + n - 1]
                    } else {
                        0.0
                    }
                } else {
                    let il = base + f - 1;
                    let ir = base + f;
                    if u > 0.0 {
                        let mut v = values[il];
                        if muscl && f >= 2 {
                            v += 0.5 * minmod(values[il] - values[il - 1], values[ir] - values[il]);
                        }
                        u * v
                    } else if u < 0.0 {
                        let mut v = values[ir];
                        if muscl && f + 1 < n {
                            v -= 0.5 * minmod(values[ir] - values[il], values[ir + 1] - values[ir]);
                        }
                        u * v
                    } else {
                        0.0
                    }
                };
                if f > 0 {
                    self.div[base + f - 1] -= flux;
                }
                if f < n {
                    self.div[base + f] += flux;
                } else if flux > 0.0 {
                    outflow += flux;
                }
                if f == 0 && flux < 0.0 {
                    outflow -= flux;
                }
            }
        }

        // y-direction fluxes
        for f in 0..=n {
            for i in 0..n {
                let u = self.ufy[f * n + i];
                let flux = if f == 0 {
                    if u < 0.0 {
                        u * values[i]
                    } else {
                        0.0
                    }
                } else if f == n {
                    if u > 0.0 {
                        u * values[(n - 1) * n + i]
                    } else {
                        0.0
                    }
                } else {
                    let il = (f - 1) * n + i;
                    let ir = f * n + i;
                    if u > 0.0 {
                        let mut v = values[il];
                        if muscl && f >= 2 {
                            v += 0.5 * minmod(values[il] - values[il - n], values[ir] - values[il]);
                        }
                        u * v
                    } else if u < 0.0 {
                        let mut v = values[ir];
                        if muscl && f + 1 < n {
                            v -= 0.5 * minmod(values[ir] - values[il], values[ir + n] - values[ir]);
                        }
                        u * v
                    } else {
                        0.0
                    }
                };
                if f > 0 {
                    self.div[(f - 1) * n + i] -= flux;
                }
                if f < n {
                    self.div[f * n + i] += flux;
                } else if flux > 0.0 {
                    outflow += flux;
                }
                if f == 0 && flux < 0.0 {
                    outflow -= flux;
                }
            }
        }

        // the interior fluxes telescope exactly, so the conservation meter
        // itself must not drown in summation rounding: compensated sums
        let mass_before = neumaier_sum(values);
        let peak_before = state.n.max_value();
        let scale = dt / h;
        let values = state.n.values_mut();
        let mut clamped = 0.0;
        let mut worst_neg = 0.0f64;
        let mut mass_after = 0.0;
        let mut mass_comp = 0.0;
        for (v, d) in values.iter_mut().zip(self.div.iter()) {
            let mut nv = *v + scale * d;
            let t = mass_after + nv;
            mass_comp += if mass_after.abs() >= nv.abs() {
                (mass_after - t) + nv
            } else {
                (nv - t) + mass_after
            };
            mass_after = t;
            if nv < 0.0 {
                worst_neg = worst_neg.max(-nv);
                clamped -= nv;
                nv = 0.0;
            }
            *v = nv;
        }
        let mass_after = mass_after + mass_comp;
        if peak_before > 0.0 && worst_neg > 1e-14 * peak_before {
            return Err(PksError::PositivityBroken {
                step: state.step_count,
                min: -worst_neg,
                floor: -1e-14 * peak_before,
            });
        }
        let h2 = self.grid.cell_area();
        if clamped > 0.0 && mass_after > 0.0 {
            let fix = mass_after / (mass_after + clamped);
            for v in values.iter_mut() {
                *v *= fix;
            }
            state.clamped_mass += clamped * h2;
        }
        let outflow_mass = outflow * scale * h2;
        state.boundary_outflow += outflow_mass;
        if peak_before > 0.0 {
            state.max_negative_excursion =
                state.max_negative_excursion.max(worst_neg / peak_before);
        }
        let drift = ((mass_after - mass_before) * h2 + outflow_mass).abs();
        state.max_interior_drift = state.max_interior_drift.max(drift);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MomentWeight;
    use crate::kernel::{build_kernel, BridgeKind};
    use approx::assert_relative_eq;

    #[test]
    fn strain_eval_matches_formula() {
        let s = StrainField::new(3.0);
        assert_eq!(s.velocity(1.0, 2.0), (-3.0, 6.0));
        let zero = StrainField::new(0.0);
        assert_eq!(zero.velocity(5.0, -7.0), (0.0, 0.0));
        assert_eq!(s.velocity(0.0, 0.0), (0.0, 0.0));
        assert_eq!(s.potential(1.0, 2.0), 1.5 * (4.0 - 1.0));
    }

    #[test]
    fn select_amplitude_quadratic_law() {
        let a = select_amplitude(6.0 * PI, 0.5).unwrap();
        assert_relative_eq!(a, 24.0 * PI, max_relative = 1e-15);
        assert_eq!(select_amplitude(0.0, 0.3).unwrap(), 0.0);
        let a2 = select_amplitude(6.0 * PI, 0.25).unwrap();
        assert_relative_eq!(a2, 4.0 * a, max_relative = 1e-15);
        assert!(select_amplitude(1.0, 0.0).is_err());
        assert!(select_amplitude(1.0, -0.5).is_err());
    }

    #[test]
    fn characteristic_round_trip_is_tight() {
        // RK4 forward then backward along ẋ = b(x)
        let s = StrainField::new(1.3);
        let rhs = |x: (f64, f64)| s.velocity(x.0, x.1);
        let rk4 = |mut x: (f64, f64), dt: f64, steps: usize| {
            for _ in 0..steps {
                let k1 = rhs(x);
                let k2 = rhs((x.0 + 0.5 * dt * k1.0, x.1 + 0.5 * dt * k1.1));
                let k3 = rhs((x.0 + 0.5 * dt * k2.0, x.1 + 0.5 * dt * k2.1));
                let k4 = rhs((x.0 + dt * k3.0, x.1 + dt * k3.1));
                x = (
                    x.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    x.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                );
            }
            x
        };
        let x0 = (0.8, -1.7);
        let fwd = rk4(x0, 1e-3, 1000);
        let back = rk4(fwd, -1e-3, 1000);
        let err = ((back.0 - x0.0).powi(2) + (back.1 - x0.1).powi(2)).sqrt();
        assert!(err < 1e-10, "round trip error {err}");
        // and the numerical endpoint matches the exact flow map
        let exact = s.flow_map(x0.0, x0.1, 1.0);
        assert_relative_eq!(fwd.0, exact.0, max_relative = 1e-9);
        assert_relative_eq!(fwd.1, exact.1, max_relative = 1e-9);
    }

    #[test]
    fn detector_states() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let cfg = BlowupThresholds::default();
        let fresh = DensityField::gaussian(g, 4.0 * PI, (0.0, 0.0), 0.5);
        let peak0 = fresh.max_value();
        assert_eq!(
            detect_blowup(&fresh, peak0, &[], false, &cfg),
            Verdict::Healthy
        );

        let mut spike = DensityField::zeros(g);
        let k = g.idx(32, 32);
        spike.values_mut()[k] = 1e5 * peak0;
        assert_eq!(
            detect_blowup(&spike, peak0, &[], true, &cfg),
            Verdict::BlownUp
        );

        // persistent second-moment decay on a supercritical run
        let v = [5.0, 4.9, 4.7, 4.4, 4.0, 3.5];
        assert_eq!(
            detect_blowup(&fresh, peak0, &v, true, &cfg),
            Verdict::Suspected
        );
        assert_eq!(
            detect_blowup(&fresh, peak0, &v, false, &cfg),
            Verdict::Healthy
        );
    }

    fn run_steps(stepper: &mut Stepper, state: &mut StepperState, t_end: f64) {
        stepper.prime(state);
        while state.t < t_end - 1e-12 {
            stepper.step(state, t_end - state.t).unwrap();
        }
    }

    #[test]
    fn pure_diffusion_matches_heat_kernel() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let mass = 4.0 * PI;
        let sigma0 = 0.5;
        let n0 = DensityField::gaussian(g, mass, (0.0, 0.0), sigma0);
        let mut state = StepperState::new(n0);
        let opts = StepperOptions {
            chemotaxis: false,
            dt_cap: 0.01,
            ..Default::default()
        };
        let mut stepper = Stepper::new(&table, StrainField::new(0.0), opts);
        let t_end = 0.1;
        run_steps(&mut stepper, &mut state, t_end);

        let sigma_t = (sigma0 * sigma0 + 2.0 * t_end).sqrt();
        let exact = DensityField::gaussian(g, mass, (0.0, 0.0), sigma_t);
        let mut err2 = 0.0;
        for (a, b) in state.n.values().iter().zip(exact.values().iter()) {
            err2 += (a - b) * (a - b);
        }
        let l2 = (g.cell_area() * err2).sqrt();
        assert!(l2 < 1e-4, "heat L2 error {l2}");
        assert!(state.n.min_value() >= 0.0);
        assert_relative_eq!(state.n.integrate(), mass, max_relative = 1e-9);
    }

    #[test]
    fn pure_advection_tracks_characteristics() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let mass = 2.0;
        let start = (2.0, 1.0);
        let n0 = DensityField::gaussian(g, mass, start, 0.3);
        let mut state = StepperState::new(n0);
        let a = 1.0;
        let opts = StepperOptions {
            chemotaxis: false,
            diffusion: false,
            dt_cap: 0.01,
            track_symmetry: false,
            ..Default::default()
        };
        let mut stepper = Stepper::new(&table, StrainField::new(a), opts);
        let t_end = 0.5;
        run_steps(&mut stepper, &mut state, t_end);

        let m = state.n.integrate();
        let cx = state.n.moment(MomentWeight::Monomial { px: 1, py: 0 }) / m;
        let cy = state.n.moment(MomentWeight::Monomial { px: 0, py: 1 }) / m;
        let expect = StrainField::new(a).flow_map(start.0, start.1, t_end);
        assert_relative_eq!(cx, expect.0, max_relative = 0.02);
        assert_relative_eq!(cy, expect.1, max_relative = 0.02);
        // volume-preserving flow: no boundary contact, mass conserved
        assert_relative_eq!(m, mass, max_relative = 1e-10);
        assert!(state.n.min_value() >= 0.0);
    }

    #[test]
    fn full_system_preserves_mirror_symmetry_and_mass_accounting() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let mass = 12.0 * PI;
        let mut n0 = DensityField::gaussian(g, mass / 2.0, (0.0, 2.0), 0.5);
        let lower = DensityField::gaussian(g, mass / 2.0, (0.0, -2.0), 0.5);
        for k in 0..n0.values().len() {
            n0.values_mut()[k] += lower.values()[k];
        }
        let m0 = n0.integrate();
        let mut state = StepperState::new(n0);
        let a = select_amplitude(mass / 2.0, 0.5).unwrap();
        let opts = StepperOptions {
            dt_cap: 1e-3,
            ..Default::default()
        };
        let mut stepper = Stepper::new(&table, StrainField::new(a), opts);
        stepper.prime(&state);
        for _ in 0..25 {
            stepper.step(&mut state, 1.0).unwrap();
        }
        let peak = state.n.max_value();
        assert!(
            state.max_symmetry_error <= 1e-12 * peak,
            "symmetry error {:e} vs peak {:e}",
            state.max_symmetry_error,
            peak
        );
        assert!(state.max_interior_drift <= 1e-12 * m0);
        let m_now = state.n.integrate();
        // clip-and-rescale keeps the mass ledger closed by outflow alone
        let balance = (m0 - m_now - state.boundary_outflow).abs();
        assert!(
            balance <= 1e-10 * m0,
            "mass accounting off by {balance:e} (outflow {:e}, clamped {:e})",
            state.boundary_outflow,
            state.clamped_mass
        );
        assert!(state.n.min_value() >= 0.0);
        // symmetric data centered at the origin stays centered
        let cx = state.n.moment(MomentWeight::Monomial { px: 1, py: 0 });
        let cy = state.n.moment(MomentWeight::Vertical);
        assert!(cx.abs() <= 1e-10 * m0 && cy.abs() <= 1e-10 * m0);
    }

    #[test]
    fn muscl_transport_conserves_and_stays_positive() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let n0 = DensityField::gaussian(g, 4.0 * PI, (0.0, 0.0), 0.5);
        let m0 = n0.integrate();
        let mut state = StepperState::new(n0);
        let opts = StepperOptions {
            transport: TransportScheme::Muscl,
            dt_cap: 5e-3,
            ..Default::default()
        };
        let mut stepper = Stepper::new(&table, StrainField::new(0.0), opts);
        stepper.prime(&state);
        for _ in 0..20 {
            stepper.step(&mut state, 1.0).unwrap();
        }
        assert!(state.n.min_value() >= 0.0);
        assert!(state.max_interior_drift <= 1e-12 * m0);
        let balance = (m0 - state.n.integrate() - state.boundary_outflow).abs();
        assert!(balance <= 1e-10 * m0);
    }

    #[test]
    fn center_of_mass_follows_strain_drift() {
        // off-center bump with chemo + diffusion on: chemotaxis and
        // diffusion exert no net momentum, so d/dt ∫x n ≈ ∫b n. The
        // first-order scheme carries an O(h) momentum bias from its
        // spatially varying numerical viscosity, so this law is checked
        // with the second-order transport.
        let g = Grid2D::new(128, 8.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let n0 = DensityField::gaussian(g, 4.0 * PI, (1.0, 0.5), 0.4);
        let mut state = StepperState::new(n0);
        let a = 0.8;
        let opts = StepperOptions {
            transport: TransportScheme::Muscl,
            dt_cap: 2e-3,
            track_symmetry: false,
            ..Default::default()
        };
        let mut stepper = Stepper::new(&table, StrainField::new(a), opts);
        let com = |f: &DensityField| {
            let m = f.integrate();
            (
                f.moment(MomentWeight::Monomial { px: 1, py: 0 }) / m,
                f.moment(MomentWeight::Monomial { px: 0, py: 1 }) / m,
            )
        };
        let c0 = com(&state.n);
        let t_end = 0.05;
        run_steps(&mut stepper, &mut state, t_end);
        let c1 = com(&state.n);
        let rate = ((c1.0 - c0.0) / t_end, (c1.1 - c0.1) / t_end);
        let mid = (0.5 * (c0.0 + c1.0), 0.5 * (c0.1 + c1.1));
        let expect = StrainField::new(a).velocity(mid.0, mid.1);
        assert_relative_eq!(rate.0, expect.0, max_relative = 0.05);
        assert_relative_eq!(rate.1, expect.1, max_relative = 0.05);
    }
}
