//! Functionals and identity/inequality monitors: entropy, free energy and
//! its dissipation, virial residuals, half-plane splitting monitors,
//! strip-mass and moment-growth bounds, the logarithmic HLS inequality, and
//! the negative-entropy bound.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::dynamics::StrainField;
use crate::error::{PksError, Result};
use crate::fft::Fft2;
use crate::grid::{DensityField, Grid2D, MomentWeight};
use crate::kernel::{pad_field, wrapped_offset, ChemoSolution};

/// Cells below this absolute value are treated as vacuum by the entropy.
const ENTROPY_FLOOR: f64 = 1e-300;

/// Relative floor (times max n) below which cells are excluded from the
/// log-gradient in the dissipation integrand.
const DISSIPATION_FLOOR: f64 = 1e-12;

/// S[n] = ∫ n log n, with 0·log 0 = 0.
pub fn entropy(n: &DensityField) -> f64 {
    let mut acc = 0.0;
    for &v in n.values() {
        if v > ENTROPY_FLOOR {
            acc += v * v.ln();
        }
    }
    n.grid().cell_area() * acc
}

/// E[n] = ∫ (n log n − ½ c n − H n) with H the strain potential.
pub fn free_energy(n: &DensityField, chemo: &ChemoSolution, strain: &StrainField) -> f64 {
    let grid = n.grid();
    let nn = grid.cells_per_side();
    let mut coupling = 0.0;
    let mut potential = 0.0;
    for j in 0..nn {
        let x2 = grid.x2(j);
        for i in 0..nn {
            let k = j * nn + i;
            let v = n.values()[k];
            coupling += chemo.c[k] * v;
            potential += strain.potential(grid.x1(i), x2) * v;
        }
    }
    entropy(n) - grid.cell_area() * (0.5 * coupling + potential)
}

/// D[n] = ∫ n |∇log n − ∇c − b|², the free-energy dissipation rate.
///
/// ∇log n is taken by central differences on cells with n above a relative
/// floor; vacuum cells contribute nothing.
pub fn dissipation(n: &DensityField, chemo: &ChemoSolution, strain: &StrainField) -> f64 {
    let grid = n.grid();
    let nn = grid.cells_per_side();
    let floor = DISSIPATION_FLOOR * n.max_value();
    if !(floor > 0.0) {
        return 0.0;
    }
    let inv2h = 1.0 / (2.0 * grid.spacing());
    let vals = n.values();
    let mut acc = 0.0;
    for j in 1..nn - 1 {
        let x2 = grid.x2(j);
        for i in 1..nn - 1 {
            let k = j * nn + i;
            let v = vals[k];
            if v <= floor {
                continue;
            }
            let lx = (vals[k + 1].max(floor).ln() - vals[k - 1].max(floor).ln()) * inv2h;
            let ly = (vals[k + nn].max(floor).ln() - vals[k - nn].max(floor).ln()) * inv2h;
            let (bx, by) = strain.velocity(grid.x1(i), x2);
            let dx = lx - chemo.grad.x1[k] - bx;
            let dy = ly - chemo.grad.x2[k] - by;
            acc += v * (dx * dx + dy * dy);
        }
    }
    grid.cell_area() * acc
}

/// One timestamped row of every monitored functional.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub upper_mass: f64,
    /// V = ∫ n |x|².
    pub second_moment: f64,
    /// W = ∫ n (x₂² − x₁²).
    pub skew_moment: f64,
    /// V₄ = ∫ n (x₁⁴ + x₂⁴).
    pub fourth_moment: f64,
    pub y_plus: f64,
    pub v_plus: f64,
    /// Mass of the strip |x₂| ≤ 2δ.
    pub strip_mass: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub dissipation: f64,
    pub max_n: f64,
    pub outflow_cum: f64,
    pub symmetry_error: f64,
}

pub const DIAGNOSTICS_CSV_HEADER: &str =
    "t,M,M_plus,V,W,V4,y_plus,V_plus,strip_mass,S,E,D,max_n,outflow,sym_err";

impl DiagnosticsRecord {
    /// Evaluate every functional on a snapshot. `strip_half_width` is the
    /// monitored strip half-width (2δ); `outflow_cum` and `symmetry_error`
    /// come from the stepper ledgers.
    pub fn collect(
        t: f64,
        n: &DensityField,
        chemo: &ChemoSolution,
        strain: &StrainField,
        strip_half_width: f64,
        outflow_cum: f64,
        symmetry_error: f64,
    ) -> Result<Self> {
        let hp = n.half_plane_stats()?;
        Ok(Self {
            t,
            mass: n.integrate(),
            upper_mass: hp.mass,
            second_moment: n.moment(MomentWeight::RadiusSquared),
            skew_moment: n.moment(MomentWeight::Skew),
            fourth_moment: n.moment(MomentWeight::Fourth),
            y_plus: hp.center,
            v_plus: hp.spread,
            strip_mass: n.strip_mass(strip_half_width),
            entropy: entropy(n),
            free_energy: free_energy(n, chemo, strain),
            dissipation: dissipation(n, chemo, strain),
            max_n: n.max_value(),
            outflow_cum,
            symmetry_error,
        })
    }

    pub fn write_csv_row(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.mass,
            self.upper_mass,
            self.second_moment,
            self.skew_moment,
            self.fourth_moment,
            self.y_plus,
            self.v_plus,
            self.strip_mass,
            self.entropy,
            self.free_energy,
            self.dissipation,
            self.max_n,
            self.outflow_cum,
            self.symmetry_error,
        )?;
        Ok(())
    }
}

/// Write a diagnostics history as CSV.
pub fn write_diagnostics_csv(history: &[DiagnosticsRecord], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{DIAGNOSTICS_CSV_HEADER}")?;
    for rec in history {
        rec.write_csv_row(w)?;
    }
    Ok(())
}

/// One evaluated inequality; `pass` ⇔ `slack ≥ −tolerance`, where the slack
/// is the margin by which the inequality holds.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub name: &'static str,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    /// Report for an inequality of the form lhs ≤ rhs.
    pub fn upper_bound(name: &'static str, t: f64, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name,
            t,
            lhs,
            rhs,
            slack,
            tolerance,
            pass: slack >= -tolerance,
        }
    }

    /// Report for an inequality of the form lhs ≥ rhs.
    pub fn lower_bound(name: &'static str, t: f64, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            name,
            t,
            lhs,
            rhs,
            slack,
            tolerance,
            pass: slack >= -tolerance,
        }
    }
}

pub const INEQUALITY_CSV_HEADER: &str = "t,lhs,rhs,slack,pass";

/// Write one CSV per check: `t,lhs,rhs,slack,pass`.
pub fn write_inequality_csv(rows: &[InequalityReport], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{INEQUALITY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.t, r.lhs, r.rhs, r.slack, r.pass
        )?;
    }
    Ok(())
}

/// Spectrum of the exact (unregularized) log kernel for the interaction
/// integral ∬ n(x) n(y) log|x−y| dx dy. The singular diagonal cell carries
/// the analytic cell average of log|z| over one cell.
pub struct InteractionKernel {
    grid: Grid2D,
    fft: Fft2,
    hat: Vec<f64>,
}

/// (1/h²) ∫_cell log|z| dz over the square cell of side h centered at 0.
pub fn log_cell_average(h: f64) -> f64 {
    (0.5 * h).ln() + 0.5 * (2.0f64.ln() + 0.5 * PI - 3.0)
}

impl InteractionKernel {
    pub fn new(grid: Grid2D) -> Self {
        let n = grid.cells_per_side();
        let p = 2 * n;
        let h = grid.spacing();
        let fft = Fft2::new(p);
        let mut samples = vec![Complex64::default(); p * p];
        for q in 0..p {
            let dy = wrapped_offset(q, n) as f64 * h;
            for pi in 0..p {
                let dx = wrapped_offset(pi, n) as f64 * h;
                let r2 = dx * dx + dy * dy;
                let v = if r2 == 0.0 {
                    log_cell_average(h)
                } else {
                    0.5 * r2.ln()
                };
                samples[q * p + pi] = Complex64::new(v, 0.0);
            }
        }
        fft.forward(&mut samples);
        let hat = samples.iter().map(|v| v.re).collect();
        Self { grid, fft, hat }
    }

    /// ∬ n(x) n(y) log|x−y| dx dy by zero-padded convolution.
    pub fn interaction_energy(&self, n: &DensityField) -> f64 {
        assert_eq!(n.grid(), self.grid, "kernel built for a different grid");
        let nn = self.grid.cells_per_side();
        let p = 2 * nn;
        let h2 = self.grid.cell_area();
        let mut buf = vec![Complex64::default(); p * p];
        pad_field(n.values(), nn, &mut buf);
        self.fft.forward(&mut buf);
        for (v, &k) in buf.iter_mut().zip(self.hat.iter()) {
            *v *= k * h2;
        }
        self.fft.inverse(&mut buf);
        let mut acc = 0.0;
        for j in 0..nn {
            for i in 0..nn {
                acc += n.values()[j * nn + i] * buf[j * p + i].re;
            }
        }
        h2 * acc
    }
}

/// C(M) = M(1 + log π − log M), the sharp constant in the logarithmic HLS
/// inequality.
pub fn log_hls_constant(mass: f64) -> f64 {
    mass * (1.0 + PI.ln() - mass.ln())
}

/// Check S[n] + (2/M) ∬ n n log|x−y| ≥ −C(M).
pub fn log_hls_check(
    n: &DensityField,
    kernel: &InteractionKernel,
    t: f64,
    tolerance: f64,
) -> Result<InequalityReport> {
    let mass = n.integrate();
    if !(mass > 0.0) {
        return Err(PksError::InvalidConfig(
            "log-HLS check requires positive mass".into(),
        ));
    }
    let lhs = entropy(n) + 2.0 / mass * kernel.interaction_energy(n);
    let rhs = -log_hls_constant(mass);
    Ok(InequalityReport::lower_bound(
        "log_hls", t, lhs, rhs, tolerance,
    ))
}

/// Check ∫ n log⁻ n ≤ ½ V + M log(2π) + 1/e.
pub fn negative_entropy_bound(n: &DensityField, t: f64, tolerance: f64) -> InequalityReport {
    let mut neg = 0.0;
    for &v in n.values() {
        if v > ENTROPY_FLOOR && v < 1.0 {
            neg -= v * v.ln();
        }
    }
    let lhs = n.grid().cell_area() * neg;
    let mass = n.integrate();
    let v = n.moment(MomentWeight::RadiusSquared);
    let rhs = 0.5 * v + mass * (2.0 * PI).ln() + 1.0 / std::f64::consts::E;
    InequalityReport::upper_bound("negative_entropy", t, lhs, rhs, tolerance)
}

/// Residuals of the second-moment identity and the skew-moment inequality
/// at one record time.
#[derive(Debug, Clone)]
pub struct VirialRow {
    pub t: f64,
    /// Central-difference dV/dt.
    pub dv_dt: f64,
    /// 4M(1 − M/8π) + 2AW.
    pub dv_expected: f64,
    pub v_residual: f64,
    /// Central-difference dW/dt.
    pub dw_dt: f64,
    /// −M²/2π + 2AV, the one-sided floor for dW/dt.
    pub dw_floor: f64,
    pub w_slack: f64,
}

#[derive(Debug, Clone)]
pub struct VirialReport {
    pub rows: Vec<VirialRow>,
}

impl VirialReport {
    /// Largest |residual| of the V-identity.
    pub fn worst_v_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.v_residual.abs())
            .fold(0.0, f64::max)
    }

    /// Most negative slack of the W-inequality.
    pub fn worst_w_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.w_slack).fold(f64::INFINITY, f64::min)
    }
}

/// Compare central-difference moment derivatives against
/// dV/dt = 4M(1 − M/8π) + 2AW (equality) and dW/dt ≥ −M²/2π + 2AV
/// (one-sided). Requires at least three records at uniform spacing.
pub fn virial_residuals(history: &[DiagnosticsRecord], amplitude: f64) -> Result<VirialReport> {
    if history.len() < 3 {
        return Err(PksError::InvalidConfig(format!(
            "virial residuals need at least 3 records, got {}",
            history.len()
        )));
    }
    let dt = history[1].t - history[0].t;
    for (k, pair) in history.windows(2).enumerate() {
        let step = pair[1].t - pair[0].t;
        if (step - dt).abs() > 1e-9 * dt.max(1e-300) {
            return Err(PksError::NonUniformSpacing {
                index: k + 1,
                found: step,
                expected: dt,
            });
        }
    }
    let mut rows = Vec::with_capacity(history.len().saturating_sub(2));
    for k in 1..history.len() - 1 {
        let rec = &history[k];
        let dv_dt = (history[k + 1].second_moment - history[k - 1].second_moment) / (2.0 * dt);
        let dw_dt = (history[k + 1].skew_moment - history[k - 1].skew_moment) / (2.0 * dt);
        let m = rec.mass;
        let dv_expected = 4.0 * m * (1.0 - m / (8.0 * PI)) + 2.0 * amplitude * rec.skew_moment;
        let dw_floor = -m * m / (2.0 * PI) + 2.0 * amplitude * rec.second_moment;
        rows.push(VirialRow {
            t: rec.t,
            dv_dt,
            dv_expected,
            v_residual: dv_dt - dv_expected,
            dw_dt,
            dw_floor,
            w_slack: dw_dt - dw_floor,
        });
    }
    Ok(VirialReport { rows })
}

/// Monitors for the strain-suppressed regime: per-record strip-mass bound,
/// the fitted exponential rate of y₊, and the spread prefactor.
#[derive(Debug, Clone)]
pub struct SplittingReport {
    /// strip_mass(2δ) ≤ (1+η)² M / (2R²) per record.
    pub strip_rows: Vec<InequalityReport>,
    /// Least-squares rate of log y₊ on the fit window, if it has ≥ 2 points.
    pub fitted_rate: Option<f64>,
    /// Number of records in the fit window.
    pub fit_points: usize,
    /// C_fit = max over the horizon of V₊(t)·e^(−2At) − V₊(0), reported as a
    /// spread-growth prefactor (clamped at 0).
    pub spread_prefactor: f64,
    /// R² recomputed from the first record.
    pub r_squared: f64,
}

/// Evaluate the splitting monitors over a history. Fails when the initial
/// concentration hypothesis R² > 1 does not hold.
pub fn splitting_monitors(
    history: &[DiagnosticsRecord],
    delta: f64,
    eta: f64,
    amplitude: f64,
    t_box: f64,
    strip_tolerance: f64,
) -> Result<SplittingReport> {
    if history.is_empty() {
        return Err(PksError::InvalidConfig("empty history".into()));
    }
    let first = &history[0];
    let r_squared = first.upper_mass * first.y_plus * first.y_plus / (2.0 * first.v_plus);
    if !(r_squared > 1.0) {
        return Err(PksError::HypothesisViolated(format!(
            "initial concentration ratio R^2 = {r_squared:.4} must exceed 1 \
             (upper-half mass too close to the axis for its spread)"
        )));
    }
    let _ = delta;
    let mut strip_rows = Vec::with_capacity(history.len());
    for rec in history {
        let bound = (1.0 + eta).powi(2) * rec.mass / (2.0 * r_squared);
        strip_rows.push(InequalityReport::upper_bound(
            "strip_mass_bound",
            rec.t,
            rec.strip_mass,
            bound,
            strip_tolerance,
        ));
    }

    // rate fit on log y₊ over records with y₊ ≥ 2 y₊(0) and t ≤ T_box
    let y0 = first.y_plus;
    let window: Vec<(f64, f64)> = history
        .iter()
        .filter(|r| r.y_plus >= 2.0 * y0 && r.t <= t_box + 1e-12)
        .map(|r| (r.t, r.y_plus.ln()))
        .collect();
    let fitted_rate = if window.len() >= 2 {
        let n = window.len() as f64;
        let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
        for &(t, y) in &window {
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
        }
        Some((n * sty - st * sy) / (n * stt - st * st))
    } else {
        None
    };

    let mut prefactor = 0.0f64;
    for rec in history.iter().filter(|r| r.t <= t_box + 1e-12) {
        let ratio = rec.v_plus * (-2.0 * amplitude * rec.t).exp() - first.v_plus;
        prefactor = prefactor.max(ratio);
    }

    Ok(SplittingReport {
        strip_rows,
        fitted_rate,
        fit_points: window.len(),
        spread_prefactor: prefactor,
        r_squared,
    })
}

/// Measured moments against their integrated growth envelopes.
#[derive(Debug, Clone)]
pub struct MomentBoundReport {
    pub rows: Vec<InequalityReport>,
    pub pass: bool,
}

/// Check V(t) and V₄(t) against the integrated envelopes
/// dV/dt ≤ 4AM + (A²/2)V (for A > 0; linear growth 4M when A = 0) and
/// dV₄/dt ≤ 12 V + 4A V₄.
pub fn moment_growth_bounds(
    history: &[DiagnosticsRecord],
    amplitude: f64,
    tolerance_rel: f64,
) -> MomentBoundReport {
    let mut rows = Vec::with_capacity(2 * history.len());
    if history.is_empty() {
        return MomentBoundReport { rows, pass: true };
    }
    let first = &history[0];
    let v0 = first.second_moment;
    let m = first.mass;
    let a = amplitude;
    let mut env4 = first.fourth_moment;
    let mut t_prev = first.t;
    for rec in history {
        let dt = rec.t - t_prev;
        let v_env = if a > 0.0 {
            (v0 + 8.0 * m / a) * (0.5 * a * a * rec.t).exp()
        } else {
            v0 + 4.0 * m * rec.t
        };
        if dt > 0.0 {
            // one Gronwall step for the fourth-moment envelope
            let growth = (4.0 * a * dt).exp();
            env4 = env4 * growth + 12.0 * v_env * dt * growth;
            t_prev = rec.t;
        }
        rows.push(InequalityReport::upper_bound(
            "second_moment_envelope",
            rec.t,
            rec.second_moment,
            v_env,
            tolerance_rel * v_env.abs(),
        ));
        rows.push(InequalityReport::upper_bound(
            "fourth_moment_envelope",
            rec.t,
            rec.fourth_moment,
            env4,
            tolerance_rel * env4.abs(),
        ));
    }
    let pass = rows.iter().all(|r| r.pass);
    MomentBoundReport { rows, pass }
}

/// Largest uphill step of the free energy over a history; monotone decay
/// means this stays at (or within rounding of) zero.
pub fn max_energy_uphill(history: &[DiagnosticsRecord]) -> f64 {
    history
        .windows(2)
        .map(|w| w[1].free_energy - w[0].free_energy)
        .fold(0.0, f64::max)
}

/// Midpoint residuals (E(t_{k+1}) − E(t_k))/Δ + D(t_{k+½}) of the
/// energy–dissipation identity; D at the midpoint is the average of the
/// adjacent records.
pub fn energy_dissipation_residuals(history: &[DiagnosticsRecord]) -> Vec<(f64, f64, f64)> {
    history
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let de = (w[1].free_energy - w[0].free_energy) / dt;
            let d_mid = 0.5 * (w[0].dissipation + w[1].dissipation);
            (0.5 * (w[0].t + w[1].t), de + d_mid, d_mid)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DensityField;
    use crate::kernel::{build_kernel, convolve, BridgeKind, GradMode};
    use approx::assert_relative_eq;

    fn zero_chemo(grid: Grid2D) -> ChemoSolution {
        let zero = DensityField::zeros(grid);
        let table = build_kernel(2.0 * grid.spacing(), grid, BridgeKind::LogCap).unwrap();
        convolve(&zero, &table, GradMode::Convolution)
    }

    #[test]
    fn entropy_of_gaussian_matches_closed_form() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 4.0 * PI;
        let sigma = 0.5;
        let n = DensityField::gaussian(g, mass, (0.0, 0.0), sigma);
        let expected = mass * ((mass / (2.0 * PI * sigma * sigma)).ln() - 1.0);
        assert_relative_eq!(entropy(&n), expected, max_relative = 0.01);
    }

    #[test]
    fn entropy_of_uniform_field() {
        let g = Grid2D::new(64, 2.0).unwrap();
        let mass = 3.0;
        let area = 4.0 * g.half_width() * g.half_width();
        let n = DensityField::from_fn(g, |_, _| mass / area);
        assert_relative_eq!(
            entropy(&n),
            mass * (mass / area).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn entropy_scaling_law() {
        let g = Grid2D::new(128, 6.0).unwrap();
        let n = DensityField::gaussian(g, 2.0, (0.3, -0.2), 0.6);
        let mut doubled = n.clone();
        for v in doubled.values_mut() {
            *v *= 2.0;
        }
        let s = entropy(&n);
        let m = n.integrate();
        assert_relative_eq!(
            entropy(&doubled),
            2.0 * s + 2.0 * m * 2.0f64.ln(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn free_energy_reduces_to_classic_form_without_strain() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let n = DensityField::gaussian(g, 4.0 * PI, (0.0, 0.0), 0.6);
        let chemo = convolve(&n, &table, GradMode::Convolution);
        let e = free_energy(&n, &chemo, &StrainField::new(0.0));
        let mut coupling = 0.0;
        for (v, c) in n.values().iter().zip(chemo.c.iter()) {
            coupling += v * c;
        }
        let classic = entropy(&n) - 0.5 * g.cell_area() * coupling;
        assert_relative_eq!(e, classic, max_relative = 1e-14);
    }

    #[test]
    fn strain_term_equals_half_amplitude_times_skew_moment() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let n = DensityField::gaussian(g, 5.0, (0.0, 1.0), 0.5);
        let a = 2.5;
        let strain = StrainField::new(a);
        let chemo = zero_chemo(g);
        // E = S − ∫H n when c = 0, and ∫H n = (A/2) W
        let e = free_energy(&n, &chemo, &strain);
        let w = n.moment(MomentWeight::Skew);
        let expected = entropy(&n) - 0.5 * a * w;
        let scale = e.abs().max(1.0);
        assert!((e - expected).abs() <= 1e-12 * scale);
    }

    #[test]
    fn free_energy_matches_direct_sum_for_two_far_bumps() {
        let g = Grid2D::new(48, 6.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let mut n = DensityField::gaussian(g, 2.0, (0.0, 2.0), 0.4);
        let lower = DensityField::gaussian(g, 2.0, (0.0, -2.0), 0.4);
        for k in 0..n.values().len() {
            n.values_mut()[k] += lower.values()[k];
        }
        let chemo = convolve(&n, &table, GradMode::Convolution);
        let e = free_energy(&n, &chemo, &StrainField::new(0.0));
        // direct O(N^4) coupling sum
        let nn = g.cells_per_side();
        let h = g.spacing();
        let mut coupling = 0.0;
        for j in 0..nn {
            for i in 0..nn {
                let vi = n.values()[g.idx(i, j)];
                if vi == 0.0 {
                    continue;
                }
                let mut ci = 0.0;
                for l in 0..nn {
                    for k in 0..nn {
                        let dx = (i as f64 - k as f64) * h;
                        let dy = (j as f64 - l as f64) * h;
                        ci += table.value_at((dx * dx + dy * dy).sqrt()) * n.values()[g.idx(k, l)];
                    }
                }
                coupling += vi * ci * g.cell_area();
            }
        }
        let direct = entropy(&n) - 0.5 * g.cell_area() * coupling;
        assert_relative_eq!(e, direct, max_relative = 1e-10);
    }

    #[test]
    fn dissipation_vanishes_at_steady_balance() {
        // fixed-point construction of n = exp(c)·const on a small grid,
        // using the same central differences for both sides
        let g = Grid2D::new(64, 4.0).unwrap();
        let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
        let mass = 4.0 * PI;
        let mut n = DensityField::gaussian(g, mass, (0.0, 0.0), 0.8);
        for _ in 0..400 {
            let chemo = convolve(&n, &table, GradMode::CentralDifference);
            let mut next = DensityField::from_fn(g, |_, _| 0.0);
            let mut total = 0.0;
            for k in 0..next.values().len() {
                let v = chemo.c[k].exp();
                next.values_mut()[k] = v;
                total += v;
            }
            let scale = mass / (total * g.cell_area());
            for k in 0..next.values().len() {
                let v = next.values()[k] * scale;
                // damped update
                next.values_mut()[k] = 0.5 * v + 0.5 * n.values()[k];
            }
            n = next;
        }
        let chemo = convolve(&n, &table, GradMode::CentralDifference);
        let d = dissipation(&n, &chemo, &StrainField::new(0.0));
        assert!(d < 1e-6, "steady-state dissipation {d}");
    }

    #[test]
    fn dissipation_of_free_gaussian_is_fisher_information() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 4.0 * PI;
        let sigma = 1.0;
        let n = DensityField::gaussian(g, mass, (0.0, 0.0), sigma);
        let chemo = zero_chemo(g);
        let d = dissipation(&n, &chemo, &StrainField::new(0.0));
        assert_relative_eq!(d, 2.0 * mass / (sigma * sigma), max_relative = 0.02);
    }

    #[test]
    fn dissipation_of_uniform_field_is_zero() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let n = DensityField::from_fn(g, |_, _| 0.7);
        let chemo = zero_chemo(g);
        assert_eq!(dissipation(&n, &chemo, &StrainField::new(0.0)), 0.0);
    }

    #[test]
    fn log_cell_average_matches_quadrature() {
        let h = 0.37;
        // midpoint quadrature on a fine subgrid of one cell (even count so
        // no sample lands on the singularity)
        let m = 800usize;
        let sub = h / m as f64;
        let mut acc = 0.0;
        for j in 0..m {
            let y = -0.5 * h + (j as f64 + 0.5) * sub;
            for i in 0..m {
                let x = -0.5 * h + (i as f64 + 0.5) * sub;
                acc += 0.5 * (x * x + y * y).ln();
            }
        }
        let quad = acc * sub * sub / (h * h);
        assert_relative_eq!(log_cell_average(h), quad, max_relative = 1e-5);
    }

    #[test]
    fn log_hls_constant_at_8pi() {
        let c = log_hls_constant(8.0 * PI);
        assert_relative_eq!(c, 8.0 * PI * (1.0 - 8.0f64.ln()), max_relative = 1e-14);
        assert!((c - (-27.126)).abs() < 0.01);
    }

    #[test]
    fn log_hls_holds_on_gaussian_family() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let kernel = InteractionKernel::new(g);
        let mass = 8.0 * PI;
        let mut slacks = Vec::new();
        for k in 0..8 {
            let sigma = 0.4 + 0.15 * k as f64;
            let n = DensityField::gaussian(g, mass, (0.0, 0.0), sigma);
            let rep = log_hls_check(&n, &kernel, 0.0, 1e-3 * mass).unwrap();
            assert!(rep.pass, "sigma={sigma}: slack {}", rep.slack);
            assert!(rep.slack >= 0.0);
            slacks.push(rep.slack);
        }
        // smooth dependence on sigma: bounded second differences
        for w in slacks.windows(3) {
            let curv = (w[2] - 2.0 * w[1] + w[0]).abs();
            assert!(curv < 0.5 * (w[1].abs() + 1.0));
        }
    }

    #[test]
    fn log_hls_holds_on_seeded_mixtures() {
        use rand::{Rng, SeedableRng};
        let g = Grid2D::new(128, 8.0).unwrap();
        let kernel = InteractionKernel::new(g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..5 {
            let bumps = rng.gen_range(1..=4);
            let mut n = DensityField::zeros(g);
            for _ in 0..bumps {
                let mass = rng.gen_range(0.5..12.0);
                let cx = rng.gen_range(-2.0..2.0);
                let cy = rng.gen_range(-2.0..2.0);
                let sigma = rng.gen_range(0.3..1.2);
                let bump = DensityField::gaussian(g, mass, (cx, cy), sigma);
                for k in 0..n.values().len() {
                    n.values_mut()[k] += bump.values()[k];
                }
            }
            let rep = log_hls_check(&n, &kernel, 0.0, 1e-3 * n.integrate()).unwrap();
            assert!(rep.pass, "trial {trial} slack {}", rep.slack);
        }
    }

    #[test]
    fn negative_entropy_bound_cases() {
        let g = Grid2D::new(128, 8.0).unwrap();
        // a well-behaved Gaussian passes with positive slack
        let n = DensityField::gaussian(g, 4.0 * PI, (0.0, 0.0), 1.0);
        let rep = negative_entropy_bound(&n, 0.0, 1e-9);
        assert!(rep.pass && rep.slack > 0.0);

        // very spread field with max < 1: lhs = |S|, still passes
        let spread = DensityField::gaussian(g, 2.0, (0.0, 0.0), 2.0);
        assert!(spread.max_value() < 1.0);
        let rep = negative_entropy_bound(&spread, 0.0, 1e-9);
        assert_relative_eq!(rep.lhs, -entropy(&spread), max_relative = 1e-12);
        assert!(rep.pass);

        // n ≥ 1 on its support: lhs = 0
        let g2 = Grid2D::new(16, 1.0).unwrap();
        let tall = DensityField::from_fn(g2, |_, _| 2.5);
        let rep = negative_entropy_bound(&tall, 0.0, 1e-9);
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.pass);
    }

    fn synthetic_history(spacing: f64) -> Vec<DiagnosticsRecord> {
        // V(t) = 10 + 3t, W(t) = 1 + 2t, everything else constant
        (0..6)
            .map(|k| {
                let t = k as f64 * spacing;
                DiagnosticsRecord {
                    t,
                    mass: 4.0 * PI,
                    upper_mass: 2.0 * PI,
                    second_moment: 10.0 + 3.0 * t,
                    skew_moment: 1.0 + 2.0 * t,
                    fourth_moment: 5.0,
                    y_plus: 1.0,
                    v_plus: 0.5,
                    strip_mass: 0.1,
                    entropy: 0.0,
                    free_energy: -1.0 - t,
                    dissipation: 1.0,
                    max_n: 1.0,
                    outflow_cum: 0.0,
                    symmetry_error: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn virial_residuals_centred_differences() {
        let hist = synthetic_history(0.25);
        let rep = virial_residuals(&hist, 0.0).unwrap();
        assert_eq!(rep.rows.len(), hist.len() - 2);
        for row in &rep.rows {
            assert_relative_eq!(row.dv_dt, 3.0, max_relative = 1e-12);
            assert_relative_eq!(row.dw_dt, 2.0, max_relative = 1e-12);
            // ideal dV/dt for M = 4π is 8π
            assert_relative_eq!(row.dv_expected, 8.0 * PI, max_relative = 1e-12);
            // dW/dt = 2 ≥ −M²/2π = −8π: big positive slack
            assert!(row.w_slack > 0.0);
        }
    }

    #[test]
    fn virial_residuals_reject_non_uniform_spacing() {
        let mut hist = synthetic_history(0.25);
        hist[3].t += 0.05;
        assert!(matches!(
            virial_residuals(&hist, 0.0),
            Err(PksError::NonUniformSpacing { .. })
        ));
        assert!(virial_residuals(&hist[..2], 0.0).is_err());
    }

    #[test]
    fn splitting_monitors_reject_low_concentration_ratio() {
        let mut hist = synthetic_history(0.25);
        // R² = M₊ y₊²/(2V₊): force it below 1
        for r in &mut hist {
            r.y_plus = 0.1;
            r.v_plus = 10.0;
        }
        assert!(matches!(
            splitting_monitors(&hist, 0.25, 0.1, 1.0, 1.0, 1e-9),
            Err(PksError::HypothesisViolated(_))
        ));
    }

    #[test]
    fn splitting_monitors_fit_exponential_rate() {
        let a = 3.0;
        let spacing = 0.05;
        let mut hist = synthetic_history(spacing);
        let more: Vec<DiagnosticsRecord> = (6..40)
            .map(|k| {
                let mut r = hist[0].clone();
                r.t = k as f64 * spacing;
                r
            })
            .collect();
        hist.extend(more);
        for r in &mut hist {
            r.y_plus = 1.0 * (a * r.t).exp();
            r.v_plus = 0.05 * (2.0 * a * r.t).exp();
            r.upper_mass = 2.0 * PI;
            r.strip_mass = 0.0;
        }
        let t_box = hist.last().unwrap().t;
        let rep = splitting_monitors(&hist, 0.25, 0.1, a, t_box, 1e-9).unwrap();
        let rate = rep.fitted_rate.expect("window should be non-empty");
        assert_relative_eq!(rate, a, max_relative = 1e-9);
        assert!(rep.strip_rows.iter().all(|r| r.pass));
        // V₊ e^{-2At} is exactly V₊(0) here, so the prefactor is ~0
        assert!(rep.spread_prefactor.abs() < 1e-12);
        assert!(rep.r_squared > 1.0);
    }

    #[test]
    fn moment_envelopes_hold_for_linear_growth() {
        let hist = synthetic_history(0.25);
        let rep = moment_growth_bounds(&hist, 0.0, 1e-9);
        assert!(rep.pass);
        // zero field: all bounds trivially hold
        let empty: Vec<DiagnosticsRecord> = Vec::new();
        assert!(moment_growth_bounds(&empty, 1.0, 1e-9).pass);
    }

    #[test]
    fn energy_monotone_and_dissipation_residual_on_synthetic_history() {
        let hist = synthetic_history(0.25);
        assert_eq!(max_energy_uphill(&hist), 0.0);
        // dE/dt = −1 and D = 1: residuals vanish
        for (_, res, d) in energy_dissipation_residuals(&hist) {
            assert!(res.abs() < 1e-12);
            assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn csv_writers_shape() {
        let hist = synthetic_history(0.1);
        let mut buf = Vec::new();
        write_diagnostics_csv(&hist, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DIAGNOSTICS_CSV_HEADER);
        assert_eq!(lines.len(), hist.len() + 1);
        assert_eq!(lines[1].split(',').count(), 15);

        let rows = vec![
            InequalityReport::upper_bound("x", 0.0, 1.0, 2.0, 1e-9),
            InequalityReport::lower_bound("x", 0.1, 2.0, 1.0, 1e-9),
        ];
        let mut buf = Vec::new();
        write_inequality_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(INEQUALITY_CSV_HEADER));
        assert!(text.contains(",true"));
    }
}
