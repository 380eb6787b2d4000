//! Cell-centered uniform grid on the truncated square [-L, L]² with the
//! quadrature and mirror-symmetry utilities every functional is built from.
//!
//! The cell count per side is even, so no cell center ever sits on the
//! x₂ = 0 axis and the upper/lower half-plane split is exact.

use std::io::{BufRead, Write};

use crate::error::{PksError, Result};

/// Neumaier compensated sum.
pub(crate) fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Uniform cell-centered grid on [-L, L]².
///
/// Cell (i, j) has center (-L + (i+½)h, -L + (j+½)h) with h = 2L/N.
/// i indexes x₁, j indexes x₂; storage is row-major with j outermost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    spacing: f64,
}

impl Grid2D {
    pub fn new(cells_per_side: usize, half_width: f64) -> Result<Self> {
        if cells_per_side == 0 || cells_per_side % 2 != 0 {
            return Err(PksError::InvalidGrid(format!(
                "N must be a positive even integer, got {cells_per_side}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(PksError::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            n: cells_per_side,
            half_width,
            spacing: 2.0 * half_width / cells_per_side as f64,
        })
    }

    #[inline]
    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Cell area h².
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        j * self.n + i
    }

    /// x₁ coordinate of column i.
    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing
    }

    /// x₂ coordinate of row j.
    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        -self.half_width + (j as f64 + 0.5) * self.spacing
    }

    /// Row index mirrored across the x₁-axis.
    #[inline]
    pub fn mirror_row(&self, j: usize) -> usize {
        self.n - 1 - j
    }
}

/// Polynomial weights accepted by [`DensityField::moment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentWeight {
    /// Constant 1 (the mass).
    One,
    /// |x|² = x₁² + x₂².
    RadiusSquared,
    /// x₂² − x₁², the skew moment driving the strain coupling.
    Skew,
    /// x₁⁴ + x₂⁴.
    Fourth,
    /// x₂ (odd; vanishes on mirror-symmetric fields).
    Vertical,
    /// Monomial x₁^px · x₂^py.
    Monomial { px: u32, py: u32 },
}

impl MomentWeight {
    #[inline]
    fn eval(&self, x1: f64, x2: f64) -> f64 {
        match *self {
            MomentWeight::One => 1.0,
            MomentWeight::RadiusSquared => x1 * x1 + x2 * x2,
            MomentWeight::Skew => x2 * x2 - x1 * x1,
            MomentWeight::Fourth => {
                let a = x1 * x1;
                let b = x2 * x2;
                a * a + b * b
            }
            MomentWeight::Vertical => x2,
            MomentWeight::Monomial { px, py } => x1.powi(px as i32) * x2.powi(py as i32),
        }
    }
}

/// Upper-half-plane statistics: mass, vertical center of mass, and the
/// vertical spread about it.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlaneStats {
    pub mass: f64,
    pub center: f64,
    pub spread: f64,
}

/// Nonnegative cell-averaged density on a [`Grid2D`].
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cell_count()],
        }
    }

    /// Sample a function at cell centers.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.cells_per_side();
        let mut values = vec![0.0; grid.cell_count()];
        for j in 0..n {
            let x2 = grid.x2(j);
            for i in 0..n {
                values[grid.idx(i, j)] = f(grid.x1(i), x2);
            }
        }
        Self { grid, values }
    }

    /// Isotropic Gaussian bump of total mass `mass`, std `sigma`, centered
    /// at `center`, sampled at cell centers.
    pub fn gaussian(grid: Grid2D, mass: f64, center: (f64, f64), sigma: f64) -> Self {
        let amp = mass / (2.0 * std::f64::consts::PI * sigma * sigma);
        let inv = 1.0 / (2.0 * sigma * sigma);
        Self::from_fn(grid, |x1, x2| {
            let dx = x1 - center.0;
            let dy = x2 - center.1;
            amp * (-(dx * dx + dy * dy) * inv).exp()
        })
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint quadrature h² Σ f_ij; exact for cell-averaged data.
    /// Compensated summation so the conservation ledgers are not polluted
    /// by the quadrature's own rounding.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_area() * neumaier_sum(&self.values)
    }

    /// h² Σ w(x_ij) f_ij for a polynomial weight.
    pub fn moment(&self, weight: MomentWeight) -> f64 {
        let n = self.grid.cells_per_side();
        let mut acc = 0.0;
        for j in 0..n {
            let x2 = self.grid.x2(j);
            let row = &self.values[j * n..(j + 1) * n];
            let mut row_acc = 0.0;
            for (i, &v) in row.iter().enumerate() {
                row_acc += weight.eval(self.grid.x1(i), x2) * v;
            }
            acc += row_acc;
        }
        self.grid.cell_area() * acc
    }

    /// Mass, vertical center, and vertical spread restricted to x₂ > 0.
    ///
    /// The spread weight is |x₂ − y₊|²; use
    /// [`DensityField::half_plane_spread_full`] for the full-position
    /// variant |x − (0, y₊)|².
    ///
    /// Only meaningful for fields symmetric about the x₁-axis; a warning is
    /// logged otherwise.
    pub fn half_plane_stats(&self) -> Result<HalfPlaneStats> {
        let sym = self.mirror_symmetry_error();
        let peak = self.max_value();
        if peak > 0.0 && sym > 1e-9 * peak {
            log::warn!(
                "half_plane_stats on an asymmetric field (mirror error {:.3e} vs max {:.3e})",
                sym,
                peak
            );
        }
        let n = self.grid.cells_per_side();
        let h2 = self.grid.cell_area();
        let mut mass = 0.0;
        let mut first = 0.0;
        for j in n / 2..n {
            let x2 = self.grid.x2(j);
            let row: f64 = self.values[j * n..(j + 1) * n].iter().sum();
            mass += row;
            first += x2 * row;
        }
        mass *= h2;
        first *= h2;
        if mass <= 0.0 {
            return Err(PksError::EmptyUpperHalfPlane);
        }
        let center = first / mass;
        let mut spread = 0.0;
        for j in n / 2..n {
            let d = self.grid.x2(j) - center;
            let row: f64 = self.values[j * n..(j + 1) * n].iter().sum();
            spread += d * d * row;
        }
        spread *= h2;
        Ok(HalfPlaneStats {
            mass,
            center,
            spread,
        })
    }

    /// ∫_{x₂>0} n |x − (0, y₊)|² dx, the alternate spread weight.
    pub fn half_plane_spread_full(&self, center: f64) -> f64 {
        let n = self.grid.cells_per_side();
        let h2 = self.grid.cell_area();
        let mut acc = 0.0;
        for j in n / 2..n {
            let dy = self.grid.x2(j) - center;
            for i in 0..n {
                let dx = self.grid.x1(i);
                acc += (dx * dx + dy * dy) * self.values[self.grid.idx(i, j)];
            }
        }
        h2 * acc
    }

    /// Mass of the strip |x₂| ≤ half_width (by cell center).
    pub fn strip_mass(&self, half_width: f64) -> f64 {
        let n = self.grid.cells_per_side();
        let mut acc = 0.0;
        for j in 0..n {
            if self.grid.x2(j).abs() <= half_width {
                acc += self.values[j * n..(j + 1) * n].iter().sum::<f64>();
            }
        }
        self.grid.cell_area() * acc
    }

    /// Mass in the outermost ring of cells; reported so that box-truncation
    /// drift is observable.
    pub fn boundary_ring_mass(&self) -> f64 {
        let n = self.grid.cells_per_side();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.at(i, 0) + self.at(i, n - 1);
        }
        for j in 1..n - 1 {
            acc += self.at(0, j) + self.at(n - 1, j);
        }
        self.grid.cell_area() * acc
    }

    /// max_ij |f(i, j) − f(i, N−1−j)|.
    pub fn mirror_symmetry_error(&self) -> f64 {
        let n = self.grid.cells_per_side();
        let mut worst = 0.0f64;
        for j in 0..n / 2 {
            let jm = self.grid.mirror_row(j);
            for i in 0..n {
                let d = (self.values[self.grid.idx(i, j)] - self.values[self.grid.idx(i, jm)]).abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest mass found in any 3×3 cell block.
    pub fn max_block3_mass(&self) -> f64 {
        let n = self.grid.cells_per_side();
        let mut worst = 0.0f64;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let mut s = 0.0;
                for dj in 0..3 {
                    let base = (j + dj - 1) * n + (i - 1);
                    s += self.values[base] + self.values[base + 1] + self.values[base + 2];
                }
                worst = worst.max(s);
            }
        }
        self.grid.cell_area() * worst
    }

    /// Write the `PKS-FIELD v1` snapshot format: a header line followed by
    /// N rows of N floats, j (the x₂ index) outermost.
    pub fn write_snapshot(&self, w: &mut impl Write, t: f64) -> Result<()> {
        let n = self.grid.cells_per_side();
        writeln!(
            w,
            "PKS-FIELD v1 N={} L={:.16e} t={:.16e}",
            n,
            self.grid.half_width(),
            t
        )?;
        let mut line = String::with_capacity(n * 26);
        for j in 0..n {
            line.clear();
            for i in 0..n {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:.16e}", self.values[self.grid.idx(i, j)]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Read a `PKS-FIELD v1` snapshot; returns the field and its timestamp.
    pub fn read_snapshot(r: &mut impl BufRead) -> Result<(Self, f64)> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim_end();
        let mut n: Option<usize> = None;
        let mut l: Option<f64> = None;
        let mut t: Option<f64> = None;
        let mut words = header.split_whitespace();
        if words.next() != Some("PKS-FIELD") || words.next() != Some("v1") {
            return Err(PksError::SnapshotFormat(format!(
                "bad header line: {header:?}"
            )));
        }
        for w in words {
            if let Some(v) = w.strip_prefix("N=") {
                n = v.parse().ok();
            } else if let Some(v) = w.strip_prefix("L=") {
                l = v.parse().ok();
            } else if let Some(v) = w.strip_prefix("t=") {
                t = v.parse().ok();
            }
        }
        let (n, l, t) = match (n, l, t) {
            (Some(n), Some(l), Some(t)) => (n, l, t),
            _ => {
                return Err(PksError::SnapshotFormat(format!(
                    "missing N=/L=/t= in header: {header:?}"
                )))
            }
        };
        let grid = Grid2D::new(n, l)?;
        let mut field = DensityField::zeros(grid);
        let mut line = String::new();
        for j in 0..n {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(PksError::SnapshotFormat(format!("truncated at row {j}")));
            }
            let mut count = 0;
            for (i, tok) in line.split_whitespace().enumerate() {
                if i >= n {
                    return Err(PksError::SnapshotFormat(format!("row {j} too long")));
                }
                field.values[grid.idx(i, j)] = tok.parse().map_err(|_| {
                    PksError::SnapshotFormat(format!("bad float {tok:?} at row {j}"))
                })?;
                count += 1;
            }
            if count != n {
                return Err(PksError::SnapshotFormat(format!(
                    "row {j} has {count} entries, expected {n}"
                )));
            }
        }
        Ok((field, t))
    }
}

/// Two N×N component arrays on a shared grid; houses drifts like ∇c and b.
#[derive(Debug, Clone)]
pub struct VectorField2D {
    grid: Grid2D,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl VectorField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            x1: vec![0.0; grid.cell_count()],
            x2: vec![0.0; grid.cell_count()],
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.idx(i, j);
        (self.x1[k], self.x2[k])
    }

    #[inline]
    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x1, &mut self.x2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_odd_or_degenerate() {
        assert!(Grid2D::new(255, 8.0).is_err());
        assert!(Grid2D::new(0, 8.0).is_err());
        assert!(Grid2D::new(256, 0.0).is_err());
        assert!(Grid2D::new(256, -1.0).is_err());
    }

    #[test]
    fn no_cell_center_on_axis_and_mirror_pairs_negate() {
        let g = Grid2D::new(64, 8.0).unwrap();
        for j in 0..64 {
            assert!(g.x2(j) != 0.0);
            // exact negation because L and N are powers of two
            assert_eq!(g.x2(g.mirror_row(j)), -g.x2(j));
        }
    }

    #[test]
    fn integrate_uniform_is_box_area() {
        let g = Grid2D::new(4, 1.0).unwrap();
        let f = DensityField::from_fn(g, |_, _| 1.0);
        assert_relative_eq!(f.integrate(), 4.0, max_relative = 1e-15);
    }

    #[test]
    fn integrate_zero_field() {
        let g = Grid2D::new(4, 1.0).unwrap();
        assert_eq!(DensityField::zeros(g).integrate(), 0.0);
    }

    #[test]
    fn integrate_gaussian_recovers_mass() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 4.0 * PI;
        let f = DensityField::gaussian(g, mass, (0.0, 0.0), 0.5);
        // midpoint quadrature of a well-resolved Gaussian is spectrally accurate
        assert_relative_eq!(f.integrate(), mass, max_relative = 1e-8);
    }

    #[test]
    fn integrate_is_linear_and_monotone() {
        let g = Grid2D::new(32, 2.0).unwrap();
        let f = DensityField::gaussian(g, 1.0, (0.3, -0.4), 0.5);
        let gfield = DensityField::gaussian(g, 2.0, (-0.2, 0.1), 0.7);
        let mut sum = DensityField::zeros(g);
        for k in 0..sum.values.len() {
            sum.values_mut()[k] = f.values()[k] + gfield.values()[k];
        }
        assert_relative_eq!(
            sum.integrate(),
            f.integrate() + gfield.integrate(),
            max_relative = 1e-12
        );
        // f ≤ f + g pointwise ⇒ integrals ordered
        assert!(f.integrate() <= sum.integrate());
    }

    #[test]
    fn moment_symmetric_gaussian_skew_vanishes() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let f = DensityField::gaussian(g, 4.0 * PI, (0.0, 0.0), 0.8);
        assert!(f.moment(MomentWeight::Skew).abs() < 1e-12);
    }

    #[test]
    fn moment_radius_squared_of_gaussian() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 4.0 * PI;
        let sigma = 0.7;
        let f = DensityField::gaussian(g, mass, (0.0, 0.0), sigma);
        // ∫ |x|² G = 2 M σ² for an isotropic Gaussian
        assert_relative_eq!(
            f.moment(MomentWeight::RadiusSquared),
            2.0 * mass * sigma * sigma,
            max_relative = 1e-8
        );
    }

    #[test]
    fn moment_offset_bump_radius_squared() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 2.0;
        let sigma = 0.2;
        let y0 = 1.5;
        let f = DensityField::gaussian(g, mass, (0.0, y0), sigma);
        // M y₀² + 2 M σ²
        assert_relative_eq!(
            f.moment(MomentWeight::RadiusSquared),
            mass * y0 * y0 + 2.0 * mass * sigma * sigma,
            max_relative = 1e-8
        );
    }

    #[test]
    fn moment_vertical_odd_weight_vanishes_on_symmetric_field() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let mut f = DensityField::gaussian(g, 2.0, (0.0, 2.0), 0.4);
        let lower = DensityField::gaussian(g, 2.0, (0.0, -2.0), 0.4);
        for k in 0..f.values.len() {
            f.values_mut()[k] += lower.values()[k];
        }
        let scale = f.moment(MomentWeight::Monomial { px: 0, py: 0 });
        assert!(f.moment(MomentWeight::Vertical).abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn half_plane_two_bump_matches_analytic() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let mass = 12.0 * PI;
        let sigma = 0.3;
        let y0 = 3.0;
        let mut f = DensityField::gaussian(g, mass / 2.0, (0.0, y0), sigma);
        let lower = DensityField::gaussian(g, mass / 2.0, (0.0, -y0), sigma);
        for k in 0..f.values.len() {
            f.values_mut()[k] += lower.values()[k];
        }
        let s = f.half_plane_stats().unwrap();
        // bumps are 10σ from the axis: cross-tail corrections ~ exp(-50)
        assert_relative_eq!(s.mass, mass / 2.0, max_relative = 1e-10);
        assert_relative_eq!(s.center, y0, max_relative = 1e-9);
        assert_relative_eq!(s.spread, (mass / 2.0) * sigma * sigma, max_relative = 1e-6);
        // the full-position spread adds the horizontal variance M₊σ²
        let full = f.half_plane_spread_full(s.center);
        assert_relative_eq!(
            full,
            s.spread + s.mass * sigma * sigma,
            max_relative = 1e-6
        );
    }

    #[test]
    fn half_plane_single_gaussian_is_half_normal() {
        let g = Grid2D::new(512, 8.0).unwrap();
        let mass = 4.0 * PI;
        let sigma = 1.0;
        let f = DensityField::gaussian(g, mass, (0.0, 0.0), sigma);
        let s = f.half_plane_stats().unwrap();
        // half-normal mean σ√(2/π), variance σ²(1 − 2/π)
        assert_relative_eq!(s.center, sigma * (2.0 / PI).sqrt(), max_relative = 2e-4);
        assert_relative_eq!(
            s.spread,
            s.mass * sigma * sigma * (1.0 - 2.0 / PI),
            max_relative = 2e-3
        );
    }

    #[test]
    fn half_plane_mass_is_half_of_total_for_mirror_symmetric() {
        let g = Grid2D::new(128, 8.0).unwrap();
        let f = DensityField::gaussian(g, 5.0, (0.4, 0.0), 0.9);
        let s = f.half_plane_stats().unwrap();
        assert_relative_eq!(s.mass, f.integrate() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn half_plane_zero_field_errors() {
        let g = Grid2D::new(16, 1.0).unwrap();
        assert!(matches!(
            DensityField::zeros(g).half_plane_stats(),
            Err(PksError::EmptyUpperHalfPlane)
        ));
    }

    #[test]
    fn strip_mass_tail_and_total() {
        let g = Grid2D::new(256, 8.0).unwrap();
        let sigma = 0.2;
        let y0 = 10.0 * sigma;
        let mass = 4.0;
        let mut f = DensityField::gaussian(g, mass / 2.0, (0.0, y0), sigma);
        let lower = DensityField::gaussian(g, mass / 2.0, (0.0, -y0), sigma);
        for k in 0..f.values.len() {
            f.values_mut()[k] += lower.values()[k];
        }
        // mass within 2σ of the axis is a ~8σ Gaussian tail
        assert!(f.strip_mass(2.0 * sigma) < 1e-8 * mass);
        assert_relative_eq!(f.strip_mass(g.half_width()), f.integrate(), max_relative = 1e-14);
    }

    #[test]
    fn strip_mass_uniform_half_box() {
        let g = Grid2D::new(64, 2.0).unwrap();
        let f = DensityField::from_fn(g, |_, _| 1.0);
        let m = f.integrate();
        let half = f.strip_mass(g.half_width() / 2.0);
        assert!((half - m / 2.0).abs() <= m * g.spacing() / g.half_width());
    }

    #[test]
    fn strip_mass_monotone_in_width() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let f = DensityField::gaussian(g, 3.0, (0.5, 0.7), 0.8);
        let mut prev = 0.0;
        for k in 1..=8 {
            let m = f.strip_mass(0.5 * k as f64);
            assert!(m >= prev);
            prev = m;
        }
        assert!(prev <= f.integrate() + 1e-14);
    }

    #[test]
    fn mirror_error_zero_for_mirrored_and_large_for_offset() {
        let g = Grid2D::new(64, 4.0).unwrap();
        let f = DensityField::from_fn(g, |x1, x2| (x1 * x2).cos() * x2.abs());
        assert_eq!(f.mirror_symmetry_error(), 0.0);
        let bump = DensityField::gaussian(g, 1.0, (0.0, 1.5), 0.3);
        let err = bump.mirror_symmetry_error();
        assert!(err > 0.99 * bump.max_value());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid2D::new(32, 2.0).unwrap();
        let f = DensityField::gaussian(g, 2.5, (0.25, -0.5), 0.4);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf, 1.25).unwrap();
        let (back, t) = DensityField::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(t, 1.25);
        assert_eq!(back.grid().cells_per_side(), 32);
        for k in 0..f.values().len() {
            assert_eq!(back.values()[k], f.values()[k]);
        }
    }

    #[test]
    fn snapshot_rejects_garbage() {
        let mut bad = "PKS-FIELD v2 N=4 L=1 t=0\n".as_bytes();
        assert!(DensityField::read_snapshot(&mut bad).is_err());
        let mut truncated = "PKS-FIELD v1 N=4 L=1.0 t=0.0\n1 2 3 4\n".as_bytes();
        assert!(DensityField::read_snapshot(&mut truncated).is_err());
    }

    #[test]
    fn max_block3_mass_of_point_cell() {
        let g = Grid2D::new(32, 2.0).unwrap();
        let mut f = DensityField::zeros(g);
        let k = g.idx(10, 20);
        f.values_mut()[k] = 7.0;
        assert_relative_eq!(f.max_block3_mass(), 7.0 * g.cell_area(), max_relative = 1e-15);
    }
}
