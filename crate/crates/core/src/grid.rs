//! Periodic uniform grids and Fourier-diagonal linear algebra.
//!
//! Fields live in physical space as row-major `n_x * n_y` arrays (x varies
//! fastest). Every linear operator used by the steppers is a function of the
//! wavenumber, so it is applied as a pointwise multiplier on the 2D DFT.
//! Spectra use the same row-major layout as fields and are unnormalized; the
//! inverse transform divides by `n_x * n_y`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Fourier coefficients of a field, row-major, unnormalized.
pub type Spectrum = Vec<Complex64>;

/// A uniform periodic grid on `[x_min, x_max) x [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        for (name, n) in [("n_x", nx), ("n_y", ny)] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be a power of two >= 4")));
            }
        }
        let (x_min, x_max) = x_range;
        let (y_min, y_max) = y_range;
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidGrid(format!(
                "bad domain [{x_min}, {x_max}) x [{y_min}, {y_max})"
            )));
        }
        Ok(Self {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// Square `n x n` grid on `[lo, hi)^2`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(n, n, (lo, hi), (lo, hi))
    }

    /// The default `[-pi, pi)^2` domain.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        Self::square(n, -PI, PI)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    pub fn lx(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn ly(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn hx(&self) -> f64 {
        self.lx() / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly() / self.ny as f64
    }

    /// Quadrature weight of one cell.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.hx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.hy()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} on [{}, {}) x [{}, {})",
            self.nx, self.ny, self.x_min, self.x_max, self.y_min, self.y_max
        )
    }
}

/// Real samples of a scalar field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps `values`, checking the length and that every sample is finite.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f(x, y)` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            let y = grid.y(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.x(ix), y));
            }
        }
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a * self + b * other`, sample by sample.
    pub fn axpby(&self, a: f64, b: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self::from_raw(self.grid, values)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Largest pointwise difference.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        check_same(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

pub(crate) fn check_same(a: &Field, b: &Field) -> Result<()> {
    if a.grid != b.grid {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

/// Fourier multiplier sampled on every mode of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSymbol {
    grid: Grid,
    values: Vec<f64>,
}

impl OperatorSymbol {
    /// Builds a radially symmetric symbol from `|k|^2`.
    pub fn from_k2(ctx: &SpectralContext, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: ctx.grid,
            values: ctx.k2.iter().map(|&k2| f(k2)).collect(),
        }
    }

    pub fn zero(ctx: &SpectralContext) -> Self {
        Self::from_k2(ctx, |_| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise product of two symbols.
    pub fn product(&self, other: &OperatorSymbol) -> OperatorSymbol {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }
}

/// Cached wavenumbers and FFT plans for one grid.
///
/// A context is meant to be owned by a single stepping loop; it is cheap
/// enough to build one per run.
pub struct SpectralContext {
    grid: Grid,
    k2: Vec<f64>,
    // First-derivative multipliers with the Nyquist mode removed, so that
    // derivatives of real fields stay real.
    dkx: Vec<f64>,
    dky: Vec<f64>,
    dealias_mask: Option<Vec<bool>>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralContext")
            .field("grid", &self.grid)
            .field("dealias", &self.dealias_mask.is_some())
            .finish()
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SpectralContext {
    pub fn new(grid: Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let kx0 = 2.0 * PI / grid.lx();
        let ky0 = 2.0 * PI / grid.ly();
        let kx: Vec<f64> = (0..nx).map(|i| kx0 * signed_mode(i, nx) as f64).collect();
        let ky: Vec<f64> = (0..ny).map(|i| ky0 * signed_mode(i, ny) as f64).collect();

        let mut k2 = Vec::with_capacity(grid.len());
        for &kyv in &ky {
            for &kxv in &kx {
                k2.push(kxv * kxv + kyv * kyv);
            }
        }
        let dkx = (0..nx).map(|i| if i == nx / 2 { 0.0 } else { kx[i] }).collect();
        let dky = (0..ny).map(|i| if i == ny / 2 { 0.0 } else { ky[i] }).collect();

        let mut planner = FftPlanner::new();
        Self {
            grid,
            k2,
            dkx,
            dky,
            dealias_mask: None,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    /// Enables the 2/3-rule truncation used by [`SpectralContext::dealias`].
    pub fn with_dealiasing(mut self, on: bool) -> Self {
        self.dealias_mask = if on {
            let (nx, ny) = (self.grid.nx(), self.grid.ny());
            let mut mask = Vec::with_capacity(self.grid.len());
            for iy in 0..ny {
                for ix in 0..nx {
                    let keep = 3 * signed_mode(ix, nx).unsigned_abs() as usize <= nx
                        && 3 * signed_mode(iy, ny).unsigned_abs() as usize <= ny;
                    mask.push(keep);
                }
            }
            Some(mask)
        } else {
            None
        };
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|k|^2` for every mode, row-major.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub fn dealiasing(&self) -> bool {
        self.dealias_mask.is_some()
    }

    /// Zeroes the modes outside the 2/3 band when dealiasing is on.
    pub fn dealias(&self, spec: &mut Spectrum) {
        if let Some(mask) = &self.dealias_mask {
            for (c, &keep) in spec.iter_mut().zip(mask) {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid != self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (px, py) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        px.process(buf);
        let mut cols = vec![Complex64::new(0.0, 0.0); buf.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                cols[ix * ny + iy] = buf[iy * nx + ix];
            }
        }
        py.process(&mut cols);
        for ix in 0..nx {
            for iy in 0..ny {
                buf[iy * nx + ix] = cols[ix * ny + iy];
            }
        }
    }

    fn mirror(&self, idx: usize) -> usize {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (iy, ix) = (idx / nx, idx % nx);
        ((ny - iy) % ny) * nx + (nx - ix) % nx
    }

    /// Forward DFT of a real field.
    pub fn forward(&self, f: &Field) -> Result<Spectrum> {
        self.check(f)?;
        let mut buf: Spectrum = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut buf, false);
        Ok(buf)
    }

    /// Forward DFTs of two real fields using one complex transform.
    pub fn forward_pair(&self, a: &Field, b: &Field) -> Result<(Spectrum, Spectrum)> {
        self.check(a)?;
        self.check(b)?;
        let mut z: Spectrum = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        self.fft2(&mut z, false);
        let mut sa = Vec::with_capacity(z.len());
        let mut sb = Vec::with_capacity(z.len());
        for (i, &zk) in z.iter().enumerate() {
            let zm = z[self.mirror(i)].conj();
            sa.push((zk + zm) * 0.5);
            // (zk - zm) / 2i
            let d = (zk - zm) * 0.5;
            sb.push(Complex64::new(d.im, -d.re));
        }
        Ok((sa, sb))
    }

    /// Inverse DFT, keeping the real part. The spectrum is assumed Hermitian.
    pub fn inverse(&self, spec: &Spectrum) -> Field {
        let mut buf = spec.clone();
        self.fft2(&mut buf, true);
        let scale = 1.0 / self.grid.len() as f64;
        Field::from_raw(self.grid, buf.iter().map(|c| c.re * scale).collect())
    }

    /// Inverse DFTs of two Hermitian spectra using one complex transform.
    pub fn inverse_pair(&self, a: &Spectrum, b: &Spectrum) -> (Field, Field) {
        let mut buf: Spectrum = a
            .iter()
            .zip(b)
            .map(|(x, y)| Complex64::new(x.re - y.im, x.im + y.re))
            .collect();
        self.fft2(&mut buf, true);
        let scale = 1.0 / self.grid.len() as f64;
        let re = buf.iter().map(|c| c.re * scale).collect();
        let im = buf.iter().map(|c| c.im * scale).collect();
        (Field::from_raw(self.grid, re), Field::from_raw(self.grid, im))
    }

    /// Forward transforms of many fields, two per complex FFT.
    pub fn forward_many(&self, fields: &[&Field]) -> Result<Vec<Spectrum>> {
        let mut out = Vec::with_capacity(fields.len());
        for chunk in fields.chunks(2) {
            match chunk {
                [a, b] => {
                    let (sa, sb) = self.forward_pair(a, b)?;
                    out.push(sa);
                    out.push(sb);
                }
                [a] => out.push(self.forward(a)?),
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    /// Inverse transforms of many Hermitian spectra, two per complex FFT.
    pub fn inverse_many(&self, spectra: &[Spectrum]) -> Vec<Field> {
        let mut out = Vec::with_capacity(spectra.len());
        for chunk in spectra.chunks(2) {
            match chunk {
                [a, b] => {
                    let (fa, fb) = self.inverse_pair(a, b);
                    out.push(fa);
                    out.push(fb);
                }
                [a] => out.push(self.inverse(a)),
                _ => unreachable!(),
            }
        }
        out
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        let mut s = self.forward(f)?;
        for (c, &k2) in s.iter_mut().zip(&self.k2) {
            *c *= -k2;
        }
        Ok(self.inverse(&s))
    }

    /// Spectral gradient `(d/dx f, d/dy f)` from a precomputed spectrum.
    pub fn gradient_from_spectrum(&self, spec: &Spectrum) -> (Field, Field) {
        let nx = self.grid.nx();
        let mut gx = Vec::with_capacity(spec.len());
        let mut gy = Vec::with_capacity(spec.len());
        for (idx, c) in spec.iter().enumerate() {
            let (iy, ix) = (idx / nx, idx % nx);
            // multiply by i*k
            gx.push(Complex64::new(-c.im, c.re) * self.dkx[ix]);
            gy.push(Complex64::new(-c.im, c.re) * self.dky[iy]);
        }
        self.inverse_pair(&gx, &gy)
    }

    pub fn gradient(&self, f: &Field) -> Result<(Field, Field)> {
        let s = self.forward(f)?;
        Ok(self.gradient_from_spectrum(&s))
    }

    /// Spectral divergence of the vector field `(qx, qy)`.
    pub fn divergence(&self, qx: &Field, qy: &Field) -> Result<Field> {
        let (sx, sy) = self.forward_pair(qx, qy)?;
        let nx = self.grid.nx();
        let div: Spectrum = sx
            .iter()
            .zip(&sy)
            .enumerate()
            .map(|(idx, (a, b))| {
                let (iy, ix) = (idx / nx, idx % nx);
                let s = a * self.dkx[ix] + b * self.dky[iy];
                Complex64::new(-s.im, s.re)
            })
            .collect();
        Ok(self.inverse(&div))
    }

    /// Pointwise `|grad f|^2`.
    pub fn gradient_squared(&self, f: &Field) -> Result<Field> {
        let (gx, gy) = self.gradient(f)?;
        Ok(gx
            .axpby(0.0, 1.0, &gx)
            .map(|v| v * v)
            .axpby(1.0, 1.0, &gy.map(|v| v * v)))
    }

    /// Solves `-Laplacian(w) = f` for zero-mean `f`, returning the zero-mean `w`.
    pub fn inverse_neg_laplacian_zero_mean(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mean = f.mean();
        let sup = f.max_abs();
        if mean.abs() > 1e-10 * sup.max(f64::MIN_POSITIVE) && mean != 0.0 {
            return Err(Error::NonZeroMean { mean, sup });
        }
        let mut s = self.forward(f)?;
        for (c, &k2) in s.iter_mut().zip(&self.k2) {
            if k2 == 0.0 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c /= k2;
            }
        }
        Ok(self.inverse(&s))
    }

    /// Solves `(a + symbol) phi = rhs` mode by mode.
    pub fn solve_diagonal(&self, a: f64, symbol: &OperatorSymbol, rhs: &Field) -> Result<Field> {
        self.check(rhs)?;
        if symbol.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let nx = self.grid.nx();
        for (idx, &s) in symbol.values.iter().enumerate() {
            let d = a + s;
            if !(d > 0.0) {
                return Err(Error::SingularMode {
                    kx: idx % nx,
                    ky: idx / nx,
                    value: d,
                });
            }
        }
        let mut spec = self.forward(rhs)?;
        for (c, &s) in spec.iter_mut().zip(&symbol.values) {
            *c /= a + s;
        }
        Ok(self.inverse(&spec))
    }

    /// Applies a symbol to a field.
    pub fn apply_symbol(&self, symbol: &OperatorSymbol, f: &Field) -> Result<Field> {
        if symbol.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut spec = self.forward(f)?;
        for (c, &s) in spec.iter_mut().zip(&symbol.values) {
            *c *= s;
        }
        Ok(self.inverse(&spec))
    }

    /// `(S f, f)` evaluated from the spectrum of `f` by Parseval.
    ///
    /// When `spec` packs two real fields as `A + iB`, the result is the sum
    /// of both quadratic forms because `S` is real and even.
    pub fn quadratic_form(&self, symbol: &OperatorSymbol, spec: &Spectrum) -> f64 {
        let sum: f64 = spec.iter().zip(&symbol.values).map(|(c, &s)| s * c.norm_sqr()).sum();
        sum * self.grid.cell_area() / self.grid.len() as f64
    }

    /// Uniform-grid quadrature of `f` over the domain.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.grid.cell_area() * f.values.iter().sum::<f64>())
    }

    /// Discrete L2 inner product.
    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(inner_raw(&self.grid, &f.values, &g.values))
    }

    /// Discrete L2 norm.
    pub fn norm(&self, f: &Field) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }
}

pub(crate) fn inner_raw(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_area() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}
