//! Pseudospectral backbone on the truncated cylinder `[-X, X) x [0, 2 pi L)`.
//!
//! Fields are stored row-major with the x index outermost: value `(i, j)`
//! lives at `i * ny + j`, sampling `x_i = -X + i dx`, `y_j = j dy`.
//! Spectral coefficients use the same layout in FFT ordering
//! (`0, 1, .., n/2 - 1, -n/2, .., -1`).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, ZkError};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Uniform tensor grid with wavenumber tables and cached FFT plans.
#[derive(Clone)]
pub struct CylGrid<T: Real = f64> {
    nx: usize,
    ny: usize,
    half_width: T,
    period: T,
    dx: T,
    dy: T,
    x: Vec<T>,
    y: Vec<T>,
    xi: Vec<T>,
    eta: Vec<T>,
    mode_x: Vec<i64>,
    mode_y: Vec<i64>,
    fft_x: Arc<dyn Fft<T>>,
    ifft_x: Arc<dyn Fft<T>>,
    fft_y: Arc<dyn Fft<T>>,
    ifft_y: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for CylGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("half_width", &self.half_width)
            .field("period", &self.period)
            .finish()
    }
}

fn fft_modes(n: usize) -> Vec<i64> {
    let half = (n / 2) as i64;
    (0..n as i64)
        .map(|k| if k < half { k } else { k - n as i64 })
        .collect()
}

impl<T: Real> CylGrid<T> {
    /// Builds the grid. `half_width` is X, `period` is L (so y has period 2 pi L).
    pub fn new(nx: usize, ny: usize, half_width: T, period: T) -> Result<Arc<Self>> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || n % 2 != 0 {
                return Err(ZkError::InvalidGrid(format!(
                    "{name} = {n} must be even and at least 8"
                )));
            }
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(ZkError::InvalidGrid(format!(
                "half width X = {half_width} must be positive"
            )));
        }
        if !(period > T::zero()) || !period.is_finite() {
            return Err(ZkError::InvalidGrid(format!(
                "transverse period L = {period} must be positive"
            )));
        }
        let two = T::lit(2.0);
        let dx = two * half_width / T::idx(nx);
        let dy = two * T::PI() * period / T::idx(ny);
        let x = (0..nx).map(|i| -half_width + T::idx(i) * dx).collect();
        let y = (0..ny).map(|j| T::idx(j) * dy).collect();
        let mode_x = fft_modes(nx);
        let mode_y = fft_modes(ny);
        let xi = mode_x
            .iter()
            .map(|&m| T::PI() * T::lit(m as f64) / half_width)
            .collect();
        let eta = mode_y.iter().map(|&n| T::lit(n as f64) / period).collect();

        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nx,
            ny,
            half_width,
            period,
            dx,
            dy,
            x,
            y,
            xi,
            eta,
            mode_x,
            mode_y,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
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
    /// X: the x domain is `[-X, X)`.
    pub fn half_width(&self) -> T {
        self.half_width
    }
    /// L: the y domain is `[0, 2 pi L)`.
    pub fn period(&self) -> T {
        self.period
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn dy(&self) -> T {
        self.dy
    }
    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }
    pub fn x(&self) -> &[T] {
        &self.x
    }
    pub fn y(&self) -> &[T] {
        &self.y
    }
    /// x wavenumbers `pi m / X` in FFT ordering.
    pub fn xi(&self) -> &[T] {
        &self.xi
    }
    /// y wavenumbers `n / L` in FFT ordering.
    pub fn eta(&self) -> &[T] {
        &self.eta
    }
    pub fn mode_x(&self) -> &[i64] {
        &self.mode_x
    }
    pub fn mode_y(&self) -> &[i64] {
        &self.mode_y
    }

    /// Wavenumber used by odd-order derivatives: the Nyquist entry is zeroed
    /// so real fields stay real.
    pub fn xi_odd(&self, m: usize) -> T {
        if m == self.nx / 2 {
            T::zero()
        } else {
            self.xi[m]
        }
    }

    pub fn eta_odd(&self, n: usize) -> T {
        if n == self.ny / 2 {
            T::zero()
        } else {
            self.eta[n]
        }
    }

    /// Index of the FFT slot holding y mode `n` (which may be negative).
    pub fn y_slot(&self, n: i64) -> Option<usize> {
        let ny = self.ny as i64;
        if n < -ny / 2 || n >= ny / 2 {
            return None;
        }
        Some(n.rem_euclid(ny) as usize)
    }

    pub fn same_shape(&self, other: &CylGrid<T>) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.half_width == other.half_width
            && self.period == other.period
    }

    /// In-place 2D transform of a row-major buffer. Forward is unnormalized,
    /// the inverse divides by `nx * ny`.
    pub(crate) fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        let (nx, ny) = (self.nx, self.ny);
        debug_assert_eq!(buf.len(), nx * ny);
        let (fy, fx) = if inverse {
            (&self.ifft_y, &self.ifft_x)
        } else {
            (&self.fft_y, &self.fft_x)
        };
        fy.process(buf);
        let mut cols = vec![Complex::default(); nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                cols[j * nx + i] = buf[i * ny + j];
            }
        }
        fx.process(&mut cols);
        let scale = if inverse {
            T::one() / T::idx(nx * ny)
        } else {
            T::one()
        };
        for j in 0..ny {
            for i in 0..nx {
                buf[i * ny + j] = cols[j * nx + i] * scale;
            }
        }
    }

    /// 1D transform along x of a single profile (length nx).
    pub(crate) fn fft_x_line(&self, buf: &mut [Complex<T>], inverse: bool) {
        if inverse {
            self.ifft_x.process(buf);
            let s = T::one() / T::idx(self.nx);
            for z in buf.iter_mut() {
                *z = *z * s;
            }
        } else {
            self.fft_x.process(buf);
        }
    }

    /// Wraps `x` periodically into `[-X, X)`.
    pub fn wrap_x(&self, x: T) -> T {
        let two_x = self.half_width + self.half_width;
        let shifted = x + self.half_width;
        let r = shifted - (shifted / two_x).floor() * two_x;
        r - self.half_width
    }
}

/// Real-valued state on a grid.
#[derive(Clone)]
pub struct Field<T: Real = f64> {
    grid: Arc<CylGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Arc<CylGrid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<CylGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(ZkError::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(ZkError::param("values", format!("non-finite entry {v}")));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<CylGrid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x() {
            for &y in grid.y() {
                values.push(f(x, y));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// `f(x) g(y)` from sampled profiles.
    pub fn separable(grid: &Arc<CylGrid<T>>, fx: &[T], gy: &[T]) -> Self {
        assert_eq!(fx.len(), grid.nx());
        assert_eq!(gy.len(), grid.ny());
        let mut values = Vec::with_capacity(grid.len());
        for &a in fx {
            for &b in gy {
                values.push(a * b);
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// y-independent field from an x profile.
    pub fn from_x_profile(grid: &Arc<CylGrid<T>>, fx: &[T]) -> Self {
        Self::separable(grid, fx, &vec![T::one(); grid.ny()])
    }

    pub fn grid(&self) -> &Arc<CylGrid<T>> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid.ny() + j]
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_same(&self, other: &Field<T>) {
        assert!(
            self.grid.same_shape(&other.grid),
            "fields live on different grids"
        );
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Self {
        self.check_same(other);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Field<T>) {
        self.check_same(other);
        for (v, &w) in self.values.iter_mut().zip(&other.values) {
            *v = *v + a * w;
        }
    }

    /// Pointwise product.
    pub fn mul_pointwise(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// L2 inner product by the uniform-grid Riemann sum.
    pub fn dot(&self, other: &Field<T>) -> T {
        self.check_same(other);
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum();
        s * self.grid.cell_area()
    }

    pub fn norm_l2_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm_l2(&self) -> T {
        self.norm_l2_sq().sqrt()
    }

    /// `||u||^2 + ||grad u||^2` with spectral derivatives.
    pub fn norm_h1_sq(&self) -> T {
        let spec = to_spectral(self);
        let g = &self.grid;
        let mut acc = T::zero();
        for m in 0..g.nx() {
            let kx = g.xi_odd(m);
            for n in 0..g.ny() {
                let ky = g.eta_odd(n);
                acc = acc + (T::one() + kx * kx + ky * ky) * spec.coeffs[m * g.ny() + n].norm_sqr();
            }
        }
        acc * g.cell_area() / T::idx(g.len())
    }

    pub fn norm_h1(&self) -> T {
        self.norm_h1_sq().sqrt()
    }

    /// `||grad u||^2`.
    pub fn gradient_sq(&self) -> T {
        self.norm_h1_sq() - self.norm_l2_sq()
    }

    pub fn to_spectral(&self) -> SpectralField<T> {
        to_spectral(self)
    }

    pub fn derivative(&self, axis: Axis, order: u32) -> Result<Self> {
        derivative(self, axis, order)
    }

    /// `dx^a dy^b` in one spectral pass (orders up to 4 each).
    pub fn partial(&self, ax: u32, ay: u32) -> Self {
        let g = self.grid.clone();
        let sym = move |m: usize, n: usize| {
            derivative_symbol(&g, Axis::X, ax, m) * derivative_symbol(&g, Axis::Y, ay, n)
        };
        self.apply_symbol(sym)
    }

    pub fn dx1(&self) -> Self {
        self.partial(1, 0)
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid.clone();
        self.apply_symbol(move |m, n| {
            let k2 = g.xi()[m] * g.xi()[m] + g.eta()[n] * g.eta()[n];
            Complex::new(-k2, T::zero())
        })
    }

    /// Applies a Fourier multiplier `symbol(m_slot, n_slot)`.
    pub fn apply_symbol(&self, symbol: impl Fn(usize, usize) -> Complex<T>) -> Self {
        let mut spec = to_spectral(self);
        let ny = self.grid.ny();
        for m in 0..self.grid.nx() {
            for n in 0..ny {
                spec.coeffs[m * ny + n] = spec.coeffs[m * ny + n] * symbol(m, n);
            }
        }
        from_spectral(&spec)
    }

    /// Spectral translation `(tau_q u)(x, y) = u(x - q, y)`.
    pub fn shift_x(&self, q: T) -> Self {
        let g = self.grid.clone();
        let nyq = g.nx() / 2;
        self.apply_symbol(move |m, _| {
            let phase = g.xi()[m] * q;
            if m == nyq {
                Complex::new(phase.cos(), T::zero())
            } else {
                Complex::new(phase.cos(), -phase.sin())
            }
        })
    }

    /// `u(-x, y)` on the periodic grid (index `i -> (nx - i) mod nx`).
    pub fn reflect_x(&self) -> Self {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut values = vec![T::zero(); nx * ny];
        for i in 0..nx {
            let r = (nx - i) % nx;
            values[r * ny..(r + 1) * ny].copy_from_slice(&self.values[i * ny..(i + 1) * ny]);
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Band-limits the field with the two-thirds rule.
    pub fn dealiased(&self) -> Self {
        from_spectral(&dealias(&to_spectral(self)))
    }

    /// Mean over y for each x (the transverse zero mode).
    pub fn y_mean(&self) -> Vec<T> {
        let ny = self.grid.ny();
        self.values
            .chunks(ny)
            .map(|row| row.iter().copied().sum::<T>() / T::idx(ny))
            .collect()
    }
}

impl<T: Real> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: &Field<T>) -> Field<T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: &Field<T>) -> Field<T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<T: Real> Neg for &Field<T> {
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.map(|a| -a)
    }
}

impl<T: Real> Mul<T> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, s: T) -> Field<T> {
        self.scale(s)
    }
}

/// Fourier coefficients of a real field (unnormalized forward DFT).
#[derive(Clone, Debug)]
pub struct SpectralField<T: Real = f64> {
    grid: Arc<CylGrid<T>>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn grid(&self) -> &Arc<CylGrid<T>> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn from_coeffs(grid: &Arc<CylGrid<T>>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(ZkError::ShapeMismatch(format!(
                "{} coefficients for a {}x{} grid",
                coeffs.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Coefficient at FFT slots `(m, n)`.
    pub fn at(&self, m: usize, n: usize) -> Complex<T> {
        self.coeffs[m * self.grid.ny() + n]
    }

    /// `dx dy / (nx ny) * sum |F|^2`, equal to `sum |f|^2 dx dy` by Parseval.
    pub fn weighted_energy(&self) -> T {
        let s: T = self.coeffs.iter().map(|z| z.norm_sqr()).sum();
        s * self.grid.cell_area() / T::idx(self.grid.len())
    }

    /// Largest deviation from `F(-m, -n) = conj F(m, n)`.
    pub fn hermitian_defect(&self) -> T {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut worst = T::zero();
        for m in 0..nx {
            for n in 0..ny {
                let a = self.coeffs[m * ny + n];
                let b = self.coeffs[((nx - m) % nx) * ny + (ny - n) % ny].conj();
                let d = (a - b).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

pub fn to_spectral<T: Real>(f: &Field<T>) -> SpectralField<T> {
    let mut buf: Vec<Complex<T>> = f.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    f.grid.fft2(&mut buf, false);
    SpectralField {
        grid: f.grid.clone(),
        coeffs: buf,
    }
}

pub fn from_spectral<T: Real>(spec: &SpectralField<T>) -> Field<T> {
    let mut buf = spec.coeffs.clone();
    spec.grid.fft2(&mut buf, true);
    Field {
        grid: spec.grid.clone(),
        values: buf.into_iter().map(|z| z.re).collect(),
    }
}

/// `(i k)^order` for the wavenumber at slot `idx` along `axis`.
pub fn derivative_symbol<T: Real>(grid: &CylGrid<T>, axis: Axis, order: u32, idx: usize) -> Complex<T> {
    if order == 0 {
        return Complex::new(T::one(), T::zero());
    }
    let k = match (axis, order % 2 == 1) {
        (Axis::X, true) => grid.xi_odd(idx),
        (Axis::X, false) => grid.xi()[idx],
        (Axis::Y, true) => grid.eta_odd(idx),
        (Axis::Y, false) => grid.eta()[idx],
    };
    Complex::new(T::zero(), k).powu(order)
}

/// Spectral derivative of order 1, 2 or 3 along one axis.
pub fn derivative<T: Real>(f: &Field<T>, axis: Axis, order: u32) -> Result<Field<T>> {
    if !(1..=3).contains(&order) {
        return Err(ZkError::param("order", format!("{order} not in 1..=3")));
    }
    let g = f.grid.clone();
    Ok(f.apply_symbol(move |m, n| {
        let idx = if axis == Axis::X { m } else { n };
        derivative_symbol(&g, axis, order, idx)
    }))
}

pub fn inner_l2<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<T> {
    if !f.grid.same_shape(&g.grid) {
        return Err(ZkError::ShapeMismatch(
            "inner product of fields on different grids".into(),
        ));
    }
    Ok(f.dot(g))
}

/// Two-thirds rule: zero every coefficient with `|m| > nx/3` or `|n| > ny/3`.
pub fn dealias<T: Real>(spec: &SpectralField<T>) -> SpectralField<T> {
    let g = &spec.grid;
    let (cx, cy) = ((g.nx() / 3) as i64, (g.ny() / 3) as i64);
    let mut out = spec.clone();
    for (m, &mx) in g.mode_x().iter().enumerate() {
        for (n, &my) in g.mode_y().iter().enumerate() {
            if mx.abs() > cx || my.abs() > cy {
                out.coeffs[m * g.ny() + n] = Complex::default();
            }
        }
    }
    out
}

/// Mask of retained modes under the two-thirds rule, row-major like the coefficients.
pub(crate) fn dealias_mask<T: Real>(g: &CylGrid<T>) -> Vec<bool> {
    let (cx, cy) = ((g.nx() / 3) as i64, (g.ny() / 3) as i64);
    let mut mask = Vec::with_capacity(g.len());
    for &mx in g.mode_x() {
        for &my in g.mode_y() {
            mask.push(mx.abs() <= cx && my.abs() <= cy);
        }
    }
    mask
}

/// Spectral derivative of a 1D x profile.
pub fn profile_derivative<T: Real>(grid: &CylGrid<T>, f: &[T], order: u32) -> Vec<T> {
    let mut buf: Vec<Complex<T>> = f.iter().map(|&v| Complex::new(v, T::zero())).collect();
    grid.fft_x_line(&mut buf, false);
    for (m, z) in buf.iter_mut().enumerate() {
        *z = *z * derivative_symbol(grid, Axis::X, order, m);
    }
    grid.fft_x_line(&mut buf, true);
    buf.into_iter().map(|z| z.re).collect()
}

/// Spectral translation of a 1D x profile, `f(x - q)`.
pub fn profile_shift<T: Real>(grid: &CylGrid<T>, f: &[T], q: T) -> Vec<T> {
    let mut buf: Vec<Complex<T>> = f.iter().map(|&v| Complex::new(v, T::zero())).collect();
    grid.fft_x_line(&mut buf, false);
    let nyq = grid.nx() / 2;
    for (m, z) in buf.iter_mut().enumerate() {
        let phase = grid.xi()[m] * q;
        let w = if m == nyq {
            Complex::new(phase.cos(), T::zero())
        } else {
            Complex::new(phase.cos(), -phase.sin())
        };
        *z = *z * w;
    }
    grid.fft_x_line(&mut buf, true);
    buf.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Arc<CylGrid> {
        CylGrid::<f64>::new(256, 32, 30.0, 1.0).unwrap()
    }

    #[test]
    fn spacing_and_tables() {
        let g = grid();
        assert!((g.dx() - 60.0 / 256.0).abs() < 1e-15);
        assert!((g.eta()[1] - 1.0).abs() < 1e-15);
        assert_eq!(g.eta()[0], 0.0);
        assert!((g.eta()[31] + 1.0).abs() < 1e-15);
        // symmetric tables: slot of -m holds -xi_m
        for m in 1..g.nx() / 2 {
            assert_eq!(g.xi()[m], -g.xi()[g.nx() - m]);
        }
        for n in 1..g.ny() / 2 {
            assert_eq!(g.eta()[n], -g.eta()[g.ny() - n]);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            CylGrid::<f64>::new(255, 32, 30.0, 1.0),
            Err(ZkError::InvalidGrid(_))
        ));
        assert!(CylGrid::<f64>::new(6, 32, 30.0, 1.0).is_err());
        assert!(CylGrid::<f64>::new(256, 32, 0.0, 1.0).is_err());
        assert!(CylGrid::<f64>::new(256, 32, 30.0, -1.0).is_err());
    }

    #[test]
    fn cosine_has_one_coefficient_pair() {
        let g = grid();
        let f = Field::from_fn(&g, |_, y| y.cos());
        let s = f.to_spectral();
        let big: Vec<(usize, usize)> = (0..g.nx())
            .flat_map(|m| (0..g.ny()).map(move |n| (m, n)))
            .filter(|&(m, n)| s.at(m, n).norm() > 1e-9)
            .collect();
        assert_eq!(big, vec![(0, 1), (0, g.ny() - 1)]);
    }

    #[test]
    fn parseval() {
        let g = grid();
        let f = Field::from_fn(&g, |x, y| (-x * x / 10.0).exp() * (1.0 + 0.3 * (2.0 * y).sin()));
        let s = f.to_spectral();
        assert!((s.weighted_energy() - f.norm_l2_sq()).abs() < 1e-12 * f.norm_l2_sq());
    }

    #[test]
    fn derivatives() {
        let g = grid();
        let k1 = g.xi()[1];
        let f = Field::from_fn(&g, |x, _| (k1 * x).sin());
        let d = f.derivative(Axis::X, 1).unwrap();
        let exact = Field::from_fn(&g, |x, _| k1 * (k1 * x).cos());
        assert!((&d - &exact).max_abs() < 1e-10);

        let xonly = Field::from_fn(&g, |x, _| (-x * x).exp());
        assert!(xonly.derivative(Axis::Y, 1).unwrap().max_abs() < 1e-12);

        let lap = xonly.laplacian();
        let exact = Field::from_fn(&g, |x, _| (4.0 * x * x - 2.0) * (-x * x).exp());
        assert!((&lap - &exact).max_abs() < 1e-8);

        assert!(f.derivative(Axis::X, 4).is_err());
    }

    #[test]
    fn inner_products() {
        let g = CylGrid::<f64>::new(64, 16, 10.0, 1.0).unwrap();
        let a = Field::from_fn(&g, |_, y| y.cos());
        let b = Field::from_fn(&g, |_, y| (2.0 * y).cos());
        assert!(inner_l2(&a, &b).unwrap().abs() < 1e-12);
        assert_eq!(inner_l2(&a, &Field::zeros(&g)).unwrap(), 0.0);
        // integral of cos^2 over the cylinder: 2X * pi L
        assert!((a.norm_l2_sq() - 20.0 * PI).abs() < 1e-10);
        let other = CylGrid::<f64>::new(32, 16, 10.0, 1.0).unwrap();
        assert!(inner_l2(&a, &Field::zeros(&other)).is_err());
    }

    #[test]
    fn dealias_behaviour() {
        let g = CylGrid::<f64>::new(32, 8, 5.0, 1.0).unwrap();
        let smooth = Field::from_fn(&g, |x, y| (g.xi()[2] * x).cos() * y.sin());
        let d = smooth.dealiased();
        assert!((&d - &smooth).max_abs() < 1e-13);

        let nyq = Field::from_fn(&g, |x, _| (g.xi()[16] * x).cos());
        assert!(nyq.max_abs() > 0.5);
        assert!(nyq.dealiased().max_abs() < 1e-13);

        let rough = Field::from_fn(&g, |x, y| (3.0 * x).sin() * (1.0 + (3.0 * y).cos()) + x.cos());
        let once = dealias(&rough.to_spectral());
        let twice = dealias(&once);
        for (a, b) in once.coeffs().iter().zip(twice.coeffs()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shift_and_reflect() {
        let g = CylGrid::<f64>::new(128, 8, 20.0, 1.0).unwrap();
        let f = Field::from_fn(&g, |x, y| (-(x - 1.0) * (x - 1.0)).exp() * (1.0 + 0.1 * y.cos()));
        let shifted = f.shift_x(0.7);
        let exact = Field::from_fn(&g, |x, y| (-(x - 1.7) * (x - 1.7)).exp() * (1.0 + 0.1 * y.cos()));
        assert!((&shifted - &exact).max_abs() < 1e-10);
        let refl = f.reflect_x();
        let exact = Field::from_fn(&g, |x, y| (-(x + 1.0) * (x + 1.0)).exp() * (1.0 + 0.1 * y.cos()));
        assert!((&refl - &exact).max_abs() < 1e-12);
    }

    #[test]
    fn single_precision_backbone() {
        let g = CylGrid::<f32>::new(64, 8, 10.0, 1.0).unwrap();
        let f = Field::from_fn(&g, |x, _| (-x * x).exp());
        let back = from_spectral(&to_spectral(&f));
        assert!((&back - &f).max_abs() < 1e-5);
    }
}
