//! Uniform grids, complex fields and the quadrature primitives every other
//! module is built on.
//!
//! The spatial grid uses the periodic convention: nodes `x_j = -L + j dx` for
//! `j = 0..n`, the right endpoint `x = L` is not a node, and integrals are
//! rectangle (equivalently periodic trapezoid) sums.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 64;

/// Uniform periodic grid on `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    half_width: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!("half width must be positive, got {half_width}")));
        }
        if n_points < MIN_GRID_POINTS || n_points % 2 != 0 {
            return Err(Error::invalid(format!(
                "n_points must be even and >= {MIN_GRID_POINTS}, got {n_points}"
            )));
        }
        Ok(Self { half_width, n_points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Largest wavenumber representable on the grid, `pi / dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Angular wavenumbers in FFT order; the Nyquist entry is reported as `+pi/dx`.
    pub fn fft_wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = PI / self.half_width;
        (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    /// Indices of nodes with `|x| >= (1 - fraction) L`.
    pub fn outer_indices(&self, fraction: f64) -> impl Iterator<Item = usize> + '_ {
        let cut = (1.0 - fraction) * self.half_width;
        (0..self.n_points).filter(move |&j| self.x(j).abs() >= cut)
    }
}

/// Complex samples on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("field contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: SpatialGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::invalid("fields live on different grids"));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.x(j), v))
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, v| c * v)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|_, v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|_, v| v.conj())
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &ComplexField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + c * b))
    }

    pub(crate) fn zip_with(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// `∫ |u|^2 dx`.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Fraction of the mass carried by the outer `fraction` of the box.
    pub fn boundary_mass_fraction(&self, fraction: f64) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outer: f64 = self
            .grid
            .outer_indices(fraction)
            .map(|j| self.values[j].norm_sqr())
            .sum();
        outer / total
    }
}

/// Symmetric frequency grid on `[-K, K]` with nodes offset by half a spacing,
/// so `k = 0` is never a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    band_limit: f64,
    m_points: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_BAND_LIMIT: f64 = 8.0;
    pub const DEFAULT_POINTS: usize = 512;

    pub fn new(band_limit: f64, m_points: usize) -> Result<Self> {
        if !(band_limit.is_finite() && band_limit > 0.0) {
            return Err(Error::invalid(format!("band limit must be positive, got {band_limit}")));
        }
        if m_points < 2 || m_points % 2 != 0 {
            return Err(Error::invalid(format!(
                "m_points must be even and >= 2, got {m_points}"
            )));
        }
        Ok(Self { band_limit, m_points })
    }

    /// Checks `K <= pi / dx` for the companion spatial grid.
    pub fn check_compatible(&self, grid: &SpatialGrid) -> Result<()> {
        if self.band_limit > grid.nyquist() * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "band limit {} exceeds the spatial Nyquist wavenumber {:.4}",
                self.band_limit,
                grid.nyquist()
            )));
        }
        Ok(())
    }

    pub fn band_limit(&self) -> f64 {
        self.band_limit
    }

    pub fn len(&self) -> usize {
        self.m_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.band_limit / self.m_points as f64
    }

    pub fn k(&self, i: usize) -> f64 {
        -self.band_limit + (i as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m_points).map(|i| self.k(i)).collect()
    }

    /// Index of the node `-k_i`.
    pub fn mirror(&self, i: usize) -> usize {
        self.m_points - 1 - i
    }

    /// Half-width of the spatial window whose positions the grid resolves
    /// without aliasing, `pi / dk`.
    pub fn resolved_half_width(&self) -> f64 {
        PI / self.spacing()
    }

    /// Indices of the `count` nodes closest to `k = 0`, nearest first.
    pub fn smallest(&self, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.m_points).collect();
        idx.sort_by(|&a, &b| self.k(a).abs().partial_cmp(&self.k(b).abs()).unwrap().then(b.cmp(&a)));
        idx.truncate(count);
        idx
    }
}

/// Which pairing [`inner_product`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProductKind {
    /// `∫ conj(a) b dx`.
    Complex,
    /// Real part of the complex pairing, `∫ Re a Re b + Im a Im b dx`.
    Reduced,
}

pub fn inner_product(a: &ComplexField, b: &ComplexField, kind: InnerProductKind) -> Result<Complex64> {
    a.check_same_grid(b)?;
    let dx = a.grid.spacing();
    let s: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * dx;
    Ok(match kind {
        InnerProductKind::Complex => s,
        InnerProductKind::Reduced => Complex64::new(s.re, 0.0),
    })
}

/// Reduced (real) inner product as a plain number.
pub fn reduced_inner(a: &ComplexField, b: &ComplexField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    a.grid.spacing()
        * a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum::<f64>()
}

/// `max_j (1 + x_j^2)^(-sigma/2) |u(x_j)|`.
pub fn weighted_sup_norm(u: &ComplexField, sigma: f64) -> f64 {
    let grid = u.grid;
    u.values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = grid.x(j);
            v.norm() * (1.0 + x * x).powf(-0.5 * sigma)
        })
        .fold(0.0, f64::max)
}

/// Weighted L2 norm `(∫ (1 + x^2)^(-sigma) |u|^2 dx)^(1/2)`.
pub fn weighted_l2_norm(u: &ComplexField, sigma: f64) -> f64 {
    let grid = u.grid;
    let s: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = grid.x(j);
            v.norm_sqr() * (1.0 + x * x).powf(-sigma)
        })
        .sum();
    (s * grid.spacing()).sqrt()
}

/// Order of the derivative taken by [`spatial_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

impl TryFrom<u32> for DerivativeOrder {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        match order {
            1 => Ok(DerivativeOrder::First),
            2 => Ok(DerivativeOrder::Second),
            _ => Err(Error::invalid(format!("derivative order must be 1 or 2, got {order}"))),
        }
    }
}

/// Fourth-order finite differences: five-point centered stencils in the
/// interior, one-sided closures on the two outermost nodes at each end.
pub fn spatial_derivative(u: &ComplexField, order: DerivativeOrder) -> ComplexField {
    let n = u.len();
    let h = u.grid.spacing();
    let f = &u.values;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    match order {
        DerivativeOrder::First => {
            let c = 1.0 / (12.0 * h);
            for j in 2..n - 2 {
                out[j] = (-f[j + 2] + f[j + 1] * 8.0 - f[j - 1] * 8.0 + f[j - 2]) * c;
            }
            out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * c;
            out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * c;
            out[n - 1] = -(f[n - 1] * -25.0 + f[n - 2] * 48.0 - f[n - 3] * 36.0 + f[n - 4] * 16.0 - f[n - 5] * 3.0) * c;
            out[n - 2] = -(f[n - 1] * -3.0 - f[n - 2] * 10.0 + f[n - 3] * 18.0 - f[n - 4] * 6.0 + f[n - 5]) * c;
        }
        DerivativeOrder::Second => {
            let c = 1.0 / (12.0 * h * h);
            for j in 2..n - 2 {
                out[j] = (-f[j + 2] + f[j + 1] * 16.0 - f[j] * 30.0 + f[j - 1] * 16.0 - f[j - 2]) * c;
            }
            out[0] = (f[0] * 45.0 - f[1] * 154.0 + f[2] * 214.0 - f[3] * 156.0 + f[4] * 61.0 - f[5] * 10.0) * c;
            out[1] = (f[0] * 10.0 - f[1] * 15.0 - f[2] * 4.0 + f[3] * 14.0 - f[4] * 6.0 + f[5]) * c;
            out[n - 1] = (f[n - 1] * 45.0 - f[n - 2] * 154.0 + f[n - 3] * 214.0 - f[n - 4] * 156.0 + f[n - 5] * 61.0
                - f[n - 6] * 10.0)
                * c;
            out[n - 2] =
                (f[n - 1] * 10.0 - f[n - 2] * 15.0 - f[n - 3] * 4.0 + f[n - 4] * 14.0 - f[n - 5] * 6.0 + f[n - 6]) * c;
        }
    }
    ComplexField {
        grid: u.grid,
        values: out,
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized forward DFT of a slice.
pub fn fft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse DFT including the `1/n` normalization.
pub fn ifft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    let n = buf.len() as f64;
    plan(buf.len(), true).process(&mut buf);
    for v in &mut buf {
        *v /= n;
    }
    buf
}

/// Pseudo-spectral derivative. The Nyquist mode is dropped for odd orders
/// and kept (as a cosine mode) for even orders, matching the symmetric
/// second-derivative matrix used for the Hamiltonian.
pub fn spectral_derivative(u: &ComplexField, order: u32) -> ComplexField {
    let n = u.len();
    let kappa = u.grid.fft_wavenumbers();
    let mut hat = fft(&u.values);
    let i = Complex64::new(0.0, 1.0);
    for (j, h) in hat.iter_mut().enumerate() {
        if order % 2 == 1 && j == n / 2 {
            *h = Complex64::new(0.0, 0.0);
        } else {
            *h *= (i * kappa[j]).powu(order);
        }
    }
    ComplexField {
        grid: u.grid,
        values: ifft(&hat),
    }
}

/// `∫ |∂x u|^2 dx` evaluated spectrally, consistent with the spectral Hamiltonian.
pub fn kinetic_energy(u: &ComplexField) -> f64 {
    let n = u.len() as f64;
    let kappa = u.grid.fft_wavenumbers();
    let hat = fft(&u.values);
    let s: f64 = hat.iter().zip(&kappa).map(|(h, k)| k * k * h.norm_sqr()).sum();
    s * u.grid.spacing() / n
}

/// Fraction of spectral energy with `|kappa| > band_limit`.
pub fn spectral_tail_fraction(u: &ComplexField, band_limit: f64) -> f64 {
    let kappa = u.grid.fft_wavenumbers();
    let hat = fft(&u.values);
    let total: f64 = hat.iter().map(|h| h.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = hat
        .iter()
        .zip(&kappa)
        .filter(|(_, k)| k.abs() > band_limit)
        .map(|(h, _)| h.norm_sqr())
        .sum();
    tail / total
}
