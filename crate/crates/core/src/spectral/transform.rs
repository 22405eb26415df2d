//! Distorted Fourier transform and its inverse.

use num_complex::Complex64;

use super::decomposition::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::grid::{spectral_tail_fraction, ComplexField, FrequencyGrid};

/// Largest admissible fraction of flat-FFT energy beyond the band limit.
pub const BAND_TAIL_LIMIT: f64 = 0.01;

/// Values of a function of `k` on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub kgrid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn zeros(kgrid: FrequencyGrid) -> Self {
        Self {
            kgrid,
            values: vec![Complex64::new(0.0, 0.0); kgrid.len()],
        }
    }

    pub fn from_fn(kgrid: FrequencyGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            kgrid,
            values: kgrid.nodes().into_iter().map(f).collect(),
        }
    }

    /// `(Σ |c_i|^2 Δk)^(1/2)`.
    pub fn norm_l2(&self) -> f64 {
        (self.kgrid.spacing() * self.values.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Pointwise multiplier `c_i ← m(k_i) c_i`.
    pub fn multiply(&self, m: impl Fn(f64) -> Complex64) -> Self {
        Self {
            kgrid: self.kgrid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, c)| c * m(self.kgrid.k(i)))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            kgrid: self.kgrid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `ũ(k) = ∫ conj 𝒦(x,k) u(x) dx`.
pub fn distorted_transform(u: &ComplexField, dec: &SpectralDecomposition) -> Result<SpectralCoefficients> {
    if u.grid() != dec.grid() {
        return Err(Error::invalid("field is not on the decomposition grid"));
    }
    let tail = spectral_tail_fraction(u, dec.kgrid().band_limit());
    if tail > BAND_TAIL_LIMIT {
        return Err(Error::BandLimit(format!(
            "{:.2}% of the spectral energy lies above K = {}",
            100.0 * tail,
            dec.kgrid().band_limit()
        )));
    }
    Ok(SpectralCoefficients {
        kgrid: *dec.kgrid(),
        values: dec.forward_raw(u),
    })
}

/// `u(x) = ∫ 𝒦(x,k) c(k) dk`.
pub fn distorted_inverse(coeffs: &SpectralCoefficients, dec: &SpectralDecomposition) -> Result<ComplexField> {
    if coeffs.kgrid != *dec.kgrid() || coeffs.values.len() != dec.kgrid().len() {
        return Err(Error::invalid(
            "coefficients are not on the decomposition frequency grid",
        ));
    }
    Ok(dec.inverse_raw(&coeffs.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::spectral::decomposition::BoundStates;
    use crate::spectral::potential::Potential;
    use std::f64::consts::PI;

    fn packet(grid: SpatialGrid, xc: f64, s: f64, k0: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let g = (-(x - xc) * (x - xc) / (2.0 * s * s)).exp();
            Complex64::new(0.0, k0 * x).exp() * g
        })
    }

    #[test]
    fn free_transform_is_flat_fourier() {
        let grid = SpatialGrid::new(40.0, 512).unwrap();
        let kg = FrequencyGrid::new(6.0, 256).unwrap();
        let d =
            super::super::decomposition::SpectralDecomposition::build(&Potential::zero(grid), &kg, BoundStates::None)
                .unwrap();
        let s = 1.5;
        let u = packet(grid, 2.0, s, 0.0);
        let t = distorted_transform(&u, &d).unwrap();
        for (i, c) in t.values.iter().enumerate() {
            let k = kg.k(i);
            // (1/√2π) ∫ e^{-ikx} e^{-(x-2)^2/(2 s^2)} dx
            let exact = Complex64::new(0.0, -2.0 * k).exp() * s * (-k * k * s * s / 2.0).exp();
            assert!((c - exact).norm() < 1e-10, "k = {k}");
        }
        let _ = PI;
    }

    #[test]
    fn band_limit_violation_is_reported() {
        let grid = SpatialGrid::new(20.0, 256).unwrap();
        let kg = FrequencyGrid::new(2.0, 64).unwrap();
        let d =
            super::super::decomposition::SpectralDecomposition::build(&Potential::zero(grid), &kg, BoundStates::None)
                .unwrap();
        let u = packet(grid, 0.0, 0.3, 0.0);
        assert!(matches!(distorted_transform(&u, &d), Err(Error::BandLimit(_))));
    }
}
