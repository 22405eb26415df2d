//! Initial data: solitons, wavepackets, and model-problem coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::spectral::{distorted_inverse, distorted_transform, SpectralCoefficients, SpectralDecomposition};

/// How the wavepacket is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    /// Gaussian in `x` times a plane wave, projected onto the continuous subspace.
    #[default]
    Physical,
    /// Gaussian in the distorted frequency variable; lies in `Range P_c` by construction.
    Distorted,
}

/// Gaussian packet `ε e^{-(x-x_c)²/(2w²)} e^{ivx/2}` or its distorted analogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wavepacket {
    /// Sup norm of the packet before projection.
    pub amplitude: f64,
    pub center: f64,
    /// Group velocity `2k₀`.
    pub velocity: f64,
    pub width: f64,
    #[serde(default)]
    pub kind: PacketKind,
    /// Smooth cutoff `e^{-(k/k_c)^8}` applied in the distorted variable; `0` disables it.
    #[serde(default)]
    pub cutoff: f64,
}

impl Wavepacket {
    pub fn wavenumber(&self) -> f64 {
        0.5 * self.velocity
    }

    pub fn build(&self, dec: &SpectralDecomposition) -> Result<ComplexField> {
        let raw = self.unfiltered(dec)?;
        let kc = self.cutoff;
        if kc == 0.0 {
            return Ok(raw);
        }
        if !(kc > 0.0) {
            return Err(Error::invalid(format!("cutoff must be positive or zero, got {kc}")));
        }
        let c = distorted_transform(&raw, dec)?.multiply(|k| Complex64::new((-(k / kc).powi(8)).exp(), 0.0));
        distorted_inverse(&c, dec)
    }

    fn unfiltered(&self, dec: &SpectralDecomposition) -> Result<ComplexField> {
        if !(self.width > 0.0) {
            return Err(Error::invalid("wavepacket width must be positive"));
        }
        let k0 = self.wavenumber();
        let (w, xc) = (self.width, self.center);
        match self.kind {
            PacketKind::Physical => {
                let raw = ComplexField::from_fn(*dec.grid(), |x| {
                    Complex64::from_polar(self.amplitude * (-(x - xc) * (x - xc) / (2.0 * w * w)).exp(), k0 * x)
                });
                Ok(dec.project_continuous(&raw))
            }
            PacketKind::Distorted => {
                let coeffs = SpectralCoefficients::from_fn(*dec.kgrid(), |k| {
                    Complex64::from_polar(w * (-(k - k0) * (k - k0) * w * w / 2.0).exp(), -(k - k0) * xc)
                });
                let f = distorted_inverse(&coeffs, dec)?;
                let sup = f.norm_sup();
                if sup == 0.0 {
                    return Ok(f);
                }
                Ok(f.scale_real(self.amplitude / sup))
            }
        }
    }
}

/// `c·e^{-(x-x₀)²/(2s²)}` as a complex field.
pub fn gaussian_bump(dec: &SpectralDecomposition, c: Complex64, x0: f64, s: f64) -> ComplexField {
    ComplexField::from_fn(*dec.grid(), |x| c * (-(x - x0) * (x - x0) / (2.0 * s * s)).exp())
}
