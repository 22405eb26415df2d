//! The linear flow `e^{iHt}`.

use num_complex::Complex64;

use super::decomposition::SpectralDecomposition;
use super::transform::{distorted_inverse, distorted_transform};
use crate::error::{Error, Result};
use crate::grid::ComplexField;

/// Which realization of `e^{iHt}` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagatorRoute {
    /// Dense eigendecomposition of the discrete `H`.
    #[default]
    Dense,
    /// `F̃^{-1} e^{ik²t} F̃ P_c h + e^{-iρ²t} P_d h`.
    Distorted,
}

/// `e^{iHt} h` by the dense route.
pub fn linear_propagator(h: &ComplexField, t: f64, dec: &SpectralDecomposition) -> Result<ComplexField> {
    propagate(h, t, dec, PropagatorRoute::Dense)
}

pub fn propagate(
    h: &ComplexField,
    t: f64,
    dec: &SpectralDecomposition,
    route: PropagatorRoute,
) -> Result<ComplexField> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("propagation time must be finite, got {t}")));
    }
    if h.grid() != dec.grid() {
        return Err(Error::invalid("field is not on the decomposition grid"));
    }
    match route {
        PropagatorRoute::Dense => Ok(dec.apply_function(h, |l| Complex64::new(0.0, l * t).exp())),
        PropagatorRoute::Distorted => {
            let pc = dec.project_continuous(h);
            let coeffs = distorted_transform(&pc, dec)?.multiply(|k| Complex64::new(0.0, k * k * t).exp());
            let cont = distorted_inverse(&coeffs, dec)?;
            match dec.bound() {
                Some(b) => {
                    let c = dec.bound_coefficient(h) * Complex64::new(0.0, -b.rho2 * t).exp();
                    cont.axpy(c, &b.phi)
                }
                None => Ok(cont),
            }
        }
    }
}

/// Relative difference `‖dense − distorted‖ / ‖dense‖` at time `t`.
pub fn cross_validate(h: &ComplexField, t: f64, dec: &SpectralDecomposition) -> Result<f64> {
    let a = propagate(h, t, dec, PropagatorRoute::Dense)?;
    let b = propagate(h, t, dec, PropagatorRoute::Distorted)?;
    Ok(a.sub(&b)?.norm_l2() / a.norm_l2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FrequencyGrid, SpatialGrid};
    use crate::spectral::decomposition::BoundStates;
    use crate::spectral::potential::Potential;

    #[test]
    fn bound_state_rotates_and_flow_is_unitary() {
        let grid = SpatialGrid::new(30.0, 256).unwrap();
        let kg = FrequencyGrid::new(4.0, 64).unwrap();
        let d = SpectralDecomposition::build(
            &Potential::preset("gaussian_well", grid).unwrap(),
            &kg,
            BoundStates::One,
        )
        .unwrap();
        let b = d.bound().unwrap();
        let t = 3.7;
        let out = linear_propagator(&b.phi, t, &d).unwrap();
        let expect = b.phi.scale(Complex64::new(0.0, -b.rho2 * t).exp());
        assert!(out.sub(&expect).unwrap().norm_l2() < 1e-12);
        let h = ComplexField::from_real_fn(grid, |x| (-(x - 3.0) * (x - 3.0)).exp());
        let ht = linear_propagator(&h, 12.0, &d).unwrap();
        assert!((ht.norm_l2() - h.norm_l2()).abs() < 1e-12);
        let h0 = linear_propagator(&h, 0.0, &d).unwrap();
        assert!(h0.sub(&h).unwrap().norm_l2() < 1e-13);
        assert!(linear_propagator(&h, f64::NAN, &d).is_err());
    }
}
