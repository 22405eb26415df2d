//! Transmission and reflection coefficients and genericity.

use std::path::Path;

use num_complex::Complex64;

use super::jost::{JostColumn, JostSolution, JostSolver};
use super::potential::Potential;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::io::CsvTable;

/// Unitarity defect above which the Jost solve is considered under-resolved.
pub const UNITARITY_LIMIT: f64 = 1e-3;
/// Threshold on `|∫ V m(·,0)|` separating generic from resonant potentials.
pub const GENERICITY_THRESHOLD: f64 = 1e-6;
/// Number of small-`|k|` nodes used for the slope of `T`.
pub const SLOPE_NODES: usize = 5;

/// `T`, `R_+`, `R_-` at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub k: f64,
    pub t: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
}

impl Coefficients {
    /// From a Jost column at real `k ≠ 0`.
    pub fn from_column(col: &JostColumn) -> Self {
        let k = col.k().re;
        let i2k = Complex64::new(0.0, 2.0 * k);
        let t = 1.0 / (1.0 - col.int_v_m_plus() / i2k);
        let r_plus = t * col.int_phase_v_m_minus() / i2k;
        let r_minus = t * col.int_phase_v_m_plus() / i2k;
        Self { k, t, r_plus, r_minus }
    }

    /// `max_± | |T|^2 + |R_±|^2 - 1 |`.
    pub fn unitarity_defect(&self) -> f64 {
        let t2 = self.t.norm_sqr();
        (t2 + self.r_plus.norm_sqr() - 1.0)
            .abs()
            .max((t2 + self.r_minus.norm_sqr() - 1.0).abs())
    }

    /// `|T conj(R_-) + conj(T) R_+|`.
    pub fn cross_defect(&self) -> f64 {
        (self.t * self.r_minus.conj() + self.t.conj() * self.r_plus).norm()
    }
}

/// Scattering coefficients across a frequency grid.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub kgrid: FrequencyGrid,
    pub t: Vec<Complex64>,
    pub r_plus: Vec<Complex64>,
    pub r_minus: Vec<Complex64>,
    /// `∫ V m_+(x,0) dx`.
    pub genericity_value: Complex64,
    /// Least-squares `α` in `T(k) ≈ α k` over the smallest nodes.
    pub alpha_slope: Complex64,
    pub unitarity_defect: f64,
    pub cross_defect: f64,
    pub symmetry: SymmetryDefects,
}

/// Defects of the candidate relations between `k` and `-k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SymmetryDefects {
    /// `max | |T(-k)| - |T(k)| |`.
    pub modulus: f64,
    /// `max |T(-k) - T(k)|`.
    pub t_even: f64,
    /// `max |T(-k) - conj T(k)|`.
    pub t_conj: f64,
    /// `max_± |R_±(-k) - conj R_±(k)|`.
    pub r_conj: f64,
}

impl ScatteringData {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn coefficients(&self, i: usize) -> Coefficients {
        Coefficients {
            k: self.kgrid.k(i),
            t: self.t[i],
            r_plus: self.r_plus[i],
            r_minus: self.r_minus[i],
        }
    }

    /// Relative spread of `|T(k)|/|k|` over the smallest nodes, `(max - min) / mean`.
    pub fn small_k_spread(&self) -> f64 {
        let ratios: Vec<f64> = self
            .kgrid
            .smallest(SLOPE_NODES)
            .into_iter()
            .map(|i| self.t[i].norm() / self.kgrid.k(i).abs())
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        (max - min) / mean
    }

    pub fn max_reflection(&self) -> f64 {
        self.r_plus
            .iter()
            .chain(&self.r_minus)
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "k",
            "re_t",
            "im_t",
            "re_r_plus",
            "im_r_plus",
            "re_r_minus",
            "im_r_minus",
        ]);
        for i in 0..self.len() {
            t.push(vec![
                self.kgrid.k(i),
                self.t[i].re,
                self.t[i].im,
                self.r_plus[i].re,
                self.r_plus[i].im,
                self.r_minus[i].re,
                self.r_minus[i].im,
            ]);
        }
        t
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }
}

/// Builds `T`, `R_±` from Jost data by quadrature of the defining integrals.
pub fn compute_scattering(jost: &JostSolution, potential: &Potential) -> Result<ScatteringData> {
    let kgrid = *jost.kgrid();
    let coeffs: Vec<Coefficients> = jost.columns().iter().map(Coefficients::from_column).collect();
    let unitarity_defect = coeffs.iter().map(|c| c.unitarity_defect()).fold(0.0, f64::max);
    let cross_defect = coeffs.iter().map(|c| c.cross_defect()).fold(0.0, f64::max);
    if !(unitarity_defect <= UNITARITY_LIMIT) {
        return Err(Error::Inconsistency(format!(
            "unitarity defect {unitarity_defect:.3e} exceeds {UNITARITY_LIMIT:e}; refine the grid"
        )));
    }
    let t: Vec<Complex64> = coeffs.iter().map(|c| c.t).collect();
    let r_plus: Vec<Complex64> = coeffs.iter().map(|c| c.r_plus).collect();
    let r_minus: Vec<Complex64> = coeffs.iter().map(|c| c.r_minus).collect();

    let mut symmetry = SymmetryDefects {
        modulus: 0.0,
        t_even: 0.0,
        t_conj: 0.0,
        r_conj: 0.0,
    };
    for i in 0..kgrid.len() {
        let j = kgrid.mirror(i);
        symmetry.modulus = symmetry.modulus.max((t[j].norm() - t[i].norm()).abs());
        symmetry.t_even = symmetry.t_even.max((t[j] - t[i]).norm());
        symmetry.t_conj = symmetry.t_conj.max((t[j] - t[i].conj()).norm());
        symmetry.r_conj = symmetry
            .r_conj
            .max((r_plus[j] - r_plus[i].conj()).norm())
            .max((r_minus[j] - r_minus[i].conj()).norm());
    }

    let small = kgrid.smallest(SLOPE_NODES);
    let (num, den) = small.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(n, d), &i| {
        let k = kgrid.k(i);
        (n + t[i] * k, d + k * k)
    });
    let alpha_slope = num / den;

    let solver = JostSolver::new(potential, 1.0)?;
    let genericity_value = solver.solve(Complex64::new(0.0, 0.0))?.int_v_m_plus();

    Ok(ScatteringData {
        kgrid,
        t,
        r_plus,
        r_minus,
        genericity_value,
        alpha_slope,
        unitarity_defect,
        cross_defect,
        symmetry,
    })
}

/// Outcome of the genericity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Genericity {
    /// `∫ V m_+(x,0) dx`.
    pub value: Complex64,
    /// `∫ V m_-(x,0) dx`.
    pub value_minus: Complex64,
    pub is_generic: bool,
}

/// Evaluates `∫ V m_±(x,0) dx` from the zero-energy Jost solutions.
pub fn check_generic(potential: &Potential) -> Result<Genericity> {
    let solver = JostSolver::new(potential, 1.0)?;
    let col = solver.solve(Complex64::new(0.0, 0.0))?;
    let value = col.int_v_m_plus();
    let value_minus = col.int_v_m_minus();
    if (value - value_minus).norm() > GENERICITY_THRESHOLD {
        return Err(Error::Inconsistency(format!(
            "zero-energy integrals disagree: {value} (+) vs {value_minus} (-)"
        )));
    }
    Ok(Genericity {
        value,
        value_minus,
        is_generic: value.norm() > GENERICITY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::spectral::jost::solve_jost;

    fn audit(name: &str) -> ScatteringData {
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let v = Potential::preset(name, grid).unwrap();
        let kg = FrequencyGrid::new(8.0, 512).unwrap();
        compute_scattering(&solve_jost(&v, &kg).unwrap(), &v).unwrap()
    }

    #[test]
    fn free_potential_is_transparent() {
        let grid = SpatialGrid::new(40.0, 256).unwrap();
        let v = Potential::zero(grid);
        let kg = FrequencyGrid::new(4.0, 16).unwrap();
        let s = compute_scattering(&solve_jost(&v, &kg).unwrap(), &v).unwrap();
        assert!(s.t.iter().all(|t| *t == Complex64::new(1.0, 0.0)));
        assert_eq!(s.max_reflection(), 0.0);
        let g = check_generic(&v).unwrap();
        assert_eq!(g.value.norm(), 0.0);
        assert!(!g.is_generic);
    }

    #[test]
    fn sech2_is_reflectionless_and_not_generic() {
        let s = audit("sech2");
        assert!(s.max_reflection() < 1e-6);
        assert!(s.t.iter().all(|t| (t.norm() - 1.0).abs() < 1e-6));
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let g = check_generic(&Potential::preset("sech2", grid).unwrap()).unwrap();
        assert!(!g.is_generic, "{:e}", g.value.norm());
    }

    #[test]
    fn sech2_transmission_matches_closed_form() {
        // T(k) = (k + i)/(k - i) for the one-soliton potential in this convention.
        let s = audit("sech2");
        let i = Complex64::new(0.0, 1.0);
        for n in 0..s.len() {
            let k = s.kgrid.k(n);
            assert!((s.t[n] - (k + i) / (k - i)).norm() < 1e-7);
        }
    }

    #[test]
    fn gaussian_well_identities_and_low_energy_limit() {
        let s = audit("gaussian_well");
        assert!(s.unitarity_defect < 1e-6, "{:e}", s.unitarity_defect);
        assert!(s.cross_defect < 1e-6, "{:e}", s.cross_defect);
        assert!(s.symmetry.modulus < 1e-6);
        assert!(s.symmetry.r_conj < 1e-6);
        assert!(s.symmetry.t_conj < 1e-6);
        let near = s.kgrid.smallest(1)[0];
        let k = s.kgrid.k(near).abs();
        assert!(s.t[near].norm() < 2.0 * s.alpha_slope.norm() * k);
        assert!((s.r_plus[near] + 1.0).norm() < 0.5);
        assert!(s.alpha_slope.norm() > 0.1);
        eprintln!("alpha {} spread {}", s.alpha_slope, s.small_k_spread());
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let g = check_generic(&Potential::preset("gaussian_well", grid).unwrap()).unwrap();
        assert!(g.is_generic);
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let s = audit("bump");
        let t = s.to_csv();
        assert_eq!(t.len(), s.len());
        assert!(t.render().starts_with("k,re_t,im_t"));
    }
}
