//! Dense spectral decomposition of the discrete Hamiltonian and the distorted
//! Fourier kernel.

use std::f64::consts::PI;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use num_complex::Complex64;
use rayon::prelude::*;

use super::jost::JostSolver;
use super::potential::Potential;
use super::scattering::Coefficients;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, FrequencyGrid, SpatialGrid};

/// Largest grid handled by the dense eigensolver.
pub const MAX_DENSE_POINTS: usize = 4096;

/// How many negative eigenvalues the caller requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStates {
    /// Trapping experiments: exactly one.
    One,
    /// Model-problem experiments: none.
    None,
}

/// Periodic pseudo-spectral second derivative on `[-L, L)` as a dense matrix.
pub fn spectral_laplacian(grid: &SpatialGrid) -> Mat<f64> {
    let n = grid.len();
    let h = 2.0 * PI / n as f64;
    let scale = (PI / grid.half_width()).powi(2);
    let diag = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
    let offd: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                diag
            } else {
                let s = (d as f64 * h / 2.0).sin();
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                -sign / (2.0 * s * s)
            }
        })
        .collect();
    Mat::from_fn(n, n, |i, j| scale * offd[i.abs_diff(j)])
}

/// Discrete `H = -D2 + V`.
pub fn hamiltonian(potential: &Potential) -> Mat<f64> {
    let mut h = spectral_laplacian(potential.grid());
    for j in 0..h.nrows() {
        for i in 0..h.nrows() {
            h[(i, j)] = -h[(i, j)];
        }
        h[(j, j)] += potential.values()[j];
    }
    h
}

/// The bound-state pair `(-ρ^2, φ)`.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub rho2: f64,
    pub phi: ComplexField,
    /// Column of the eigenvector matrix holding `φ`.
    pub index: usize,
}

impl BoundPair {
    pub fn rho(&self) -> f64 {
        self.rho2.sqrt()
    }
}

/// Distorted-transform kernel `𝒦(x_j, k_i)` as real and imaginary parts,
/// rows indexed by frequency.
#[derive(Debug, Clone)]
struct Kernel {
    re: Mat<f64>,
    im: Mat<f64>,
}

/// Dense eigendecomposition of `H` plus the distorted kernel.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    potential: Potential,
    kgrid: FrequencyGrid,
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors in columns.
    vectors: Mat<f64>,
    /// Transposed copy for fast forward products.
    vectors_t: Mat<f64>,
    bound: Option<BoundPair>,
    kernel: Kernel,
    coefficients: Vec<Coefficients>,
}

impl SpectralDecomposition {
    /// Eigensolve, bound-state extraction and kernel assembly.
    pub fn build(potential: &Potential, kgrid: &FrequencyGrid, bound: BoundStates) -> Result<Self> {
        let grid = *potential.grid();
        let n = grid.len();
        if n > MAX_DENSE_POINTS {
            return Err(Error::invalid(format!(
                "dense decomposition is limited to {MAX_DENSE_POINTS} points, got {n}"
            )));
        }
        kgrid.check_compatible(&grid)?;
        potential.check_decayed()?;

        let h = hamiltonian(potential);
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::NumericalInstability(format!("eigensolver failed: {e:?}")))?;
        let eigenvalues: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
        let mut vectors = evd.U().to_owned();

        // Roundoff puts the free constant mode at about -1e-15.
        let floor = -1e-10 * eigenvalues[n - 1].abs().max(1.0);
        let negative = eigenvalues.iter().take_while(|&&l| l < floor).count();
        let required = match bound {
            BoundStates::One => 1,
            BoundStates::None => 0,
        };
        if negative != required {
            return Err(Error::SpectralAssumption(format!(
                "expected {required} negative eigenvalue(s), found {negative}"
            )));
        }

        let bound = if negative == 1 {
            let dx = grid.spacing();
            let col = vectors.col(0);
            let jmax = (0..n)
                .max_by(|&a, &b| col[a].abs().partial_cmp(&col[b].abs()).unwrap())
                .unwrap();
            if col[jmax] < 0.0 {
                for j in 0..n {
                    vectors[(j, 0)] = -vectors[(j, 0)];
                }
            }
            let norm = dx.sqrt();
            let phi = ComplexField::from_vec_unchecked(
                grid,
                (0..n).map(|j| Complex64::new(vectors[(j, 0)] / norm, 0.0)).collect(),
            );
            Some(BoundPair {
                rho2: -eigenvalues[0],
                phi,
                index: 0,
            })
        } else {
            None
        };
        let vectors_t = vectors.transpose().to_owned();

        let (kernel, coefficients) = build_kernel(potential, kgrid)?;
        Ok(Self {
            potential: potential.clone(),
            kgrid: *kgrid,
            eigenvalues,
            vectors,
            vectors_t,
            bound,
            kernel,
            coefficients,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.potential.grid()
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn kgrid(&self) -> &FrequencyGrid {
        &self.kgrid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn bound(&self) -> Option<&BoundPair> {
        self.bound.as_ref()
    }

    /// The bound pair, or a spectral-assumption error for potentials without one.
    pub fn require_bound(&self) -> Result<&BoundPair> {
        self.bound
            .as_ref()
            .ok_or_else(|| Error::SpectralAssumption("potential has no bound state".into()))
    }

    /// `T`, `R_±` at the nonnegative frequency nodes, ascending.
    pub fn coefficients(&self) -> &[Coefficients] {
        &self.coefficients
    }

    /// `(φ, h) = ∫ φ h dx`.
    pub fn bound_coefficient(&self, h: &ComplexField) -> Complex64 {
        match &self.bound {
            Some(b) => {
                let dx = self.grid().spacing();
                b.phi
                    .values()
                    .iter()
                    .zip(h.values())
                    .map(|(p, v)| p.re * v)
                    .sum::<Complex64>()
                    * dx
            }
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `P_d h = (φ, h) φ`.
    pub fn project_discrete(&self, h: &ComplexField) -> ComplexField {
        match &self.bound {
            Some(b) => b.phi.scale(self.bound_coefficient(h)),
            None => ComplexField::zeros(*self.grid()),
        }
    }

    /// `P_c h = h - P_d h`.
    pub fn project_continuous(&self, h: &ComplexField) -> ComplexField {
        match &self.bound {
            Some(b) => {
                let c = self.bound_coefficient(h);
                h.zip_with(&b.phi, |v, p| v - c * p)
            }
            None => h.clone(),
        }
    }

    /// Coefficients of `h` in the orthonormal eigenbasis, as (real, imaginary)
    /// parts. Scaled so the Euclidean norm equals `‖h‖_2`.
    pub fn to_eigen(&self, h: &ComplexField) -> (Vec<f64>, Vec<f64>) {
        let n = h.len();
        let s = self.grid().spacing().sqrt();
        let u = Mat::from_fn(n, 2, |j, c| {
            let v = h.values()[j];
            s * if c == 0 { v.re } else { v.im }
        });
        let mut out = Mat::<f64>::zeros(n, 2);
        matmul(&mut out, Accum::Replace, &self.vectors_t, &u, 1.0, Par::Seq);
        (
            (0..n).map(|i| out[(i, 0)]).collect(),
            (0..n).map(|i| out[(i, 1)]).collect(),
        )
    }

    /// Inverse of [`Self::to_eigen`].
    pub fn from_eigen(&self, re: &[f64], im: &[f64]) -> ComplexField {
        let n = re.len();
        let s = 1.0 / self.grid().spacing().sqrt();
        let c = Mat::from_fn(n, 2, |i, col| if col == 0 { re[i] } else { im[i] });
        let mut out = Mat::<f64>::zeros(n, 2);
        matmul(&mut out, Accum::Replace, &self.vectors, &c, s, Par::Seq);
        ComplexField::from_vec_unchecked(
            *self.grid(),
            (0..n).map(|j| Complex64::new(out[(j, 0)], out[(j, 1)])).collect(),
        )
    }

    /// Same as [`Self::to_eigen`] for a real field.
    pub fn to_eigen_real(&self, h: &[f64]) -> Vec<f64> {
        let n = h.len();
        let s = self.grid().spacing().sqrt();
        let u = Mat::from_fn(n, 1, |j, _| s * h[j]);
        let mut out = Mat::<f64>::zeros(n, 1);
        matmul(&mut out, Accum::Replace, &self.vectors_t, &u, 1.0, Par::Seq);
        (0..n).map(|i| out[(i, 0)]).collect()
    }

    /// Same as [`Self::from_eigen`] for real coefficients.
    pub fn from_eigen_real(&self, c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let s = 1.0 / self.grid().spacing().sqrt();
        let cm = Mat::from_fn(n, 1, |i, _| c[i]);
        let mut out = Mat::<f64>::zeros(n, 1);
        matmul(&mut out, Accum::Replace, &self.vectors, &cm, s, Par::Seq);
        (0..n).map(|j| out[(j, 0)]).collect()
    }

    /// `f(H) h` for a spectral multiplier `f`.
    pub fn apply_function(&self, h: &ComplexField, f: impl Fn(f64) -> Complex64) -> ComplexField {
        let (re, im) = self.to_eigen(h);
        let (mut r2, mut i2) = (re.clone(), im.clone());
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let c = Complex64::new(re[i], im[i]) * f(lambda);
            r2[i] = c.re;
            i2[i] = c.im;
        }
        self.from_eigen(&r2, &i2)
    }

    /// `H h` through the eigendecomposition.
    pub fn apply_hamiltonian(&self, h: &ComplexField) -> ComplexField {
        self.apply_function(h, |l| Complex64::new(l, 0.0))
    }

    /// `‖H φ + ρ² φ‖_2`.
    pub fn eigen_residual(&self) -> Option<f64> {
        let b = self.bound.as_ref()?;
        let h = hamiltonian(&self.potential);
        let n = self.grid().len();
        let dx = self.grid().spacing();
        let mut sum = 0.0;
        for i in 0..n {
            let mut acc = b.rho2 * b.phi.values()[i].re;
            for j in 0..n {
                acc += h[(i, j)] * b.phi.values()[j].re;
            }
            sum += acc * acc;
        }
        Some((sum * dx).sqrt())
    }

    /// `𝒦(x_j, k_i)`.
    pub fn kernel(&self, j: usize, i: usize) -> Complex64 {
        Complex64::new(self.kernel.re[(i, j)], self.kernel.im[(i, j)])
    }

    /// `ũ(k_i) = Σ_j conj 𝒦(x_j, k_i) u_j Δx` (no band-limit check).
    pub(crate) fn forward_raw(&self, u: &ComplexField) -> Vec<Complex64> {
        let n = u.len();
        let dx = self.grid().spacing();
        let um = Mat::from_fn(n, 2, |j, c| {
            let v = u.values()[j];
            if c == 0 {
                v.re
            } else {
                v.im
            }
        });
        let m = self.kgrid.len();
        let mut a = Mat::<f64>::zeros(m, 2);
        let mut b = Mat::<f64>::zeros(m, 2);
        matmul(&mut a, Accum::Replace, &self.kernel.re, &um, dx, Par::Seq);
        matmul(&mut b, Accum::Replace, &self.kernel.im, &um, dx, Par::Seq);
        (0..m)
            .map(|i| Complex64::new(a[(i, 0)] + b[(i, 1)], a[(i, 1)] - b[(i, 0)]))
            .collect()
    }

    /// `u(x_j) = Σ_i 𝒦(x_j, k_i) c_i Δk`.
    pub(crate) fn inverse_raw(&self, coeffs: &[Complex64]) -> ComplexField {
        let m = coeffs.len();
        let n = self.grid().len();
        let dk = self.kgrid.spacing();
        let cm = Mat::from_fn(m, 2, |i, c| if c == 0 { coeffs[i].re } else { coeffs[i].im });
        let mut a = Mat::<f64>::zeros(n, 2);
        let mut b = Mat::<f64>::zeros(n, 2);
        matmul(&mut a, Accum::Replace, self.kernel.re.transpose(), &cm, dk, Par::Seq);
        matmul(&mut b, Accum::Replace, self.kernel.im.transpose(), &cm, dk, Par::Seq);
        ComplexField::from_vec_unchecked(
            *self.grid(),
            (0..n)
                .map(|j| Complex64::new(a[(j, 0)] - b[(j, 1)], a[(j, 1)] + b[(j, 0)]))
                .collect(),
        )
    }
}

/// Assembles `𝒦` from Jost solutions at the nonnegative nodes; negative
/// nodes reuse `T(|k|) ψ_-(x, |k|)` of the mirrored node.
fn build_kernel(potential: &Potential, kgrid: &FrequencyGrid) -> Result<(Kernel, Vec<Coefficients>)> {
    let grid = *potential.grid();
    let n = grid.len();
    let m = kgrid.len();
    let half = m / 2;
    let solver = JostSolver::new(potential, kgrid.band_limit())?;
    let norm = 1.0 / (2.0 * PI).sqrt();
    // Row pairs (k_i >= 0, mirror) computed together.
    let rows: Vec<(Coefficients, Vec<Complex64>, Vec<Complex64>)> = (half..m)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let k = kgrid.k(i);
            let col = solver.solve(Complex64::new(k, 0.0))?;
            let c = Coefficients::from_column(&col);
            let plus = (0..n).map(|j| norm * c.t * col.psi_plus(j)).collect();
            let minus = (0..n).map(|j| norm * c.t * col.psi_minus(j)).collect();
            Ok((c, plus, minus))
        })
        .collect::<Result<_>>()?;
    let mut re = Mat::<f64>::zeros(m, n);
    let mut im = Mat::<f64>::zeros(m, n);
    let mut coefficients = Vec::with_capacity(half);
    for (r, (c, plus, minus)) in rows.into_iter().enumerate() {
        let ip = half + r;
        let imn = kgrid.mirror(ip);
        for j in 0..n {
            re[(ip, j)] = plus[j].re;
            im[(ip, j)] = plus[j].im;
            re[(imn, j)] = minus[j].re;
            im[(imn, j)] = minus[j].im;
        }
        coefficients.push(c);
    }
    Ok((Kernel { re, im }, coefficients))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_is_exact_on_resolved_modes() {
        let grid = SpatialGrid::new(10.0, 64).unwrap();
        let d2 = spectral_laplacian(&grid);
        let k = 3.0 * PI / 10.0;
        for i in 0..64 {
            let acc: f64 = (0..64).map(|j| d2[(i, j)] * (k * grid.x(j)).sin()).sum();
            assert!((acc + k * k * (k * grid.x(i)).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn bump_has_no_bound_state_and_well_has_one() {
        let grid = SpatialGrid::new(30.0, 256).unwrap();
        let kg = FrequencyGrid::new(4.0, 64).unwrap();
        let bump = Potential::preset("bump", grid).unwrap();
        let d = SpectralDecomposition::build(&bump, &kg, BoundStates::None).unwrap();
        assert!(d.bound().is_none());
        assert!(matches!(
            SpectralDecomposition::build(&bump, &kg, BoundStates::One),
            Err(Error::SpectralAssumption(_))
        ));
        let well = Potential::preset("gaussian_well", grid).unwrap();
        let d = SpectralDecomposition::build(&well, &kg, BoundStates::One).unwrap();
        let b = d.bound().unwrap();
        assert!((b.phi.norm_l2() - 1.0).abs() < 1e-12);
        let jmax = (0..256)
            .max_by(|&a, &c| b.phi.values()[a].norm().partial_cmp(&b.phi.values()[c].norm()).unwrap())
            .unwrap();
        assert!(b.phi.values()[jmax].re > 0.0);
        assert!(d.eigen_residual().unwrap() < 1e-10);
    }

    #[test]
    fn eigen_round_trip_and_projections() {
        let grid = SpatialGrid::new(30.0, 256).unwrap();
        let kg = FrequencyGrid::new(4.0, 64).unwrap();
        let well = Potential::preset("gaussian_well", grid).unwrap();
        let d = SpectralDecomposition::build(&well, &kg, BoundStates::One).unwrap();
        let u = ComplexField::from_fn(grid, |x| Complex64::new((-x * x / 8.0).exp(), x * (-x * x / 4.0).exp()));
        let (re, im) = d.to_eigen(&u);
        let back = d.from_eigen(&re, &im);
        assert!(back.sub(&u).unwrap().norm_l2() < 1e-12);
        let pc = d.project_continuous(&u);
        let pcpc = d.project_continuous(&pc);
        assert!(pcpc.sub(&pc).unwrap().norm_l2() < 1e-14);
        let sum = pc.add(&d.project_discrete(&u)).unwrap();
        assert!(sum.sub(&u).unwrap().norm_l2() < 1e-14);
    }
}
