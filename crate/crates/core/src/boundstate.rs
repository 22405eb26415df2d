//! Small nonlinear bound states `Q[z]`, their real Jacobian, and the
//! refined profiles `(𝔄, 𝔅)`.
//!
//! Everything is solved in the eigenbasis of the discrete `H`, where
//! `(H - E)` restricted to the continuous subspace is diagonal.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{reduced_inner, ComplexField};
use crate::io::CsvTable;
use crate::spectral::SpectralDecomposition;

/// Largest admissible `|z|`.
pub const DELTA_MAX: f64 = 0.2;
pub const MAX_ITERATIONS: usize = 200;
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Chebyshev–Lobatto intervals of the interpolated branch.
pub const BRANCH_NODES: usize = 24;
/// Required contraction of the refined-profile iteration.
pub const CONTRACTION_LIMIT: f64 = 0.5;
pub const PROFILE_TOLERANCE: f64 = 1e-10;

/// `(z, Q[z], E[z])` with `Q = zφ + q`.
#[derive(Debug, Clone)]
pub struct NonlinearBoundState {
    pub z: Complex64,
    pub q_field: ComplexField,
    pub energy: f64,
    pub q: ComplexField,
    /// `‖(H - E)Q - |Q|²Q‖_2` at exit.
    pub residual: f64,
    pub iterations: usize,
    /// Residual at each iteration.
    pub history: Vec<f64>,
}

/// Solution on the real branch `a = |z| >= 0`, in eigen coordinates.
#[derive(Debug, Clone)]
struct RealBranch {
    /// Physical samples of `Q_r(a)`.
    values: Vec<f64>,
    energy: f64,
    residual: f64,
    history: Vec<f64>,
}

fn check_regime(a: f64) -> Result<()> {
    if !(a <= DELTA_MAX * (1.0 + 1e-12)) {
        return Err(Error::OutOfRegime(format!("|z| = {a:.4} exceeds δ_max = {DELTA_MAX}")));
    }
    Ok(())
}

/// Lyapunov–Schmidt iteration for real `a`.
fn solve_real(a: f64, dec: &SpectralDecomposition) -> Result<RealBranch> {
    check_regime(a)?;
    let bound = dec.require_bound()?;
    let n = dec.grid().len();
    let lambdas = dec.eigenvalues();
    let b = bound.index;
    if a == 0.0 {
        return Ok(RealBranch {
            values: vec![0.0; n],
            energy: -bound.rho2,
            residual: 0.0,
            history: vec![0.0],
        });
    }
    let mut c = vec![0.0; n];
    c[b] = a;
    let mut history = Vec::new();
    let mut worst_growth = 0;
    for it in 0..MAX_ITERATIONS {
        let q = dec.from_eigen_real(&c);
        let cube: Vec<f64> = q.iter().map(|v| v * v * v).collect();
        let nc = dec.to_eigen_real(&cube);
        // φ-component of (H - E)Q = Q³.
        let energy = -bound.rho2 - nc[b] / a;
        let residual = c
            .iter()
            .zip(lambdas)
            .zip(&nc)
            .map(|((ci, l), ni)| {
                let r = (l - energy) * ci - ni;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        if !residual.is_finite() {
            return Err(Error::Convergence(format!(
                "bound-state iteration diverged at |z| = {a}"
            )));
        }
        if let Some(&prev) = history.last() {
            if residual > prev {
                worst_growth += 1;
            } else {
                worst_growth = 0;
            }
        }
        history.push(residual);
        if residual < RESIDUAL_TOLERANCE {
            return Ok(RealBranch {
                values: q,
                energy,
                residual,
                history,
            });
        }
        if worst_growth >= 5 {
            return Err(Error::Convergence(format!(
                "bound-state residual grew for 5 iterations (|z| = {a}, iteration {it})"
            )));
        }
        for j in 0..n {
            c[j] = if j == b { a } else { nc[j] / (lambdas[j] - energy) };
        }
    }
    Err(Error::Convergence(format!(
        "bound-state iteration did not reach {RESIDUAL_TOLERANCE:e} in {MAX_ITERATIONS} iterations (|z| = {a}, residual {:.3e})",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

fn rotate(values: &[f64], z: Complex64, dec: &SpectralDecomposition) -> ComplexField {
    let phase = if z.norm() > 0.0 {
        z / z.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    ComplexField::from_vec_unchecked(*dec.grid(), values.iter().map(|&v| phase * v).collect())
}

/// Solves `(H - E)Q = |Q|²Q` with `Q = zφ + q`, `q ⊥ φ`.
pub fn solve_nonlinear_bound_state(z: Complex64, dec: &SpectralDecomposition) -> Result<NonlinearBoundState> {
    let a = z.norm();
    let real = solve_real(a, dec)?;
    let q_field = rotate(&real.values, z, dec);
    let phi = &dec.require_bound()?.phi;
    let q = q_field.axpy(-z, phi)?;
    Ok(NonlinearBoundState {
        z,
        q_field,
        energy: real.energy,
        q,
        residual: real.residual,
        iterations: real.history.len(),
        history: real.history,
    })
}

/// Anything that evaluates `z ↦ (Q[z], E[z])`.
pub trait BoundStateMap {
    fn eval(&self, z: Complex64) -> Result<(ComplexField, f64)>;
}

/// Direct solves for every evaluation.
pub struct DirectSolver<'a>(pub &'a SpectralDecomposition);

impl BoundStateMap for DirectSolver<'_> {
    fn eval(&self, z: Complex64) -> Result<(ComplexField, f64)> {
        let s = solve_nonlinear_bound_state(z, self.0)?;
        Ok((s.q_field, s.energy))
    }
}

/// `∂Q/∂Re z`, `∂Q/∂Im z` and the matching derivatives of `E`.
#[derive(Debug, Clone)]
pub struct BoundStateJacobian {
    pub z: Complex64,
    pub d1q: ComplexField,
    pub d2q: ComplexField,
    pub de: [f64; 2],
    pub step: f64,
}

impl BoundStateJacobian {
    /// `DQ[z] w = Re w D1Q + Im w D2Q`.
    pub fn apply(&self, w: Complex64) -> ComplexField {
        self.d1q.zip_with(&self.d2q, |a, b| a * w.re + b * w.im)
    }
}

/// Finite-difference step used for the Jacobian at `z`.
pub fn jacobian_step(z: Complex64) -> f64 {
    (1e-3 * z.norm()).max(1e-5)
}

/// Centered differences of any bound-state map.
pub fn jacobian_with(map: &impl BoundStateMap, z: Complex64) -> Result<BoundStateJacobian> {
    let h = jacobian_step(z);
    check_regime(z.norm() + h)?;
    let (qp, ep) = map.eval(z + h)?;
    let (qm, em) = map.eval(z - h)?;
    let (qpi, epi) = map.eval(z + Complex64::new(0.0, h))?;
    let (qmi, emi) = map.eval(z - Complex64::new(0.0, h))?;
    let inv = 1.0 / (2.0 * h);
    Ok(BoundStateJacobian {
        z,
        d1q: qp.zip_with(&qm, |a, b| (a - b) * inv),
        d2q: qpi.zip_with(&qmi, |a, b| (a - b) * inv),
        de: [(ep - em) * inv, (epi - emi) * inv],
        step: h,
    })
}

/// Jacobian from direct solves.
pub fn bound_state_jacobian(z: Complex64, dec: &SpectralDecomposition) -> Result<BoundStateJacobian> {
    jacobian_with(&DirectSolver(dec), z)
}

/// `‖DQ[z](iz) - iQ[z]‖_2`.
pub fn gauge_identity_defect(jac: &BoundStateJacobian, q: &ComplexField) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let lhs = jac.apply(i * jac.z);
    lhs.zip_with(q, |a, b| a - i * b).norm_l2()
}

/// The real branch `a ↦ Q_r(a)` interpolated in `s = a²` on Chebyshev–Lobatto
/// nodes over `[0, δ_max²]`; each node is a converged direct solve.
#[derive(Clone)]
pub struct BoundStateFamily<'a> {
    dec: &'a SpectralDecomposition,
    /// `Q_r(a_k)/a_k` (the limit `φ` at `a = 0`).
    shapes: Vec<Vec<f64>>,
    energies: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> BoundStateFamily<'a> {
    pub fn new(dec: &'a SpectralDecomposition) -> Result<Self> {
        let bound = dec.require_bound()?;
        let m = BRANCH_NODES;
        let smax = DELTA_MAX * DELTA_MAX;
        let nodes: Vec<f64> = (0..=m)
            .map(|k| 0.5 * smax * (1.0 - (std::f64::consts::PI * k as f64 / m as f64).cos()))
            .collect();
        let solved: Vec<(Vec<f64>, f64)> = nodes
            .par_iter()
            .map(|&s| -> Result<_> {
                if s == 0.0 {
                    return Ok((bound.phi.values().iter().map(|v| v.re).collect(), -bound.rho2));
                }
                let a = s.sqrt();
                let r = solve_real(a, dec)?;
                Ok((r.values.iter().map(|v| v / a).collect(), r.energy))
            })
            .collect::<Result<_>>()?;
        let weights = (0..=m)
            .map(|k| {
                let w = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == m {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        let (shapes, energies) = solved.into_iter().unzip();
        Ok(Self {
            dec,
            shapes,
            energies,
            nodes,
            weights,
        })
    }

    pub fn decomposition(&self) -> &'a SpectralDecomposition {
        self.dec
    }

    /// Barycentric weights of the interpolant at `s`.
    fn coefficients(&self, s: f64) -> Vec<f64> {
        if let Some(k) = self.nodes.iter().position(|&t| t == s) {
            let mut c = vec![0.0; self.nodes.len()];
            c[k] = 1.0;
            return c;
        }
        let raw: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(t, w)| w / (s - t)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect()
    }

    /// Real branch `(Q_r(a), E(a))`.
    pub fn real(&self, a: f64) -> Result<(Vec<f64>, f64)> {
        check_regime(a)?;
        let c = self.coefficients(a * a);
        let n = self.dec.grid().len();
        let mut q = vec![0.0; n];
        for (ck, shape) in c.iter().zip(&self.shapes) {
            for (qj, sj) in q.iter_mut().zip(shape) {
                *qj += ck * sj;
            }
        }
        for v in &mut q {
            *v *= a;
        }
        let e = c.iter().zip(&self.energies).map(|(c, e)| c * e).sum();
        Ok((q, e))
    }
}

impl BoundStateMap for BoundStateFamily<'_> {
    fn eval(&self, z: Complex64) -> Result<(ComplexField, f64)> {
        let (q, e) = self.real(z.norm())?;
        Ok((rotate(&q, z, self.dec), e))
    }
}

/// One row of the bound-state branch export.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BranchSample {
    pub modulus: f64,
    pub energy: f64,
    pub q_norm: f64,
    pub residual: f64,
}

/// Direct solves at the given moduli, in parallel.
pub fn sample_branch(moduli: &[f64], dec: &SpectralDecomposition) -> Result<Vec<BranchSample>> {
    moduli
        .par_iter()
        .map(|&a| {
            let s = solve_nonlinear_bound_state(Complex64::new(a, 0.0), dec)?;
            Ok(BranchSample {
                modulus: a,
                energy: s.energy,
                q_norm: s.q.norm_l2(),
                residual: s.residual,
            })
        })
        .collect()
}

pub fn branch_csv(samples: &[BranchSample]) -> CsvTable {
    let mut t = CsvTable::new(&["modulus", "energy", "q_norm", "residual"]);
    for s in samples {
        t.push(vec![s.modulus, s.energy, s.q_norm, s.residual]);
    }
    t
}

pub fn write_branch_csv(samples: &[BranchSample], path: &Path) -> Result<()> {
    branch_csv(samples).write(path)
}

/// Least-squares slope of `log y` against `log |z|`.
pub fn measured_order(samples: &[BranchSample], y: impl Fn(&BranchSample) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.modulus > 0.0 && y(s) > 0.0)
        .map(|s| (s.modulus.ln(), y(s).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `(𝔄, 𝔅)` and the data of the elliptic system they solve.
#[derive(Debug, Clone)]
pub struct RefinedProfiles {
    pub z_inf: Complex64,
    pub energy_inf: f64,
    pub frak_a: ComplexField,
    pub frak_b: ComplexField,
    /// `A = 2|Q[z∞]|²`.
    pub coeff_a: ComplexField,
    /// `B = Q[z∞]²`.
    pub coeff_b: ComplexField,
    pub alpha1: Complex64,
    pub beta1: Complex64,
    pub residuals: [f64; 2],
    pub contraction: f64,
    pub iterations: usize,
}

/// `∫ φ f dx`, the φ-component of `f` (no conjugation).
fn phi_component(f: &ComplexField, dec: &SpectralDecomposition) -> Complex64 {
    dec.bound_coefficient(f)
}

struct ProfileSystem<'a> {
    dec: &'a SpectralDecomposition,
    phi: ComplexField,
    a: ComplexField,
    b: ComplexField,
    rho2: f64,
    shift_b: f64,
}

impl ProfileSystem<'_> {
    fn mul(&self, c: &ComplexField, f: &ComplexField) -> ComplexField {
        c.zip_with(f, |x, y| x * y)
    }

    fn brackets(&self, fa: &ComplexField, fb: &ComplexField) -> (Complex64, Complex64) {
        let d = self.dec;
        let alpha1 = phi_component(&self.mul(&self.a, &self.phi), d)
            + phi_component(&self.mul(&self.a, fa), d)
            + phi_component(&self.mul(&self.b, fb), d);
        let beta1 = phi_component(&self.mul(&self.b, &self.phi), d)
            + phi_component(&self.mul(&self.a, fb), d)
            + phi_component(&self.mul(&self.b, fa), d);
        (alpha1, beta1)
    }

    /// Right-hand sides of both equations.
    fn rhs(&self, fa: &ComplexField, fb: &ComplexField) -> (ComplexField, ComplexField, Complex64, Complex64) {
        let (alpha1, beta1) = self.brackets(fa, fb);
        let ra = self
            .dec
            .project_continuous(
                &self
                    .mul(&self.a, fa)
                    .add(&self.mul(&self.a, &self.phi))
                    .unwrap()
                    .add(&self.mul(&self.b, fb))
                    .unwrap(),
            )
            .axpy(-alpha1, fa)
            .unwrap()
            .axpy(beta1, fb)
            .unwrap();
        let rb = self
            .dec
            .project_continuous(
                &self
                    .mul(&self.b, fa)
                    .add(&self.mul(&self.b, &self.phi))
                    .unwrap()
                    .add(&self.mul(&self.a, fb))
                    .unwrap(),
            )
            .axpy(-beta1, fa)
            .unwrap()
            .axpy(alpha1, fb)
            .unwrap();
        (ra, rb, alpha1, beta1)
    }

    /// `(H + shift)^{-1}` on the continuous subspace.
    fn invert(&self, f: &ComplexField, shift: f64) -> ComplexField {
        let b = self.dec.require_bound().unwrap().index;
        let (mut re, mut im) = self.dec.to_eigen(f);
        for (j, l) in self.dec.eigenvalues().iter().enumerate() {
            if j == b {
                re[j] = 0.0;
                im[j] = 0.0;
            } else {
                re[j] /= l + shift;
                im[j] /= l + shift;
            }
        }
        self.dec.from_eigen(&re, &im)
    }

    fn residuals(&self, fa: &ComplexField, fb: &ComplexField) -> [f64; 2] {
        let (ra, rb, _, _) = self.rhs(fa, fb);
        let la = self
            .dec
            .apply_hamiltonian(fa)
            .axpy(Complex64::new(self.rho2, 0.0), fa)
            .unwrap();
        let lb = self
            .dec
            .apply_hamiltonian(fb)
            .axpy(Complex64::new(self.shift_b, 0.0), fb)
            .unwrap();
        [la.sub(&ra).unwrap().norm_l2(), lb.sub(&rb).unwrap().norm_l2()]
    }
}

/// Picard iteration for the coupled system from `(0, 0)`.
pub fn solve_refined_profiles(z_inf: Complex64, dec: &SpectralDecomposition) -> Result<RefinedProfiles> {
    let bound = dec.require_bound()?;
    let state = solve_nonlinear_bound_state(z_inf, dec)?;
    let grid = *dec.grid();
    let coeff_a = state.q_field.map(|_, v| Complex64::new(2.0 * v.norm_sqr(), 0.0));
    let coeff_b = state.q_field.map(|_, v| v * v);
    let shift_b = -bound.rho2 - 2.0 * state.energy;
    // Smallest value of λ + shift over the continuous spectrum.
    let gap = dec
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != bound.index)
        .map(|(_, l)| (l + bound.rho2).min(l + shift_b))
        .fold(f64::INFINITY, f64::min);
    if gap < 1e-6 {
        return Err(Error::SpectralAssumption(format!(
            "refined-profile operators are near singular (gap {gap:.3e})"
        )));
    }
    let sys = ProfileSystem {
        dec,
        phi: bound.phi.clone(),
        a: coeff_a.clone(),
        b: coeff_b.clone(),
        rho2: bound.rho2,
        shift_b,
    };
    let mut fa = ComplexField::zeros(grid);
    let mut fb = ComplexField::zeros(grid);
    let mut prev_step = f64::INFINITY;
    let mut contraction: f64 = 0.0;
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let (ra, rb, _, _) = sys.rhs(&fa, &fb);
        let na = sys.invert(&ra, bound.rho2);
        let nb = sys.invert(&rb, shift_b);
        let step = (na.sub(&fa)?.mass() + nb.sub(&fb)?.mass()).sqrt();
        if prev_step.is_finite() && prev_step > 1e-14 {
            contraction = contraction.max(step / prev_step);
        }
        fa = na;
        fb = nb;
        if contraction >= CONTRACTION_LIMIT {
            return Err(Error::OutOfRegime(format!(
                "refined-profile iteration contracts by {contraction:.3} >= {CONTRACTION_LIMIT}"
            )));
        }
        let scale = (fa.mass() + fb.mass()).sqrt().max(1e-300);
        if step <= PROFILE_TOLERANCE * scale.max(1e-3) || step == 0.0 {
            break;
        }
        prev_step = step;
    }
    let residuals = sys.residuals(&fa, &fb);
    let (alpha1, beta1) = sys.brackets(&fa, &fb);
    Ok(RefinedProfiles {
        z_inf,
        energy_inf: state.energy,
        frak_a: fa,
        frak_b: fb,
        coeff_a,
        coeff_b,
        alpha1,
        beta1,
        residuals,
        contraction,
        iterations,
    })
}

/// Reduced pairing `⟨φ, q⟩` used for the orthogonality invariant.
pub fn phi_orthogonality(state: &NonlinearBoundState, dec: &SpectralDecomposition) -> Result<f64> {
    Ok(reduced_inner(&dec.require_bound()?.phi, &state.q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FrequencyGrid, SpatialGrid};
    use crate::spectral::decomposition::hamiltonian;
    use crate::spectral::{BoundStates, Potential};

    fn setup() -> SpectralDecomposition {
        let grid = SpatialGrid::new(30.0, 256).unwrap();
        let kg = FrequencyGrid::new(4.0, 64).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        SpectralDecomposition::build(&v, &kg, BoundStates::One).unwrap()
    }

    /// `‖(H - E)Q - |Q|²Q‖` with the dense matrix applied directly.
    fn dense_residual(dec: &SpectralDecomposition, s: &NonlinearBoundState) -> f64 {
        let h = hamiltonian(dec.potential());
        let n = dec.grid().len();
        let q = s.q_field.values();
        let r: f64 = (0..n)
            .map(|i| {
                let hq: Complex64 = (0..n).map(|j| q[j] * h[(i, j)]).sum();
                (hq - q[i] * s.energy - q[i] * q[i].norm_sqr()).norm_sqr()
            })
            .sum();
        (r * dec.grid().spacing()).sqrt()
    }

    #[test]
    fn zero_amplitude_is_the_linear_state() {
        let dec = setup();
        let s = solve_nonlinear_bound_state(Complex64::new(0.0, 0.0), &dec).unwrap();
        assert_eq!(s.q_field.norm_sup(), 0.0);
        assert_eq!(s.energy, -dec.bound().unwrap().rho2);
    }

    #[test]
    fn solves_the_stationary_equation() {
        let dec = setup();
        let z = Complex64::new(0.08, -0.11);
        let s = solve_nonlinear_bound_state(z, &dec).unwrap();
        assert!(s.residual < RESIDUAL_TOLERANCE);
        assert!(dense_residual(&dec, &s) < 1e-10, "{:e}", dense_residual(&dec, &s));
        assert!(phi_orthogonality(&s, &dec).unwrap().abs() < 1e-14);
        assert!((dec.bound_coefficient(&s.q_field) - z).norm() < 1e-13);
    }

    #[test]
    fn gauge_covariance() {
        let dec = setup();
        let z = Complex64::new(0.12, 0.0);
        let base = solve_nonlinear_bound_state(z, &dec).unwrap();
        for theta in [0.3, 1.7, -2.9] {
            let w = Complex64::from_polar(1.0, theta);
            let s = solve_nonlinear_bound_state(w * z, &dec).unwrap();
            let d = s.q_field.sub(&base.q_field.scale(w)).unwrap().norm_sup();
            assert!(d < 1e-12, "{d:e}");
            assert!((s.energy - base.energy).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_shift_and_correction_orders() {
        let dec = setup();
        let phi = &dec.bound().unwrap().phi;
        let rho2 = dec.bound().unwrap().rho2;
        let phi4: f64 = phi.values().iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * dec.grid().spacing();
        let samples = sample_branch(&[0.2, 0.1, 0.05, 0.025], &dec).unwrap();
        for s in &samples {
            // E = -ρ² - |z|²∫φ⁴ + O(|z|⁴)
            let lead = -rho2 - s.modulus.powi(2) * phi4;
            assert!(
                (s.energy - lead).abs() < 0.05 * (lead + rho2).abs(),
                "{} {}",
                s.energy,
                lead
            );
        }
        let shift = measured_order(&samples, |s| -(s.energy + rho2));
        assert!((shift - 2.0).abs() < 0.05, "{shift}");
        let q = measured_order(&samples, |s| s.q_norm);
        assert!((q - 3.0).abs() < 0.05, "{q}");
        let csv = branch_csv(&samples);
        assert_eq!(csv.len(), 4);
    }

    #[test]
    fn rejects_large_amplitude() {
        let dec = setup();
        assert!(matches!(
            solve_nonlinear_bound_state(Complex64::new(0.0, 0.25), &dec),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn jacobian_at_origin_and_gauge_identity() {
        let dec = setup();
        let phi = &dec.bound().unwrap().phi;
        let i = Complex64::new(0.0, 1.0);
        let j0 = bound_state_jacobian(Complex64::new(0.0, 0.0), &dec).unwrap();
        assert!(j0.d1q.sub(phi).unwrap().norm_l2() < 1e-8);
        assert!(j0.d2q.sub(&phi.scale(i)).unwrap().norm_l2() < 1e-8);
        let z = Complex64::new(0.1, 0.07);
        let jac = bound_state_jacobian(z, &dec).unwrap();
        let s = solve_nonlinear_bound_state(z, &dec).unwrap();
        assert!(gauge_identity_defect(&jac, &s.q_field) < 1e-6);
    }

    #[test]
    fn interpolated_family_matches_direct_solves() {
        let dec = setup();
        let fam = BoundStateFamily::new(&dec).unwrap();
        for a in [0.0, 0.013, 0.077, 0.141, 0.2] {
            let z = Complex64::from_polar(a, 0.4);
            let (q, e) = fam.eval(z).unwrap();
            let s = solve_nonlinear_bound_state(z, &dec).unwrap();
            assert!(q.sub(&s.q_field).unwrap().norm_l2() < 1e-11 * a.max(1e-3));
            assert!((e - s.energy).abs() < 1e-12);
        }
        let jf = jacobian_with(&fam, Complex64::new(0.05, 0.02)).unwrap();
        let jd = bound_state_jacobian(Complex64::new(0.05, 0.02), &dec).unwrap();
        assert!(jf.d1q.sub(&jd.d1q).unwrap().norm_l2() < 1e-7);
    }

    #[test]
    fn refined_profiles_converge_and_scale_quadratically() {
        let dec = setup();
        let p = solve_refined_profiles(Complex64::new(0.05, 0.0), &dec).unwrap();
        assert!(p.residuals[0] < 1e-8 && p.residuals[1] < 1e-8, "{:?}", p.residuals);
        assert!(p.contraction < CONTRACTION_LIMIT);
        assert!(dec.bound_coefficient(&p.frak_a).norm() < 1e-12);
        let h = solve_refined_profiles(Complex64::new(0.025, 0.0), &dec).unwrap();
        let ra = p.frak_a.norm_l2() / h.frak_a.norm_l2();
        let rb = p.frak_b.norm_l2() / h.frak_b.norm_l2();
        assert!((ra / 4.0 - 1.0).abs() < 0.25, "{ra}");
        assert!((rb / 4.0 - 1.0).abs() < 0.25, "{rb}");
    }
}
