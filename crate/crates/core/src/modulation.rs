//! Soliton plus radiation decomposition `u = Q[z] + η` under the
//! orthogonality conditions `⟨iη, D_jQ[z]⟩ = 0`, and tracking of `z(t)`.

use std::path::Path;

use num_complex::Complex64;

use crate::boundstate::{jacobian_with, BoundStateJacobian, BoundStateMap, DELTA_MAX};
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::grid::{kinetic_energy, reduced_inner, ComplexField};
use crate::io::CsvTable;
use crate::spectral::SpectralDecomposition;

/// Smallness radius in `H¹` for the decomposition.
pub const DECOMPOSE_RADIUS: f64 = 0.2;
pub const ORTHO_TOLERANCE: f64 = 1e-9;
/// Newton keeps iterating towards this level and accepts [`ORTHO_TOLERANCE`].
const NEWTON_TARGET: f64 = 1e-14;
pub const MAX_NEWTON: usize = 30;
pub const UNIQUENESS_TOLERANCE: f64 = 1e-8;
/// `|det|` below which the comparison system is treated as singular.
pub const SINGULAR_DET: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One decomposed snapshot.
#[derive(Debug, Clone)]
pub struct ModulationState {
    pub t: f64,
    pub z: Complex64,
    pub energy: f64,
    /// `∫₀ᵗ E[z]`, filled in by [`track_modulation`].
    pub theta: f64,
    pub eta: ComplexField,
    /// `|⟨iη, D_jQ[z]⟩|` with the reduced product.
    pub ortho_residual: [f64; 2],
    /// `|∫ conj(iη) D_jQ[z]|`, the unreduced pairing.
    pub ortho_residual_complex: [f64; 2],
    pub newton_iterations: usize,
    pub uniqueness_gap: f64,
}

/// `sqrt(‖u‖₂² + ‖∂ₓu‖₂²)`.
pub fn h1_norm(u: &ComplexField) -> f64 {
    (u.mass() + kinetic_energy(u)).sqrt()
}

fn pairing(a: &ComplexField, b: &ComplexField) -> Complex64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * a.grid().spacing()
}

fn residual(u: &ComplexField, q: &ComplexField, jac: &BoundStateJacobian) -> [f64; 2] {
    let ieta = u.zip_with(q, |a, b| I * (a - b));
    [reduced_inner(&ieta, &jac.d1q), reduced_inner(&ieta, &jac.d2q)]
}

fn newton(map: &impl BoundStateMap, u: &ComplexField, start: Complex64) -> Result<(Complex64, usize)> {
    let mut z = start;
    for it in 0..=MAX_NEWTON {
        let (q, _) = map.eval(z)?;
        let jac = jacobian_with(map, z)?;
        let k = residual(u, &q, &jac);
        let r = k[0].abs().max(k[1].abs());
        if r < NEWTON_TARGET || (it == MAX_NEWTON && r < ORTHO_TOLERANCE) {
            return Ok((z, it));
        }
        if it == MAX_NEWTON {
            break;
        }
        // Leading part of ∂K_j/∂z_l; the term with second derivatives of Q
        // is proportional to η and is dropped.
        let d = [&jac.d1q, &jac.d2q];
        let mut m = [[0.0; 2]; 2];
        for (j, dj) in d.iter().enumerate() {
            for (l, dl) in d.iter().enumerate() {
                m[j][l] = -reduced_inner(&dl.scale(I), dj);
            }
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < SINGULAR_DET {
            return Err(Error::Decomposition(format!("singular Newton matrix at z = {z}")));
        }
        let dx = (m[1][1] * k[0] - m[0][1] * k[1]) / det;
        let dy = (m[0][0] * k[1] - m[1][0] * k[0]) / det;
        let mut next = z - Complex64::new(dx, dy);
        if next.norm() > DELTA_MAX * 0.99 {
            next = z + 0.5 * (next - z);
        }
        if !next.re.is_finite() || !next.im.is_finite() || next.norm() > DELTA_MAX * 0.99 {
            return Err(Error::Decomposition(format!(
                "Newton step left the ball |z| < {DELTA_MAX}"
            )));
        }
        z = next;
    }
    Err(Error::Decomposition(format!(
        "orthogonality residual above {ORTHO_TOLERANCE:e} after {MAX_NEWTON} Newton iterations"
    )))
}

/// Decomposes `u` into `Q[z] + η`. The initial guess is `hint` or `(φ, u)`.
pub fn decompose_with(
    map: &impl BoundStateMap,
    dec: &SpectralDecomposition,
    u: &ComplexField,
    hint: Option<Complex64>,
) -> Result<ModulationState> {
    let norm = h1_norm(u);
    if norm > DECOMPOSE_RADIUS {
        return Err(Error::OutOfRegime(format!(
            "‖u‖_H¹ = {norm:.4} exceeds {DECOMPOSE_RADIUS}"
        )));
    }
    let guess = hint.unwrap_or_else(|| dec.bound_coefficient(u));
    let (z, iterations) = newton(map, u, guess)?;
    let (z2, _) = newton(map, u, 1.2 * guess)?;
    let gap = (z - z2).norm();
    if gap > UNIQUENESS_TOLERANCE {
        return Err(Error::Decomposition(format!(
            "second start converged to a different z ({z} vs {z2})"
        )));
    }
    let (q, energy) = map.eval(z)?;
    let jac = jacobian_with(map, z)?;
    let eta = u.sub(&q)?;
    let ortho = residual(u, &q, &jac);
    let ieta = eta.scale(I);
    Ok(ModulationState {
        t: 0.0,
        z,
        energy,
        theta: 0.0,
        ortho_residual: [ortho[0].abs(), ortho[1].abs()],
        ortho_residual_complex: [pairing(&ieta, &jac.d1q).norm(), pairing(&ieta, &jac.d2q).norm()],
        eta,
        newton_iterations: iterations,
        uniqueness_gap: gap,
    })
}

/// [`decompose_with`] using direct bound-state solves.
pub fn decompose(u: &ComplexField, dec: &SpectralDecomposition, hint: Option<Complex64>) -> Result<ModulationState> {
    decompose_with(&crate::boundstate::DirectSolver(dec), dec, u, hint)
}

/// Modulation parameters along a trajectory.
#[derive(Debug, Clone)]
pub struct ModulationPath {
    pub states: Vec<ModulationState>,
    /// Centered-difference `ż`.
    pub zdot: Vec<Complex64>,
    /// `|ż - iE[z]z|`, computed as `|d/dt (z e^{-iΘ})|`.
    pub defect: Vec<f64>,
    /// `|⟨Q̄η² + 2Q|η|² + |η|²η, D_jQ⟩|` summed over `j` (unreduced pairing).
    pub defect_bound: Vec<f64>,
    /// `z(t) e^{-iΘ(t)}`.
    pub limit: Vec<Complex64>,
}

impl ModulationPath {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.z.norm()).collect()
    }

    fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.states.iter().enumerate() {
            if (s.t - t).abs() < (self.states[best].t - t).abs() {
                best = i;
            }
        }
        best
    }

    /// `|w(t) - w(t/2)|` with `w = z e^{-iΘ}`.
    pub fn cauchy_gap(&self, t: f64) -> f64 {
        (self.limit[self.index_near(t)] - self.limit[self.index_near(0.5 * t)]).norm()
    }

    /// `| |z(T)| - |z(T/2)| |`.
    pub fn modulus_gap(&self, t: f64) -> f64 {
        (self.states[self.index_near(t)].z.norm() - self.states[self.index_near(0.5 * t)].z.norm()).abs()
    }

    pub fn max_ortho_residual(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.ortho_residual[0].max(s.ortho_residual[1]))
            .fold(0.0, f64::max)
    }

    /// Median of `defect / defect_bound` over stored times in `[ta, tb]`.
    pub fn fitted_constant(&self, ta: f64, tb: f64) -> f64 {
        let mut r: Vec<f64> = self
            .states
            .iter()
            .zip(self.defect.iter().zip(&self.defect_bound))
            .filter(|(s, (_, b))| s.t >= ta && s.t <= tb && **b > 0.0)
            .map(|(_, (d, b))| d / b)
            .collect();
        if r.is_empty() {
            return f64::NAN;
        }
        r.sort_by(|a, b| a.total_cmp(b));
        r[r.len() / 2]
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "t",
            "re_z",
            "im_z",
            "energy",
            "theta",
            "defect",
            "defect_bound",
            "cauchy_gap",
            "ortho_1",
            "ortho_2",
        ]);
        for (i, s) in self.states.iter().enumerate() {
            t.push(vec![
                s.t,
                s.z.re,
                s.z.im,
                s.energy,
                s.theta,
                self.defect[i],
                self.defect_bound[i],
                self.cauchy_gap(s.t),
                s.ortho_residual[0],
                s.ortho_residual[1],
            ]);
        }
        t
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }
}

fn centered(times: &[f64], values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                Complex64::new(0.0, 0.0)
            } else if i == 0 {
                (values[1] - values[0]) / (times[1] - times[0])
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / (times[n - 1] - times[n - 2])
            } else {
                (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1])
            }
        })
        .collect()
}

/// Decomposes every snapshot, warm-starting from `z e^{iEΔt}` of the previous one.
pub fn track_modulation(
    traj: &Trajectory,
    map: &impl BoundStateMap,
    dec: &SpectralDecomposition,
) -> Result<ModulationPath> {
    let mut states: Vec<ModulationState> = Vec::with_capacity(traj.len());
    for (i, (t, u)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        let hint = states
            .last()
            .map(|p| p.z * Complex64::from_polar(1.0, p.energy * (t - p.t)));
        let mut s =
            decompose_with(map, dec, u, hint).map_err(|e| e.in_stage(format!("decompose snapshot {i} (t = {t})")))?;
        s.t = *t;
        s.theta = match states.last() {
            Some(p) => p.theta + 0.5 * (t - p.t) * (p.energy + s.energy),
            None => 0.0,
        };
        states.push(s);
    }
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let z: Vec<Complex64> = states.iter().map(|s| s.z).collect();
    let limit: Vec<Complex64> = states
        .iter()
        .map(|s| s.z * Complex64::from_polar(1.0, -s.theta))
        .collect();
    let wdot = centered(&times, &limit);
    let zdot: Vec<Complex64> = states
        .iter()
        .zip(&wdot)
        .map(|(s, w)| I * s.energy * s.z + Complex64::from_polar(1.0, s.theta) * w)
        .collect();
    let defect = wdot.iter().map(|w| w.norm()).collect();
    let defect_bound = states
        .iter()
        .zip(&z)
        .map(|(s, &zi)| -> Result<f64> {
            let (q, _) = map.eval(zi)?;
            let jac = jacobian_with(map, zi)?;
            let n = q.zip_with(&s.eta, |q, e| {
                q.conj() * e * e + 2.0 * q * e.norm_sqr() + e.norm_sqr() * e
            });
            Ok(pairing(&n, &jac.d1q).norm() + pairing(&n, &jac.d2q).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ModulationPath {
        states,
        zdot,
        defect,
        defect_bound,
        limit,
    })
}

/// `𝒦(z)η = η + (α(z)η)φ` with `α(z)η` chosen so the image satisfies
/// `⟨i𝒦(z)η, D_jQ[z]⟩ = 0`. Returns the image and `‖P_c 𝒦(z)η - P_c η‖₂`.
pub fn projection_comparison(
    z: Complex64,
    eta: &ComplexField,
    map: &impl BoundStateMap,
    dec: &SpectralDecomposition,
) -> Result<(ComplexField, f64)> {
    if z.norm() > DELTA_MAX {
        return Err(Error::OutOfRegime(format!("|z| = {} exceeds δ_max", z.norm())));
    }
    let phi = &dec.require_bound()?.phi;
    let jac = jacobian_with(map, z)?;
    let iphi = phi.scale(I);
    let ieta = eta.scale(I);
    // ⟨i(η + (c₁ + ic₂)φ), D_j⟩ = ⟨iη, D_j⟩ + c₁⟨iφ, D_j⟩ - c₂⟨φ, D_j⟩
    let d = [&jac.d1q, &jac.d2q];
    let m: Vec<[f64; 2]> = d
        .iter()
        .map(|dj| [reduced_inner(&iphi, dj), -reduced_inner(phi, dj)])
        .collect();
    let rhs: Vec<f64> = d.iter().map(|dj| -reduced_inner(&ieta, dj)).collect();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < SINGULAR_DET {
        return Err(Error::OutOfRegime(format!(
            "comparison system is singular (det {det:e})"
        )));
    }
    let c1 = (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det;
    let c2 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    let mapped = eta.axpy(Complex64::new(c1, c2), phi)?;
    let defect = dec
        .project_continuous(&mapped)
        .sub(&dec.project_continuous(eta))?
        .norm_l2();
    Ok((mapped, defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundstate::{solve_nonlinear_bound_state, BoundStateFamily};
    use crate::evolution::{evolve, EvolutionConfig, Variant};
    use crate::grid::{FrequencyGrid, SpatialGrid};
    use crate::spectral::{BoundStates, Potential};

    fn setup() -> SpectralDecomposition {
        let grid = SpatialGrid::new(40.0, 256).unwrap();
        let kg = FrequencyGrid::new(3.0, 64).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        SpectralDecomposition::build(&v, &kg, BoundStates::One).unwrap()
    }

    fn radiation(dec: &SpectralDecomposition, amp: f64, x0: f64) -> ComplexField {
        let p = ComplexField::from_fn(*dec.grid(), |x| {
            Complex64::from_polar(amp * (-(x - x0) * (x - x0) / 8.0).exp(), 0.7 * x)
        });
        dec.project_continuous(&p)
    }

    #[test]
    fn exact_soliton_has_no_radiation() {
        let dec = setup();
        let z = Complex64::new(0.08, 0.0);
        let q = solve_nonlinear_bound_state(z, &dec).unwrap().q_field;
        let s = decompose(&q, &dec, None).unwrap();
        assert!((s.z - z).norm() < 1e-10, "{}", s.z);
        assert!(s.eta.norm_sup() < 1e-10);
        assert!(s.ortho_residual[0] < ORTHO_TOLERANCE && s.ortho_residual[1] < ORTHO_TOLERANCE);
    }

    #[test]
    fn recovers_z_under_orthogonal_perturbation() {
        let dec = setup();
        let fam = BoundStateFamily::new(&dec).unwrap();
        let z = Complex64::new(0.08, 0.0);
        // Build η ∈ H_c[z] by mapping P_c radiation through 𝒦(z).
        let (eta, _) = projection_comparison(z, &radiation(&dec, 0.03, 5.0), &fam, &dec).unwrap();
        let (q, _) = fam.eval(z).unwrap();
        let u = q.add(&eta).unwrap();
        let s = decompose_with(&fam, &dec, &u, None).unwrap();
        assert!((s.z - z).norm() < 1e-8, "{}", (s.z - z).norm());
        assert!(u.sub(&q).unwrap().sub(&s.eta).unwrap().norm_l2() < 1e-8);
        let back = s.eta.add(&fam.eval(s.z).unwrap().0).unwrap();
        assert!(back.sub(&u).unwrap().norm_l2() < 1e-12);
    }

    #[test]
    fn pure_radiation_has_no_soliton() {
        let dec = setup();
        let s = decompose(&radiation(&dec, 0.03, 0.0), &dec, None).unwrap();
        assert!(s.z.norm() < 1e-6, "{}", s.z.norm());
    }

    #[test]
    fn decomposition_is_gauge_equivariant() {
        let dec = setup();
        let fam = BoundStateFamily::new(&dec).unwrap();
        let (q, _) = fam.eval(Complex64::new(0.06, 0.02)).unwrap();
        let u = q.add(&radiation(&dec, 0.02, -3.0)).unwrap();
        let a = decompose_with(&fam, &dec, &u, None).unwrap();
        let w = Complex64::from_polar(1.0, 1.1);
        let b = decompose_with(&fam, &dec, &u.scale(w), None).unwrap();
        assert!((b.z - w * a.z).norm() < 1e-9);
        assert!(b.eta.sub(&a.eta.scale(w)).unwrap().norm_sup() < 1e-9);
    }

    #[test]
    fn rejects_large_states() {
        let dec = setup();
        let u = dec.require_bound().unwrap().phi.scale_real(0.5);
        assert!(matches!(decompose(&u, &dec, None), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn solitary_trajectory_has_no_defect() {
        let dec = setup();
        let fam = BoundStateFamily::new(&dec).unwrap();
        let (q, _) = fam.eval(Complex64::new(0.1, 0.0)).unwrap();
        let traj = evolve(&q, &EvolutionConfig::new(Variant::focusing(), 0.02, 10.0, 25), &dec).unwrap();
        let path = track_modulation(&traj, &fam, &dec).unwrap();
        assert!(path.defect.iter().all(|d| *d < 1e-6), "{:?}", path.defect);
        let m = path.moduli();
        assert!(m.iter().all(|a| (a - m[0]).abs() < 1e-8));
        assert!(path.max_ortho_residual() < ORTHO_TOLERANCE);
        assert_eq!(path.to_csv().len(), traj.len());

        // Tracking every second snapshot agrees at shared times.
        let sub = Trajectory {
            times: traj.times.iter().step_by(2).copied().collect(),
            snapshots: traj.snapshots.iter().step_by(2).cloned().collect(),
            conserved: traj.conserved.iter().step_by(2).copied().collect(),
            config: traj.config.clone(),
        };
        let coarse = track_modulation(&sub, &fam, &dec).unwrap();
        for (i, s) in coarse.states.iter().enumerate() {
            assert!((s.z - path.states[2 * i].z).norm() < 1e-8);
        }
    }

    #[test]
    fn comparison_operator_properties() {
        let dec = setup();
        let fam = BoundStateFamily::new(&dec).unwrap();
        let eta = radiation(&dec, 0.05, 2.0);
        let (m0, d0) = projection_comparison(Complex64::new(0.0, 0.0), &eta, &fam, &dec).unwrap();
        assert!(m0.sub(&eta).unwrap().norm_l2() < 1e-12);
        assert!(d0 < 1e-14);

        let z = Complex64::new(0.1, 0.0);
        let (mapped, defect) = projection_comparison(z, &eta, &fam, &dec).unwrap();
        assert!(defect < 1e-14);
        let jac = jacobian_with(&fam, z).unwrap();
        let im = mapped.scale(I);
        assert!(reduced_inner(&im, &jac.d1q).abs() < 1e-10);
        assert!(reduced_inner(&im, &jac.d2q).abs() < 1e-10);

        // ‖𝒦(z) - I‖ over a probe family shrinks at least linearly in |z|.
        let norm = |z: f64| {
            (0..20)
                .map(|p| {
                    let h = radiation(&dec, 1.0, -20.0 + 2.0 * p as f64);
                    let (m, _) = projection_comparison(Complex64::new(z, 0.0), &h, &fam, &dec).unwrap();
                    m.sub(&h).unwrap().norm_l2() / h.norm_l2()
                })
                .fold(0.0, f64::max)
        };
        let ratio = norm(0.1) / norm(0.05);
        assert!(ratio > 1.8, "{ratio}");
    }
}
