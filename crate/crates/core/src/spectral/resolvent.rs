//! Green's function of `H - τ` built from the Jost solutions.
//!
//! `G(x,y) = ψ_+(x_>) ψ_-(x_<) / W` with `W = ψ_+ ψ_-' - ψ_+' ψ_-`. Applied
//! to a field it is evaluated through the factored form
//! `e^{ik|x-y|} m_+(x_>) m_-(x_<) / W`, whose exponential never grows, with
//! a fourth-order exponentially weighted cumulative quadrature.

use num_complex::Complex64;

use super::decomposition::SpectralDecomposition;
use super::jost::{JostColumn, JostSolver};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};

/// Minimal distance from the eigenvalue pole.
pub const POLE_EXCLUSION: f64 = 1e-3;
/// Largest relative variation of the Wronskian across the inner grid.
pub const WRONSKIAN_TOLERANCE: f64 = 1e-6;

/// Boundary value `τ ± i0` for `τ >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `(H - τ ∓ i0)^{-1}` on the decomposition grid.
#[derive(Debug, Clone)]
pub struct Resolvent {
    tau: f64,
    k: Complex64,
    grid: SpatialGrid,
    column: JostColumn,
    wronskian: Complex64,
    wronskian_variation: f64,
}

/// Builds the resolvent at spectral parameter `τ`.
pub fn resolvent_kernel(tau: f64, side: Side, dec: &SpectralDecomposition, solver: &JostSolver) -> Result<Resolvent> {
    if !tau.is_finite() {
        return Err(Error::invalid("spectral parameter must be finite"));
    }
    if let Some(b) = dec.bound() {
        if (tau + b.rho2).abs() < POLE_EXCLUSION {
            return Err(Error::NearPole(format!(
                "|τ + ρ²| = {:.3e} < {POLE_EXCLUSION:e}",
                (tau + b.rho2).abs()
            )));
        }
    }
    let k = if tau >= 0.0 {
        let r = tau.sqrt();
        if r > dec.kgrid().band_limit() {
            return Err(Error::invalid(format!("√τ = {r} lies outside the frequency band")));
        }
        match side {
            Side::Plus => Complex64::new(r, 0.0),
            Side::Minus => Complex64::new(-r, 0.0),
        }
    } else {
        Complex64::new(0.0, (-tau).sqrt())
    };
    if k == Complex64::new(0.0, 0.0) {
        return Err(Error::invalid("τ = 0 is a threshold; use a nonzero parameter"));
    }
    let column = solver.solve(k)?;
    let grid = *dec.grid();
    let inner = 0.8 * grid.half_width();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&j| grid.x(j).abs() <= inner).collect();
    let w0 = column.wronskian(nodes[nodes.len() / 2]);
    let wronskian_variation = nodes
        .iter()
        .map(|&j| (column.wronskian(j) - w0).norm())
        .fold(0.0, f64::max)
        / w0.norm();
    if wronskian_variation > WRONSKIAN_TOLERANCE {
        return Err(Error::Inconsistency(format!(
            "Wronskian varies by {wronskian_variation:.3e} across the grid"
        )));
    }
    Ok(Resolvent {
        tau,
        k,
        grid,
        column,
        wronskian: w0,
        wronskian_variation,
    })
}

impl Resolvent {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn wronskian(&self) -> Complex64 {
        self.wronskian
    }

    pub fn wronskian_variation(&self) -> f64 {
        self.wronskian_variation
    }

    /// `G(x_a, y_b)`.
    pub fn kernel(&self, a: usize, b: usize) -> Complex64 {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let d = self.grid.x(hi) - self.grid.x(lo);
        (Complex64::new(0.0, 1.0) * self.k * d).exp() * self.column.m_plus(hi) * self.column.m_minus(lo)
            / self.wronskian
    }

    /// `∫ G(x,y) g(y) dy` at every node.
    pub fn apply(&self, g: &ComplexField) -> Result<ComplexField> {
        if *g.grid() != self.grid {
            return Err(Error::invalid("field is not on the resolvent grid"));
        }
        let n = self.grid.len();
        let h = self.grid.spacing();
        let mp = self.column.m_plus_column();
        let mm = self.column.m_minus_column();
        let f_minus: Vec<Complex64> = g.values().iter().zip(&mm).map(|(a, b)| a * b).collect();
        let mut f_plus: Vec<Complex64> = g.values().iter().zip(&mp).map(|(a, b)| a * b).collect();
        let weights = FilonWeights::new(self.k, h);
        let left = weights.cumulative(&f_minus);
        f_plus.reverse();
        let mut right = weights.cumulative(&f_plus);
        right.reverse();
        let values = (0..n)
            .map(|j| (mp[j] * left[j] + mm[j] * right[j]) / self.wronskian)
            .collect();
        Ok(ComplexField::from_vec_unchecked(self.grid, values))
    }
}

/// Weights of `∫_0^h e^{ik(h-s)} p(s) ds` for the cubic `p` through four
/// consecutive nodes, for the three stencil placements.
struct FilonWeights {
    rot: Complex64,
    /// Indexed by stencil start relative to the interval's left node: -1, 0, -2.
    w: [[Complex64; 4]; 3],
}

impl FilonWeights {
    fn new(k: Complex64, h: f64) -> Self {
        // 8-point Gauss-Legendre on [0, 1].
        const GL: [(f64, f64); 8] = [
            (0.019855071751231856, 0.05061426814518813),
            (0.10166676129318664, 0.11119051722668724),
            (0.2372337950418355, 0.15685332293894363),
            (0.4082826787521751, 0.18134189168918100),
            (0.5917173212478249, 0.18134189168918100),
            (0.7627662049581645, 0.15685332293894363),
            (0.8983332387068134, 0.11119051722668724),
            (0.9801449282487681, 0.05061426814518813),
        ];
        let i = Complex64::new(0.0, 1.0);
        let mut w = [[Complex64::new(0.0, 0.0); 4]; 3];
        for (slot, start) in [(0usize, -1.0f64), (1, 0.0), (2, -2.0)] {
            for &(s, ws) in &GL {
                // Local coordinate in units of h; stencil nodes at start + q.
                let e = (i * k * (h * (1.0 - s))).exp() * (ws * h);
                for q in 0..4 {
                    let mut l = 1.0;
                    for r in 0..4 {
                        if r != q {
                            l *= (s - (start + r as f64)) / (q as f64 - r as f64);
                        }
                    }
                    w[slot][q] += e * l;
                }
            }
        }
        Self {
            rot: (i * k * h).exp(),
            w,
        }
    }

    /// `I_j = ∫_{x_0}^{x_j} e^{ik(x_j - y)} f(y) dy`.
    fn cumulative(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = f.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n - 1 {
            let (slot, start) = if j == 0 {
                (1, 0)
            } else if j + 2 >= n {
                (2, j - 2)
            } else {
                (0, j - 1)
            };
            let inc: Complex64 = (0..4).map(|q| self.w[slot][q] * f[start + q]).sum();
            out[j + 1] = self.rot * out[j] + inc;
        }
        out
    }
}

/// Estimate of `‖⟨x⟩^{-2} R(τ ± i0) P_c ⟨x⟩^{-2}‖_{L²→L²}` by power iteration.
pub fn weighted_resolvent_norm(
    tau: f64,
    side: Side,
    dec: &SpectralDecomposition,
    solver: &JostSolver,
    iterations: usize,
) -> Result<f64> {
    let forward = resolvent_kernel(tau, side, dec, solver)?;
    let adjoint_side = match side {
        Side::Plus => Side::Minus,
        Side::Minus => Side::Plus,
    };
    let adjoint = resolvent_kernel(tau, adjoint_side, dec, solver)?;
    let grid = *dec.grid();
    let weight = |u: &ComplexField| u.map(|x, v| v / (1.0 + x * x));
    let mut v = ComplexField::from_real_fn(grid, |x| (-x * x / 8.0).exp());
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nv = v.norm_l2();
        v = v.scale_real(1.0 / nv);
        let av = weight(&forward.apply(&dec.project_continuous(&weight(&v)))?);
        estimate = av.norm_l2();
        // A* = W P_c R(τ ∓ i0) W.
        v = weight(&dec.project_continuous(&adjoint.apply(&weight(&av))?));
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use crate::spectral::decomposition::BoundStates;
    use crate::spectral::potential::Potential;

    fn setup(name: &str, bound: BoundStates) -> (SpectralDecomposition, JostSolver) {
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let kg = FrequencyGrid::new(8.0, 64).unwrap();
        let v = if name == "zero" {
            Potential::zero(grid)
        } else {
            Potential::preset(name, grid).unwrap()
        };
        let dec = SpectralDecomposition::build(&v, &kg, bound).unwrap();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        (dec, solver)
    }

    #[test]
    fn free_kernel_matches_closed_form() {
        let (dec, solver) = setup("zero", BoundStates::None);
        let r = resolvent_kernel(-1.0, Side::Plus, &dec, &solver).unwrap();
        let grid = *dec.grid();
        for a in (0..grid.len()).step_by(37) {
            for b in (0..grid.len()).step_by(41) {
                let d = (grid.x(a) - grid.x(b)).abs();
                assert!((r.kernel(a, b) - 0.5 * (-d).exp()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn resolvent_inverts_shifted_hamiltonian() {
        let (dec, solver) = setup("gaussian_well", BoundStates::One);
        let rho2 = dec.bound().unwrap().rho2;
        let tau = -2.0 * rho2;
        let r = resolvent_kernel(tau, Side::Plus, &dec, &solver).unwrap();
        let g = ComplexField::from_fn(*dec.grid(), |x| {
            Complex64::new((-(x - 1.0) * (x - 1.0)).exp(), 0.5 * x * (-x * x / 2.0).exp())
        });
        let rg = r.apply(&g).unwrap();
        let back = dec.apply_hamiltonian(&rg).axpy(Complex64::new(-tau, 0.0), &rg).unwrap();
        let err = back.sub(&g).unwrap().norm_l2() / g.norm_l2();
        assert!(err < 1e-4, "{err:e}");
    }

    #[test]
    fn pole_is_excluded() {
        let (dec, solver) = setup("gaussian_well", BoundStates::One);
        let rho2 = dec.bound().unwrap().rho2;
        assert!(matches!(
            resolvent_kernel(-rho2 + 1e-4, Side::Plus, &dec, &solver),
            Err(Error::NearPole(_))
        ));
    }

    #[test]
    fn outgoing_resolvent_at_positive_energy() {
        // (H - k² - i0)^{-1} g solves the equation and radiates outward.
        let (dec, solver) = setup("gaussian_well", BoundStates::One);
        let r = resolvent_kernel(1.0, Side::Plus, &dec, &solver).unwrap();
        assert!(r.wronskian_variation() < 1e-9);
        let g = ComplexField::from_real_fn(*dec.grid(), |x| (-x * x).exp());
        let rg = r.apply(&g).unwrap();
        // Away from the source, u ∝ e^{i|x|}.
        let grid = *dec.grid();
        let j = (0..grid.len()).find(|&j| grid.x(j) >= 20.0).unwrap();
        let ratio = rg.values()[j + 1] / rg.values()[j];
        let expect = Complex64::new(0.0, grid.spacing()).exp();
        assert!((ratio - expect).norm() < 1e-6);
    }
}
