//! Jost solutions from the Volterra equation
//!
//! `m_±(x,k) = 1 ± ∫_x^{±∞} D_k(±(y-x)) V(y) m_±(y,k) dy`, `D_k(y) = (e^{2iky}-1)/(2ik)`.
//!
//! The kernel is separable, so one inward pass with running sums solves the
//! trapezoid-discretized triangular system exactly in `O(N)` per wavenumber.
//! The pass runs only across the support of `V`; outside it `m_±` is given in
//! closed form by the accumulated integrals. Three passes at step `h`, `h/2`,
//! `h/4` are Richardson-extrapolated, which removes the `h^2` and `h^4` terms
//! of the trapezoid error expansion.

use num_complex::Complex64;
use rayon::prelude::*;

use super::potential::Potential;
use crate::error::{Error, Result};
use crate::grid::{DerivativeOrder, FrequencyGrid, SpatialGrid};

/// Divergence threshold for the marching pass.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Largest marching step.
const MAX_STEP: f64 = 0.02;
/// Largest phase advance `|k| h` per marching step.
const MAX_PHASE_STEP: f64 = 0.25;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Result of one marching pass in the `+` orientation (from the right end
/// of the support towards the left).
#[derive(Debug, Clone)]
struct Pass {
    /// `m` at the coarse nodes of the support, left to right.
    m: Vec<Complex64>,
    /// `∂x m` at the same nodes.
    dm: Vec<Complex64>,
    /// `∫ V m dy` over the support.
    int_vm: Complex64,
    /// `∫ e^{2ik(y-a)} V m dy` with `a` the left end of the support.
    int_phase_vm: Complex64,
    /// `∫ (y-a) V m dy`.
    int_moment_vm: Complex64,
}

impl Pass {
    fn combine(a: &Pass, b: &Pass, wa: f64, wb: f64) -> Pass {
        let lin = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(p, q)| p * wa + q * wb).collect()
        };
        Pass {
            m: lin(&a.m, &b.m),
            dm: lin(&a.dm, &b.dm),
            int_vm: a.int_vm * wa + b.int_vm * wb,
            int_phase_vm: a.int_phase_vm * wa + b.int_phase_vm * wb,
            int_moment_vm: a.int_moment_vm * wa + b.int_moment_vm * wb,
        }
    }
}

/// Marches `m_+` across fine samples `v` (left to right, spacing `h`) and
/// returns values at every `stride`-th sample.
fn march(v: &[f64], h: f64, stride: usize, k: Complex64) -> Result<Pass> {
    let n = v.len() - 1;
    debug_assert_eq!(n % stride, 0);
    let ncoarse = n / stride + 1;
    let mut m_out = vec![ZERO; ncoarse];
    let mut dm_out = vec![ZERO; ncoarse];
    let half = 0.5 * h;
    let zero_k = k == ZERO;
    let i2k = Complex64::new(0.0, 2.0) * k;
    let rot = (i2k * h).exp();

    // Running sums anchored at the current node y_p:
    //   a = ∫_{y_p}^b e^{2ik(y-y_p)} g dy, b = ∫_{y_p}^b g dy, c = ∫_{y_p}^b (y-y_p) g dy.
    let mut g_next = ZERO;
    let mut a_sum = ZERO;
    let mut b_sum = ZERO;
    let mut c_sum = ZERO;
    for p in (0..=n).rev() {
        let (m, a_new, b_new, c_new);
        if p == n {
            m = ONE;
            b_new = ZERO;
            a_new = ZERO;
            c_new = ZERO;
        } else {
            // Contributions that do not involve g_p; the g_p terms cancel
            // because D_k(0) = 0.
            let b_part = b_sum + g_next * half;
            if zero_k {
                let c_part = c_sum + b_sum * h + g_next * (half * h);
                m = ONE + c_part;
                c_new = c_part;
                a_new = ZERO;
            } else {
                let a_part = rot * (a_sum + g_next * half);
                m = ONE + (a_part - b_part) / i2k;
                a_new = a_part;
                c_new = ZERO;
            }
            b_new = b_part;
        }
        if !(m.norm() < DIVERGENCE_LIMIT) {
            return Err(Error::NumericalInstability(format!(
                "Jost marching diverged (|m| = {:.3e}) at k = {k}",
                m.norm()
            )));
        }
        let g = m * v[p];
        let (a_full, b_full, c_full) = if p == n {
            (ZERO, ZERO, ZERO)
        } else {
            (a_new + g * half, b_new + g * half, c_new)
        };
        if p % stride == 0 {
            m_out[p / stride] = m;
            dm_out[p / stride] = if zero_k { -b_full } else { -a_full };
        }
        a_sum = a_full;
        b_sum = b_full;
        c_sum = c_full;
        g_next = g;
    }
    Ok(Pass {
        m: m_out,
        dm: dm_out,
        int_vm: b_sum,
        int_phase_vm: a_sum,
        int_moment_vm: c_sum,
    })
}

/// Extrapolated pass from refinements `r`, `2r`, `4r` of the coarse spacing.
fn extrapolated_pass(fine: &[f64], h_fine: f64, r: usize, k: Complex64) -> Result<Pass> {
    // `fine` is sampled at spacing h_fine = dx / (4r).
    let sub = |step: usize| -> Vec<f64> { fine.iter().step_by(step).copied().collect() };
    let p1 = march(&sub(4), 4.0 * h_fine, r, k)?;
    let p2 = march(&sub(2), 2.0 * h_fine, 2 * r, k)?;
    let p4 = march(fine, h_fine, 4 * r, k)?;
    let e1 = Pass::combine(&p2, &p1, 4.0 / 3.0, -1.0 / 3.0);
    let e2 = Pass::combine(&p4, &p2, 4.0 / 3.0, -1.0 / 3.0);
    Ok(Pass::combine(&e2, &e1, 16.0 / 15.0, -1.0 / 15.0))
}

/// Jost data for one wavenumber (real, or with `Im k > 0`).
#[derive(Debug, Clone)]
pub struct JostColumn {
    k: Complex64,
    grid: SpatialGrid,
    /// First and last coarse node of the support, `None` for `V ≡ 0`.
    support: Option<(usize, usize)>,
    plus: Option<Pass>,
    minus: Option<Pass>,
}

impl JostColumn {
    pub fn k(&self) -> Complex64 {
        self.k
    }

    /// `m_+(x_j, k)`.
    pub fn m_plus(&self, j: usize) -> Complex64 {
        self.eval_plus(j).0
    }

    /// `m_-(x_j, k)`.
    pub fn m_minus(&self, j: usize) -> Complex64 {
        self.eval_minus(j).0
    }

    /// `∂x m_+(x_j, k)`.
    pub fn dm_plus(&self, j: usize) -> Complex64 {
        self.eval_plus(j).1
    }

    /// `∂x m_-(x_j, k)`.
    pub fn dm_minus(&self, j: usize) -> Complex64 {
        self.eval_minus(j).1
    }

    fn eval_plus(&self, j: usize) -> (Complex64, Complex64) {
        let (Some((lo, hi)), Some(p)) = (self.support, &self.plus) else {
            return (ONE, ZERO);
        };
        if j > hi {
            (ONE, ZERO)
        } else if j >= lo {
            (p.m[j - lo], p.dm[j - lo])
        } else {
            let a = self.grid.x(lo);
            let d = a - self.grid.x(j);
            exterior(self.k, d, p)
        }
    }

    fn eval_minus(&self, j: usize) -> (Complex64, Complex64) {
        let (Some((lo, hi)), Some(p)) = (self.support, &self.minus) else {
            return (ONE, ZERO);
        };
        // The minus pass is stored in reflected coordinates: index 0 is the
        // right end of the support.
        if j < lo {
            (ONE, ZERO)
        } else if j <= hi {
            let q = hi - j;
            (p.m[q], -p.dm[q])
        } else {
            let b = self.grid.x(hi);
            let d = self.grid.x(j) - b;
            let (m, dm) = exterior(self.k, d, p);
            (m, -dm)
        }
    }

    /// `ψ_+(x_j,k) = e^{ikx} m_+`.
    pub fn psi_plus(&self, j: usize) -> Complex64 {
        let x = self.grid.x(j);
        (Complex64::new(0.0, 1.0) * self.k * x).exp() * self.m_plus(j)
    }

    /// `ψ_-(x_j,k) = e^{-ikx} m_-`.
    pub fn psi_minus(&self, j: usize) -> Complex64 {
        let x = self.grid.x(j);
        (Complex64::new(0.0, -1.0) * self.k * x).exp() * self.m_minus(j)
    }

    /// `∫ V m_+ dx`.
    pub fn int_v_m_plus(&self) -> Complex64 {
        self.plus.as_ref().map_or(ZERO, |p| p.int_vm)
    }

    /// `∫ V m_- dx`.
    pub fn int_v_m_minus(&self) -> Complex64 {
        self.minus.as_ref().map_or(ZERO, |p| p.int_vm)
    }

    /// `∫ e^{2ikx} V m_+ dx` (real `k` only).
    pub fn int_phase_v_m_plus(&self) -> Complex64 {
        match (self.support, &self.plus) {
            (Some((lo, _)), Some(p)) => {
                let a = self.grid.x(lo);
                (Complex64::new(0.0, 2.0) * self.k * a).exp() * p.int_phase_vm
            }
            _ => ZERO,
        }
    }

    /// `∫ e^{-2ikx} V m_- dx` (real `k` only).
    pub fn int_phase_v_m_minus(&self) -> Complex64 {
        match (self.support, &self.minus) {
            (Some((_, hi)), Some(p)) => {
                let b = self.grid.x(hi);
                (Complex64::new(0.0, -2.0) * self.k * b).exp() * p.int_phase_vm
            }
            _ => ZERO,
        }
    }

    /// Wronskian `W[ψ_+, ψ_-] = ψ_+ ψ_-' - ψ_+' ψ_-` at node `j`; constant in `x`
    /// and equal to `-2ik / T(k)`.
    pub fn wronskian(&self, j: usize) -> Complex64 {
        let (mp, dmp) = self.eval_plus(j);
        let (mm, dmm) = self.eval_minus(j);
        let ik = Complex64::new(0.0, 1.0) * self.k;
        mp * (dmm - ik * mm) - (dmp + ik * mp) * mm
    }

    pub fn m_plus_column(&self) -> Vec<Complex64> {
        (0..self.grid.len()).map(|j| self.m_plus(j)).collect()
    }

    pub fn m_minus_column(&self) -> Vec<Complex64> {
        (0..self.grid.len()).map(|j| self.m_minus(j)).collect()
    }

    /// Sup norm of the residual of `-m'' - 2ik m' + V m = 0` (the Jost ODE
    /// with the plane wave stripped) over the inner 80% of the box, with
    /// `m''` from fourth-order differences of the exact `m'`.
    pub fn ode_residual(&self, potential: &Potential) -> f64 {
        let n = self.grid.len();
        let ik2 = Complex64::new(0.0, 2.0) * self.k;
        let mut worst: f64 = 0.0;
        for (sign, dm) in [(1.0, self.dm_column(true)), (-1.0, self.dm_column(false))] {
            let field = crate::grid::ComplexField::from_vec_unchecked(self.grid, dm.clone());
            let d2 = crate::grid::spatial_derivative(&field, DerivativeOrder::First);
            let inner = 0.8 * self.grid.half_width();
            for j in 0..n {
                if self.grid.x(j).abs() > inner {
                    continue;
                }
                let m = if sign > 0.0 { self.m_plus(j) } else { self.m_minus(j) };
                // m_- solves -m'' + 2ik m' + V m = 0.
                let r = -d2.values()[j] - ik2 * sign * dm[j] + m * potential.values()[j];
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    fn dm_column(&self, plus: bool) -> Vec<Complex64> {
        (0..self.grid.len())
            .map(|j| if plus { self.dm_plus(j) } else { self.dm_minus(j) })
            .collect()
    }
}

/// `m_+` and `∂x m_+` a distance `d >= 0` to the left of the support.
fn exterior(k: Complex64, d: f64, p: &Pass) -> (Complex64, Complex64) {
    if k == ZERO {
        (ONE + p.int_moment_vm + p.int_vm * d, -p.int_vm)
    } else {
        let i2k = Complex64::new(0.0, 2.0) * k;
        let e = (i2k * d).exp() * p.int_phase_vm;
        (ONE + (e - p.int_vm) / i2k, -e)
    }
}

/// Reusable marching setup for one potential.
#[derive(Debug, Clone)]
pub struct JostSolver {
    grid: SpatialGrid,
    support: Option<(usize, usize)>,
    refine: usize,
    fine: Vec<f64>,
    fine_reflected: Vec<f64>,
    h_fine: f64,
}

impl JostSolver {
    /// Prepares fine samples of `V` across its support. `k_max` bounds the
    /// wavenumbers that will be requested and sets the marching step.
    pub fn new(potential: &Potential, k_max: f64) -> Result<Self> {
        potential.check_decayed()?;
        let grid = *potential.grid();
        let dx = grid.spacing();
        let support = potential.support_nodes();
        let step = MAX_STEP.min(MAX_PHASE_STEP / k_max.max(1.0));
        // Coarse passes use dx / refine, the finest dx / (4 refine).
        let refine = if potential.is_analytic() {
            ((dx / (4.0 * step)).ceil() as usize).max(1)
        } else {
            1
        };
        let h_fine = dx / (4 * refine) as f64;
        let (fine, fine_reflected) = match support {
            Some((lo, hi)) => {
                let a = grid.x(lo);
                let count = (hi - lo) * 4 * refine;
                let fine: Vec<f64> = (0..=count).map(|p| potential.eval(a + p as f64 * h_fine)).collect();
                let mut rev = fine.clone();
                rev.reverse();
                (fine, rev)
            }
            None => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            grid,
            support,
            refine,
            fine,
            fine_reflected,
            h_fine,
        })
    }

    pub fn marching_step(&self) -> f64 {
        self.h_fine
    }

    /// Solves both Volterra equations at one wavenumber.
    pub fn solve(&self, k: Complex64) -> Result<JostColumn> {
        if k.im < 0.0 {
            return Err(Error::invalid(format!(
                "Jost functions are built for Im k >= 0, got k = {k}"
            )));
        }
        let (plus, minus) = match self.support {
            Some(_) => (
                Some(extrapolated_pass(&self.fine, self.h_fine, self.refine, k)?),
                Some(extrapolated_pass(&self.fine_reflected, self.h_fine, self.refine, k)?),
            ),
            None => (None, None),
        };
        Ok(JostColumn {
            k,
            grid: self.grid,
            support: self.support,
            plus,
            minus,
        })
    }
}

/// Jost functions on a whole frequency grid.
#[derive(Debug, Clone)]
pub struct JostSolution {
    kgrid: FrequencyGrid,
    columns: Vec<JostColumn>,
}

impl JostSolution {
    pub fn kgrid(&self) -> &FrequencyGrid {
        &self.kgrid
    }

    pub fn column(&self, i: usize) -> &JostColumn {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[JostColumn] {
        &self.columns
    }

    /// `m_+(x_j, k_i)`.
    pub fn m_plus(&self, j: usize, i: usize) -> Complex64 {
        self.columns[i].m_plus(j)
    }

    /// `m_-(x_j, k_i)`.
    pub fn m_minus(&self, j: usize, i: usize) -> Complex64 {
        self.columns[i].m_minus(j)
    }
}

/// Solves the Volterra equations for every node of `kgrid`, in parallel over `k`.
pub fn solve_jost(potential: &Potential, kgrid: &FrequencyGrid) -> Result<JostSolution> {
    let solver = JostSolver::new(potential, kgrid.band_limit())?;
    let columns = (0..kgrid.len())
        .into_par_iter()
        .map(|i| solver.solve(Complex64::new(kgrid.k(i), 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(JostSolution { kgrid: *kgrid, columns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::potential::PotentialFamily;

    fn sech2_grid() -> (SpatialGrid, Potential) {
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        (grid, Potential::preset("sech2", grid).unwrap())
    }

    #[test]
    fn free_potential_gives_unit_m() {
        let grid = SpatialGrid::new(30.0, 256).unwrap();
        let v = Potential::zero(grid);
        let kg = FrequencyGrid::new(4.0, 16).unwrap();
        let jost = solve_jost(&v, &kg).unwrap();
        for i in 0..kg.len() {
            for j in 0..grid.len() {
                assert_eq!(jost.m_plus(j, i), ONE);
                assert_eq!(jost.m_minus(j, i), ONE);
            }
        }
    }

    #[test]
    fn sech2_matches_closed_form() {
        // m_+(x,k) = (k + i tanh x)/(k + i), checked by substitution:
        // ψ = e^{ikx}(k + i tanh x) solves -ψ'' - 2 sech^2 x ψ = k^2 ψ.
        let (grid, v) = sech2_grid();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        let i = Complex64::new(0.0, 1.0);
        for &k in &[0.05, 0.5, 1.0, 3.0, 7.9] {
            let col = solver.solve(Complex64::new(k, 0.0)).unwrap();
            let mut worst: f64 = 0.0;
            for j in 0..grid.len() {
                let x = grid.x(j);
                let exact = (k + i * x.tanh()) / (k + i);
                worst = worst.max((col.m_plus(j) - exact).norm());
                // m_-(x,k) = m_+(-x,k) for an even potential.
                let exact_minus = (k - i * x.tanh()) / (k + i);
                worst = worst.max((col.m_minus(j) - exact_minus).norm());
            }
            assert!(worst < 1e-7, "k = {k}: {worst:e}");
        }
    }

    #[test]
    fn imaginary_wavenumber_matches_closed_form() {
        // For k = iκ the same closed form continues analytically.
        let (grid, v) = sech2_grid();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let k = Complex64::new(0.0, 0.7);
        let col = solver.solve(k).unwrap();
        for j in (0..grid.len()).step_by(7) {
            let x = grid.x(j);
            let exact = (k + i * x.tanh()) / (k + i);
            assert!((col.m_plus(j) - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_wavenumber_uses_kernel_limit() {
        let (grid, v) = sech2_grid();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        let col = solver.solve(ZERO).unwrap();
        // At k = 0: m_+(x,0) = tanh x (limit of the closed form), m_+' = sech^2 x.
        for j in (0..grid.len()).step_by(5) {
            let x = grid.x(j);
            assert!((col.m_plus(j) - Complex64::new(x.tanh(), 0.0)).norm() < 1e-8);
            let s = 1.0 / x.cosh();
            assert!((col.dm_plus(j) - Complex64::new(s * s, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn wronskian_is_constant_and_matches_transmission() {
        let grid = SpatialGrid::new(40.0, 1024).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        let col = solver.solve(Complex64::new(0.8, 0.0)).unwrap();
        let w0 = col.wronskian(0);
        for j in (0..grid.len()).step_by(13) {
            assert!((col.wronskian(j) - w0).norm() < 1e-9 * w0.norm());
        }
        let inv_t = ONE - col.int_v_m_plus() / Complex64::new(0.0, 1.6);
        let w_expected = Complex64::new(0.0, -1.6) * inv_t;
        assert!((w0 - w_expected).norm() < 1e-9);
    }

    #[test]
    fn ode_residual_is_small() {
        let grid = SpatialGrid::new(20.0, 4096).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        let solver = JostSolver::new(&v, 8.0).unwrap();
        for &k in &[0.3, 2.0, 6.0] {
            let col = solver.solve(Complex64::new(k, 0.0)).unwrap();
            let r = col.ode_residual(&v);
            assert!(r < 1e-6, "k = {k}: residual {r:e}");
        }
    }

    #[test]
    fn undecayed_potential_is_a_precondition_error() {
        let grid = SpatialGrid::new(5.0, 256).unwrap();
        let v = Potential::new(PotentialFamily::GaussianWell { depth: 1.0, width: 3.0 }, grid).unwrap();
        let kg = FrequencyGrid::new(4.0, 8).unwrap();
        assert!(matches!(solve_jost(&v, &kg), Err(Error::Precondition(_))));
    }

    #[test]
    fn marching_divergence_is_reported() {
        // Tunnelling through a tall barrier grows m like e^{20 · width}.
        let grid = SpatialGrid::new(100.0, 1024).unwrap();
        let v = Potential::new(
            PotentialFamily::Bump {
                depth: 400.0,
                width: 3.0,
            },
            grid,
        )
        .unwrap();
        let solver = JostSolver::new(&v, 1.0).unwrap();
        let r = solver.solve(Complex64::new(1.0, 0.0));
        assert!(matches!(r, Err(Error::NumericalInstability(_))));
    }
}
