//! Strang splitting for the full NLS and the model equation.
//!
//! The linear sub-flow `e^{iHΔt}` is exact in the eigenbasis of the discrete
//! Hamiltonian. Consecutive linear half-steps are merged between outputs.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{kinetic_energy, ComplexField};
use crate::io::{write_snapshots, CsvTable, SnapshotHeader};
use crate::spectral::{Potential, SpectralDecomposition};

/// Quartic prefactor of the functional conserved by the flow.
pub const C4_CONSERVED: f64 = 0.5;
/// Alternative quartic prefactor, tested and rejected by the conservation selection.
pub const C4_QUARTER: f64 = 0.25;
/// Outer fraction of the box monitored for radiation.
pub const BOUNDARY_FRACTION: f64 = 0.05;
/// Largest tolerated mass fraction in the outer region.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;
pub const MODEL_A_LIMIT: f64 = 0.1;
pub const MODEL_B_LIMIT: f64 = 0.3;

/// `E(t)` driving the phase `Θ(t) = 2∫₀ᵗ E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRate {
    Constant(f64),
    /// Piecewise linear, held constant outside the table.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl PhaseRate {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PhaseRate::Constant(e) => *e,
            PhaseRate::Tabulated { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                let i = times.partition_point(|&s| s <= t);
                if i == 0 {
                    values[0]
                } else if i == times.len() {
                    values[times.len() - 1]
                } else {
                    let (t0, t1) = (times[i - 1], times[i]);
                    let w = (t - t0) / (t1 - t0);
                    values[i - 1] * (1.0 - w) + values[i] * w
                }
            }
        }
    }
}

/// Coefficients of `i∂_t u = a₁u + a₂e^{iΘ}ū + bu² + |u|²u` (plus the linear part).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCoefficients {
    pub a1: ComplexField,
    pub a2: ComplexField,
    pub b: ComplexField,
    pub phase_rate: PhaseRate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    FullNls { lambda: f64 },
    Model(ModelCoefficients),
}

impl Variant {
    pub fn focusing() -> Self {
        Variant::FullNls { lambda: 1.0 }
    }

    fn name(&self) -> &'static str {
        match self {
            Variant::FullNls { .. } => "full_nls",
            Variant::Model(_) => "model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub variant: Variant,
    /// Signed step; negative runs backward in time.
    pub dt: f64,
    /// Signed final time, same sign as `dt`.
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub c4: f64,
    pub boundary_limit: f64,
}

impl EvolutionConfig {
    pub fn new(variant: Variant, dt: f64, t_end: f64, snapshot_stride: usize) -> Self {
        Self {
            variant,
            dt,
            t_end,
            snapshot_stride,
            c4: C4_CONSERVED,
            boundary_limit: BOUNDARY_MASS_LIMIT,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self, dec: &SpectralDecomposition) -> Result<()> {
        let dx = dec.grid().spacing();
        if !(self.dt != 0.0 && self.dt.abs() <= 0.5 * dx) {
            return Err(Error::invalid(format!(
                "|Δt| = {} must lie in (0, Δx/2 = {}]",
                self.dt.abs(),
                0.5 * dx
            )));
        }
        if !(self.t_end / self.dt >= 1.0 - 1e-9) {
            return Err(Error::invalid("t_end must be at least one step in the direction of Δt"));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "t_end = {} is not a multiple of Δt = {}",
                self.t_end, self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride must be at least 1"));
        }
        if let Variant::Model(m) = &self.variant {
            if [&m.a1, &m.a2, &m.b].iter().any(|f| f.grid() != dec.grid()) {
                return Err(Error::invalid("model coefficients live on a different grid"));
            }
            let (na1, na2, nb) = (m.a1.norm_sup(), m.a2.norm_sup(), m.b.norm_sup());
            if na1 > MODEL_A_LIMIT || na2 > MODEL_A_LIMIT || nb > MODEL_B_LIMIT {
                return Err(Error::OutOfRegime(format!(
                    "model coefficients too large: |a1| = {na1:.3}, |a2| = {na2:.3}, |b| = {nb:.3}"
                )));
            }
        }
        Ok(())
    }

    /// JSON description stored with trajectories.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "variant": self.variant.name(),
            "dt": self.dt,
            "t_end": self.t_end,
            "snapshot_stride": self.snapshot_stride,
            "c4": self.c4,
            "boundary_limit": self.boundary_limit,
        });
        match &self.variant {
            Variant::FullNls { lambda } => v["lambda"] = (*lambda).into(),
            Variant::Model(m) => {
                v["a1_sup"] = m.a1.norm_sup().into();
                v["a2_sup"] = m.a2.norm_sup().into();
                v["b_sup"] = m.b.norm_sup().into();
                v["phase_rate"] = serde_json::to_value(&m.phase_rate).unwrap_or_default();
            }
        }
        v
    }
}

/// Mass and energy of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conserved {
    pub mass: f64,
    pub energy: f64,
}

/// `∫|u|²` and `∫|∂ₓu|² + V|u|² - c₄λ|u|⁴` for general `c₄`, `λ`.
pub fn conserved_quantities_with(u: &ComplexField, v: &Potential, c4: f64, lambda: f64) -> Conserved {
    let dx = u.grid().spacing();
    let mut mass = 0.0;
    let mut pot = 0.0;
    let mut quartic = 0.0;
    for (val, vx) in u.values().iter().zip(v.values()) {
        let m = val.norm_sqr();
        mass += m;
        pot += vx * m;
        quartic += m * m;
    }
    Conserved {
        mass: mass * dx,
        energy: kinetic_energy(u) + (pot - c4 * lambda * quartic) * dx,
    }
}

/// Mass and energy with the default quartic prefactor and `λ = +1`.
pub fn conserved_quantities(u: &ComplexField, v: &Potential) -> Conserved {
    conserved_quantities_with(u, v, C4_CONSERVED, 1.0)
}

/// Snapshots and conserved quantities of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ComplexField>,
    /// Conserved quantities at each stored time.
    pub conserved: Vec<Conserved>,
    pub config: serde_json::Value,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &ComplexField {
        self.snapshots.last().expect("trajectory holds the initial datum")
    }

    /// Index of the stored time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// `max_t |M(t) - M(0)| / M(0)`.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.conserved[0].mass;
        self.conserved
            .iter()
            .map(|c| (c.mass - m0).abs() / m0)
            .fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.conserved[0].energy;
        self.conserved.iter().map(|c| (c.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn conserved_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["t", "mass", "energy"]);
        for (s, c) in self.times.iter().zip(&self.conserved) {
            t.push(vec![*s, c.mass, c.energy]);
        }
        t
    }

    pub fn write(&self, snapshots: &Path, conserved: &Path) -> Result<()> {
        let header = SnapshotHeader {
            grid: *self.snapshots[0].grid(),
            times: self.times.clone(),
            config: self.config.clone(),
        };
        let rows: Vec<Vec<Complex64>> = self.snapshots.iter().map(|s| s.values().to_vec()).collect();
        write_snapshots(snapshots, &header, &rows)?;
        self.conserved_csv().write(conserved)
    }
}

fn model_rhs(m: &ModelCoefficients, j: usize, u: Complex64, rot: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let n = m.a1.values()[j] * u + m.a2.values()[j] * rot * u.conj() + m.b.values()[j] * u * u + u * u.norm_sqr();
    -i * n
}

struct Stepper<'a> {
    cfg: &'a EvolutionConfig,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    theta: f64,
}

impl Stepper<'_> {
    fn linear(&self, re: &mut [f64], im: &mut [f64], phases: &[Complex64]) {
        for ((r, i), p) in re.iter_mut().zip(im.iter_mut()).zip(phases) {
            let c = Complex64::new(*r, *i) * p;
            *r = c.re;
            *i = c.im;
        }
    }

    /// Nonlinear flow over `[t, t + Δt]`.
    fn nonlinear(&mut self, u: &mut ComplexField, t: f64) {
        let dt = self.cfg.dt;
        match &self.cfg.variant {
            Variant::FullNls { lambda } => {
                for v in u.values_mut() {
                    *v *= Complex64::from_polar(1.0, -lambda * v.norm_sqr() * dt);
                }
            }
            Variant::Model(m) => {
                let rate = |s: f64| m.phase_rate.eval(s);
                let th0 = self.theta;
                let th_mid = th0 + 0.5 * dt * (rate(t) + rate(t + 0.5 * dt));
                let th1 = th0 + dt * (rate(t) + rate(t + dt));
                let (r0, rm, r1) = (
                    Complex64::from_polar(1.0, th0),
                    Complex64::from_polar(1.0, th_mid),
                    Complex64::from_polar(1.0, th1),
                );
                for (j, v) in u.values_mut().iter_mut().enumerate() {
                    let k1 = model_rhs(m, j, *v, r0);
                    let k2 = model_rhs(m, j, *v + 0.5 * dt * k1, rm);
                    let k3 = model_rhs(m, j, *v + 0.5 * dt * k2, rm);
                    let k4 = model_rhs(m, j, *v + dt * k3, r1);
                    *v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                self.theta = th1;
            }
        }
    }
}

/// Integrates from `u0` at `t = 0` and stores every `snapshot_stride` steps
/// plus the final state.
pub fn evolve(u0: &ComplexField, cfg: &EvolutionConfig, dec: &SpectralDecomposition) -> Result<Trajectory> {
    cfg.validate(dec)?;
    if u0.grid() != dec.grid() {
        return Err(Error::invalid("initial datum lives on a different grid"));
    }
    if !u0.is_finite() {
        return Err(Error::invalid("initial datum is not finite"));
    }
    let lambda = match cfg.variant {
        Variant::FullNls { lambda } => lambda,
        Variant::Model(_) => 1.0,
    };
    let v = dec.potential();
    let check_boundary = |u: &ComplexField, t: f64| -> Result<()> {
        let f = u.boundary_mass_fraction(BOUNDARY_FRACTION);
        if f > cfg.boundary_limit {
            return Err(Error::BoundaryPollution { time: t, fraction: f });
        }
        Ok(())
    };
    check_boundary(u0, 0.0)?;

    let lambdas = dec.eigenvalues();
    let phase = |s: f64| -> Vec<Complex64> { lambdas.iter().map(|l| Complex64::from_polar(1.0, l * s)).collect() };
    let mut st = Stepper {
        cfg,
        half: phase(0.5 * cfg.dt),
        full: phase(cfg.dt),
        theta: 0.0,
    };

    let mut traj = Trajectory {
        times: vec![0.0],
        snapshots: vec![u0.clone()],
        conserved: vec![conserved_quantities_with(u0, v, cfg.c4, lambda)],
        config: cfg.echo(),
    };
    let mass0 = traj.conserved[0].mass;
    let (mut re, mut im) = dec.to_eigen(u0);
    let mut synced = true;
    let steps = cfg.steps();
    let mut last_good = 0.0;
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * cfg.dt;
        let t1 = step as f64 * cfg.dt;
        if synced {
            st.linear(&mut re, &mut im, &st.half);
        }
        let mut u = dec.from_eigen(&re, &im);
        st.nonlinear(&mut u, t0);
        (re, im) = dec.to_eigen(&u);
        let mass: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum();
        if !mass.is_finite() || mass > 1e12 * mass0.max(1e-300) {
            return Err(Error::BlowUp {
                last_good_time: last_good,
                message: format!("mass {mass:e} at step {step}"),
            });
        }
        last_good = t1;
        let store = step % cfg.snapshot_stride == 0 || step == steps;
        if store {
            st.linear(&mut re, &mut im, &st.half);
            synced = true;
            let u = dec.from_eigen(&re, &im);
            check_boundary(&u, t1)?;
            traj.times.push(t1);
            traj.conserved.push(conserved_quantities_with(&u, v, cfg.c4, lambda));
            traj.snapshots.push(u);
        } else {
            st.linear(&mut re, &mut im, &st.full);
            synced = false;
        }
    }
    Ok(traj)
}

/// Energy drift ratio under `Δt`-halving for each candidate quartic prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationSelection {
    pub c4: f64,
    pub drift_coarse: f64,
    pub drift_fine: f64,
    pub ratio: f64,
}

/// Runs the same full-NLS evolution at `Δt` and `Δt/2` and reports the
/// energy-drift reduction for `c₄ = 1/4` and `c₄ = 1/2`.
pub fn conservation_selection(
    u0: &ComplexField,
    dt: f64,
    t_end: f64,
    dec: &SpectralDecomposition,
) -> Result<[ConservationSelection; 2]> {
    let run = |dt: f64| evolve(u0, &EvolutionConfig::new(Variant::focusing(), dt, t_end, 1), dec);
    let coarse = run(dt)?;
    let fine = run(0.5 * dt)?;
    let v = dec.potential();
    let drift = |traj: &Trajectory, c4: f64| {
        let e: Vec<f64> = traj
            .snapshots
            .iter()
            .map(|u| conserved_quantities_with(u, v, c4, 1.0).energy)
            .collect();
        e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max)
    };
    let pick = |c4: f64| {
        let a = drift(&coarse, c4);
        let b = drift(&fine, c4);
        ConservationSelection {
            c4,
            drift_coarse: a,
            drift_fine: b,
            ratio: a / b,
        }
    };
    Ok([pick(C4_QUARTER), pick(C4_CONSERVED)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundstate::solve_nonlinear_bound_state;
    use crate::grid::{FrequencyGrid, SpatialGrid};
    use crate::spectral::{linear_propagator, BoundStates};

    fn setup(l: f64, n: usize) -> SpectralDecomposition {
        let grid = SpatialGrid::new(l, n).unwrap();
        let kg = FrequencyGrid::new(4.0, 64).unwrap();
        let v = Potential::preset("gaussian_well", grid).unwrap();
        SpectralDecomposition::build(&v, &kg, BoundStates::One).unwrap()
    }

    fn packet(dec: &SpectralDecomposition, amp: f64, x0: f64, k0: f64) -> ComplexField {
        ComplexField::from_fn(*dec.grid(), |x| {
            Complex64::from_polar(amp * (-(x - x0) * (x - x0) / 8.0).exp(), k0 * x)
        })
    }

    fn sup_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.sub(b).unwrap().norm_sup()
    }

    #[test]
    fn tiny_amplitude_follows_the_linear_flow() {
        let dec = setup(60.0, 512);
        let u0 = packet(&dec, 1e-6, -5.0, 0.5);
        let cfg = EvolutionConfig::new(Variant::focusing(), 0.1, 10.0, 50);
        let traj = evolve(&u0, &cfg, &dec).unwrap();
        let lin = linear_propagator(&u0, 10.0, &dec).unwrap();
        let rel = sup_diff(traj.last(), &lin) / lin.norm_sup();
        assert!(rel < 1e-6, "{rel:e}");
        assert_eq!(traj.times.len(), 3);
        assert_eq!(traj.snapshots[0], u0);
    }

    #[test]
    fn solitary_wave_rotates_in_phase() {
        let dec = setup(30.0, 256);
        let s = solve_nonlinear_bound_state(Complex64::new(0.1, 0.05), &dec).unwrap();
        let cfg = EvolutionConfig::new(Variant::focusing(), 0.05, 20.0, 400);
        let traj = evolve(&s.q_field, &cfg, &dec).unwrap();
        let exact = s.q_field.scale(Complex64::from_polar(1.0, s.energy * 20.0));
        let err = sup_diff(traj.last(), &exact);
        assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn strang_is_second_order() {
        let dec = setup(30.0, 256);
        let mut u0 = packet(&dec, 0.3, 0.0, 0.3);
        u0 = u0.add(&dec.require_bound().unwrap().phi.scale_real(0.1)).unwrap();
        let run = |dt: f64| evolve(&u0, &EvolutionConfig::new(Variant::focusing(), dt, 4.0, 100_000), &dec).unwrap();
        let reference = run(0.1 / 8.0);
        let e1 = sup_diff(run(0.1).last(), reference.last());
        let e2 = sup_diff(run(0.05).last(), reference.last());
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn mass_is_conserved_and_energy_selects_one_half() {
        let dec = setup(60.0, 512);
        let mut u0 = packet(&dec, 0.4, 0.0, 0.2);
        u0 = u0.add(&dec.require_bound().unwrap().phi.scale_real(0.2)).unwrap();
        let cfg = EvolutionConfig::new(Variant::focusing(), 0.05, 10.0, 10);
        let traj = evolve(&u0, &cfg, &dec).unwrap();
        assert!(traj.relative_mass_drift() < 1e-12, "{:e}", traj.relative_mass_drift());
        let sel = conservation_selection(&u0, 0.1, 4.0, &dec).unwrap();
        assert!((sel[1].ratio - 4.0).abs() < 0.6, "{:?}", sel);
        assert!((sel[0].ratio - 4.0).abs() > 1.5, "{:?}", sel);
        let zero = conserved_quantities(&ComplexField::zeros(*dec.grid()), dec.potential());
        assert_eq!((zero.mass, zero.energy), (0.0, 0.0));
        assert_eq!(traj.conserved_csv().len(), traj.len());
    }

    #[test]
    fn gauge_equivariance_and_time_reversal() {
        let dec = setup(30.0, 256);
        let u0 = packet(&dec, 0.3, 0.0, 0.4);
        let cfg = EvolutionConfig::new(Variant::focusing(), 0.05, 3.0, 1000);
        let a = evolve(&u0, &cfg, &dec).unwrap();
        let w = Complex64::from_polar(1.0, 0.7);
        let b = evolve(&u0.scale(w), &cfg, &dec).unwrap();
        assert!(sup_diff(&a.last().scale(w), b.last()) < 1e-13);

        let back = EvolutionConfig::new(Variant::focusing(), -0.05, -3.0, 1000);
        let r = evolve(a.last(), &back, &dec).unwrap();
        let err = sup_diff(r.last(), &u0);
        assert!(err < 1e-3 * u0.norm_sup(), "{err:e}");
    }

    #[test]
    fn model_with_zero_coefficients_is_the_full_equation() {
        let dec = setup(30.0, 256);
        let u0 = packet(&dec, 0.2, 0.0, 0.4);
        let zero = ComplexField::zeros(*dec.grid());
        let model = Variant::Model(ModelCoefficients {
            a1: zero.clone(),
            a2: zero.clone(),
            b: zero,
            phase_rate: PhaseRate::Constant(-0.3),
        });
        let a = evolve(&u0, &EvolutionConfig::new(Variant::focusing(), 0.05, 2.0, 100), &dec).unwrap();
        let b = evolve(&u0, &EvolutionConfig::new(model, 0.05, 2.0, 100), &dec).unwrap();
        assert!(sup_diff(a.last(), b.last()) < 1e-13);
    }

    #[test]
    fn model_phase_is_accumulated() {
        // With only a₂ active and no linear part the phase enters through e^{iΘ}.
        let rate = PhaseRate::Tabulated {
            times: vec![0.0, 1.0],
            values: vec![0.0, 2.0],
        };
        assert_eq!(rate.eval(-1.0), 0.0);
        assert_eq!(rate.eval(0.5), 1.0);
        assert_eq!(rate.eval(3.0), 2.0);
    }

    #[test]
    fn failures_are_reported() {
        let dec = setup(30.0, 256);
        let wide = packet(&dec, 0.1, 27.0, 0.0);
        let cfg = EvolutionConfig::new(Variant::focusing(), 0.05, 1.0, 10);
        assert!(matches!(
            evolve(&wide, &cfg, &dec),
            Err(Error::BoundaryPollution { .. })
        ));

        let big = ComplexField::from_real_fn(*dec.grid(), |x| 1e3 * (-x * x).exp());
        let zero = ComplexField::zeros(*dec.grid());
        let model = Variant::Model(ModelCoefficients {
            a1: zero.clone(),
            a2: zero.clone(),
            b: zero,
            phase_rate: PhaseRate::Constant(0.0),
        });
        let cfg = EvolutionConfig::new(model, 0.1, 1.0, 10);
        assert!(matches!(evolve(&big, &cfg, &dec), Err(Error::BlowUp { .. })));

        let bad = EvolutionConfig::new(Variant::focusing(), 1.0, 10.0, 1);
        assert!(matches!(evolve(&wide, &bad, &dec), Err(Error::InvalidArgument(_))));
    }
}
