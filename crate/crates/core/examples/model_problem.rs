//! The model equation i∂_t u = -∂²u + Vu + a₁u + a₂e^{iΘ}ū + bu² + |u|²u on a
//! repulsive bump (no bound state), with localized coefficients.

use nlslab::asymptotics::{decay_diagnostics, modified_profile, ProfileSeries, DEFAULT_ALPHA};
use nlslab::evolution::{evolve, EvolutionConfig, ModelCoefficients, PhaseRate, Variant};
use nlslab::initial::{gaussian_bump, PacketKind, Wavepacket};
use nlslab::spectral::{BoundStates, Potential, SpectralDecomposition};
use nlslab::{ComplexField, FrequencyGrid, SpatialGrid};
use num_complex::Complex64;

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(400.0, 2048)?;
    let kgrid = FrequencyGrid::new(8.0, 2048)?;
    let v = Potential::preset("bump", grid)?;
    let dec = SpectralDecomposition::build(&v, &kgrid, BoundStates::None)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let coeffs = ModelCoefficients {
        a1: gaussian_bump(&dec, Complex64::new(0.01, 0.0), 0.0, s),
        a2: gaussian_bump(&dec, Complex64::new(0.01, 0.0), 0.0, s),
        b: gaussian_bump(&dec, Complex64::new(0.05, 0.0), 0.0, s),
        phase_rate: PhaseRate::Constant(-0.25),
    };
    let u0 = Wavepacket {
        amplitude: 0.05,
        center: 0.0,
        velocity: 0.0,
        width: 4.0,
        kind: PacketKind::Physical,
        cutoff: 0.6,
    }
    .build(&dec)?;

    let t_end = 200.0;
    let cfg = EvolutionConfig::new(Variant::Model(coeffs), 0.05, t_end, 20);
    let traj = evolve(&u0, &cfg, &dec)?;
    println!(
        "mass drift {:.2e} (not conserved by the model terms)",
        traj.relative_mass_drift()
    );

    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= 1.0).collect();
    let times: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let refs: Vec<&ComplexField> = idx.iter().map(|&i| &traj.snapshots[i]).collect();

    let ex = decay_diagnostics(&times, &refs).exponents((20.0, t_end))?;
    println!("‖u‖∞ ~ t^{:.3}", ex.sup.exponent);

    let series = ProfileSeries::from_fields(&times, &refs, &dec)?;
    let w = modified_profile(
        &series,
        DEFAULT_ALPHA,
        &[12.5, 25.0, 50.0, 100.0],
        Some(grid.half_width()),
    )?;
    for (t, gap) in &w.gaps {
        println!("sup_k |w(2T) - w(T)| at T = {t:>5}: {gap:.3e}");
    }
    let d = series.phase_drift(series.peak_index(0.2), (25.0, t_end))?;
    println!("phase drift at k = {:.3}: relative error {:.3}", d.k, d.relative_error);
    Ok(())
}
