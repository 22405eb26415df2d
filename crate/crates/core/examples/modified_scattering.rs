//! Pure radiation under the full cubic flow: profiles f̃(t,k), the
//! logarithmic phase correction w = e^{iΦ/2}f̃, dyadic Cauchy gaps of w, the
//! phase drift at the peak frequency, and the cubic resonance check.

use nlslab::asymptotics::{cubic_resonance_check, modified_profile, ProfileSeries, DEFAULT_ALPHA};
use nlslab::evolution::{evolve, EvolutionConfig, Variant};
use nlslab::initial::{PacketKind, Wavepacket};
use nlslab::spectral::{BoundStates, Potential, SpectralDecomposition};
use nlslab::{ComplexField, FrequencyGrid, SpatialGrid};

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(400.0, 2048)?;
    let kgrid = FrequencyGrid::new(8.0, 2048)?;
    let v = Potential::preset("gaussian_well", grid)?;
    let dec = SpectralDecomposition::build(&v, &kgrid, BoundStates::One)?;
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
    let traj = evolve(&u0, &EvolutionConfig::new(Variant::focusing(), 0.05, t_end, 20), &dec)?;
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= 1.0).collect();
    let times: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let eta: Vec<ComplexField> = idx
        .iter()
        .map(|&i| dec.project_continuous(&traj.snapshots[i]))
        .collect();
    let refs: Vec<&ComplexField> = eta.iter().collect();

    let series = ProfileSeries::from_fields(&times, &refs, &dec)?;
    let w = modified_profile(&series, DEFAULT_ALPHA, &[25.0, 50.0, 100.0], Some(grid.half_width()))?;
    for (t, gap) in &w.gaps {
        println!("sup_k |w(2T) - w(T)| at T = {t:>5}: {gap:.3e}");
    }
    println!("decreasing: {}", w.gaps_decreasing());

    let k0 = series.peak_index(0.2);
    let d = series.phase_drift(k0, (25.0, t_end))?;
    println!(
        "phase of f̃ at k = {:.3}: slope {:.4e} per log t, predicted {:.4e}, |f̃| variation {:.1e}",
        d.k, d.slope, d.predicted, d.modulus_variation
    );

    let res = cubic_resonance_check(&times, &refs, (0.5, 2.0), DEFAULT_ALPHA, &dec)?;
    let fit = res.fit((10.0, t_end))?;
    println!("cubic resonance deviation ~ t^{:.3} (r² {:.3})", fit.exponent, fit.r2);
    Ok(())
}
