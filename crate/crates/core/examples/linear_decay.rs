//! Dispersive decay of e^{iHt}P_c h: sup, weighted and local-derivative
//! exponents, local smoothing, profile constancy and the far-field resolver.

use nlslab::asymptotics::{decay_diagnostics, linear_smoothing, resolve_convention, ProfileSeries, DEFAULT_ALPHA};
use nlslab::initial::{PacketKind, Wavepacket};
use nlslab::spectral::{linear_propagator, BoundStates, Potential, SpectralDecomposition};
use nlslab::{ComplexField, FrequencyGrid, SpatialGrid};

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(400.0, 2048)?;
    let kgrid = FrequencyGrid::new(8.0, 2048)?;
    let v = Potential::preset("gaussian_well", grid)?;
    let dec = SpectralDecomposition::build(&v, &kgrid, BoundStates::One)?;
    let packet = Wavepacket {
        amplitude: 0.05,
        center: 0.0,
        velocity: 0.0,
        width: 4.0,
        kind: PacketKind::Physical,
        cutoff: 0.6,
    };
    let h = packet.build(&dec)?;

    let times: Vec<f64> = (1..=200).map(f64::from).collect();
    let fields = times
        .iter()
        .map(|&t| linear_propagator(&h, t, &dec))
        .collect::<nlslab::Result<Vec<ComplexField>>>()?;
    let refs: Vec<&ComplexField> = fields.iter().collect();

    let ex = decay_diagnostics(&times, &refs).exponents((20.0, 200.0))?;
    println!(
        "sup exponent               {:+.3} (r² {:.4})",
        ex.sup.exponent, ex.sup.r2
    );
    println!("<x>^-2 weighted exponent   {:+.3}", ex.weighted_sup.exponent);
    println!("<x>^-1 d/dx local exponent {:+.3}", ex.local_derivative.exponent);

    let series = ProfileSeries::from_fields(&times, &refs, &dec)?;
    let first = &series.profiles[0];
    let drift = series
        .profiles
        .iter()
        .flat_map(|p| p.iter().zip(first).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    println!("profile drift max_t |f(t) - f(1)|: {drift:.2e}");

    let half = linear_smoothing(&h, &times[..100], 0.5, &dec)?;
    let full = linear_smoothing(&h, &times, 0.5, &dec)?;
    println!(
        "smoothing functional T = 200 over T = 100: low {:.4} {:.4}, high {:.4} {:.4}",
        full.low[0] / half.low[0],
        full.low[1] / half.low[1],
        full.high[0] / half.high[0],
        full.high[1] / half.high[1]
    );

    let probe = Wavepacket {
        velocity: 2.4,
        cutoff: 0.0,
        ..packet
    }
    .build(&dec)?;
    let sign = |s: f64| if s < 0.0 { '-' } else { '+' };
    for r in resolve_convention(&probe, 50.0, DEFAULT_ALPHA, &dec)? {
        println!(
            "  k = {}x/2t, phase e^({}ix²/4t): relative error {:.3}",
            sign(r.convention.map_sign),
            sign(r.convention.phase_sign),
            r.relative
        );
    }
    Ok(())
}
