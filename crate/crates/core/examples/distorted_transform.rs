//! Distorted Fourier transform of wavepackets: Plancherel, round trip,
//! diagonalization of H, and agreement of the two propagator routes.

use std::time::Instant;

use nlslab::spectral::{
    cross_validate, distorted_inverse, distorted_transform, BoundStates, Potential, SpectralDecomposition,
};
use nlslab::{ComplexField, FrequencyGrid, SpatialGrid};
use num_complex::Complex64;

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(400.0, 2048)?;
    let kgrid = FrequencyGrid::new(8.0, 2048)?;
    let v = Potential::preset("gaussian_well", grid)?;
    let t0 = Instant::now();
    let dec = SpectralDecomposition::build(&v, &kgrid, BoundStates::One)?;
    println!("decomposition built in {:.2?}", t0.elapsed());
    println!("rho^2 = {:.13}", dec.require_bound()?.rho2);

    for (xc, s, k0) in [(0.0, 4.0, 0.0), (-20.0, 3.0, 0.5), (10.0, 2.0, -1.0)] {
        let u = ComplexField::from_fn(grid, |x| {
            let g = (-(x - xc) * (x - xc) / (2.0 * s * s)).exp();
            Complex64::new(0.0, k0 * x).exp() * g
        });
        let pc = dec.project_continuous(&u);
        let ut = distorted_transform(&u, &dec)?;
        let plancherel = (ut.norm_l2() - pc.norm_l2()).abs() / pc.norm_l2();
        let back = distorted_inverse(&ut, &dec)?;
        let round_trip = back.sub(&pc)?.norm_l2() / pc.norm_l2();
        let hpc = dec.apply_hamiltonian(&pc);
        let diag = distorted_transform(&hpc, &dec)?
            .sub(&ut.multiply(|k| Complex64::new(k * k, 0.0)))
            .norm_l2()
            / ut.norm_l2();
        let cross = cross_validate(&u, 50.0, &dec)?;
        println!(
            "packet xc={xc:+} s={s} k0={k0:+}: plancherel {plancherel:.2e}  round trip {round_trip:.2e}  \
             diagonalization {diag:.2e}  propagator routes {cross:.2e}"
        );
    }
    Ok(())
}
