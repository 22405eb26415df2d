//! Linear bound state, the small nonlinear bound-state branch Q[z], and the
//! refined profiles attached to an asymptotic modulus.

use nlslab::boundstate::{
    bound_state_jacobian, gauge_identity_defect, measured_order, sample_branch, solve_nonlinear_bound_state,
    solve_refined_profiles,
};
use nlslab::experiment::shooting_rho2;
use nlslab::spectral::{BoundStates, Potential, SpectralDecomposition};
use nlslab::{FrequencyGrid, SpatialGrid};
use num_complex::Complex64;

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(100.0, 1024)?;
    let kgrid = FrequencyGrid::new(8.0, 1024)?;
    let v = Potential::preset("gaussian_well", grid)?;
    let dec = SpectralDecomposition::build(&v, &kgrid, BoundStates::One)?;
    let pair = dec.require_bound()?;
    println!("eigen solve  rho^2 = {:.12}", pair.rho2);
    println!("shooting     rho^2 = {:.12}", shooting_rho2(&v, 20.0)?);

    let z = Complex64::from_polar(0.08, 0.7);
    let s = solve_nonlinear_bound_state(z, &dec)?;
    println!(
        "Q[z] at |z| = 0.08: E = {:.10}, residual {:.2e} after {} iterations",
        s.energy, s.residual, s.iterations
    );
    let jac = bound_state_jacobian(z, &dec)?;
    println!(
        "gauge identity DQ[z] iz = iQ: defect {:.2e}",
        gauge_identity_defect(&jac, &s.q_field)
    );

    let branch = sample_branch(&[0.16, 0.08, 0.04, 0.02, 0.01], &dec)?;
    for b in &branch {
        println!(
            "  |z| = {:.3}  E + rho^2 = {:+.4e}  |q| = {:.3e}",
            b.modulus,
            b.energy + pair.rho2,
            b.q_norm
        );
    }
    println!(
        "order of E + rho^2 in |z|: {:.3}",
        measured_order(&branch, |b| (b.energy + pair.rho2).abs())
    );

    let r = solve_refined_profiles(Complex64::new(0.08, 0.0), &dec)?;
    println!(
        "refined profiles: residuals {:.1e} / {:.1e}, contraction {:.2e}, |A| {:.3e}, |B| {:.3e}",
        r.residuals[0],
        r.residuals[1],
        r.contraction,
        r.frak_a.norm_l2(),
        r.frak_b.norm_l2()
    );
    Ok(())
}
