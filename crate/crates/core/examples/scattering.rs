//! Jost solutions and scattering data for the Gaussian well and the
//! reflectionless sech² well, plus the zero-energy genericity test.

use nlslab::spectral::{check_generic, compute_scattering, solve_jost, Potential};
use nlslab::{FrequencyGrid, SpatialGrid};
use num_complex::Complex64;

fn main() -> nlslab::Result<()> {
    let grid = SpatialGrid::new(40.0, 2048)?;
    let kgrid = FrequencyGrid::new(8.0, 512)?;

    for name in ["gaussian_well", "sech2"] {
        let v = Potential::preset(name, grid)?;
        let jost = solve_jost(&v, &kgrid)?;
        let data = compute_scattering(&jost, &v)?;
        let generic = check_generic(&v)?;
        println!("{name}:");
        println!("  unitarity defect   {:.2e}", data.unitarity_defect);
        println!("  cross defect       {:.2e}", data.cross_defect);
        println!("  max |R|            {:.2e}", data.max_reflection());
        println!("  |T(-k) - conj T(k)| {:.2e}", data.symmetry.t_conj);
        println!("  ∫V m+(x,0) = {:.6}  generic: {}", generic.value, generic.is_generic);
        if generic.is_generic {
            println!("  T(k)/k spread on smallest nodes {:.2e}", data.small_k_spread());
        }
        let i = kgrid.len() * 5 / 8;
        let c = data.coefficients(i);
        println!("  k = {:.3}: T = {:.6}, R+ = {:.2e}", kgrid.k(i), c.t, c.r_plus.norm());
    }

    // m+ for -2 sech² x is (k + i tanh x)/(k + i).
    let v = Potential::preset("sech2", grid)?;
    let jost = solve_jost(&v, &kgrid)?;
    let mut err: f64 = 0.0;
    for i in 0..kgrid.len() {
        let k = kgrid.k(i);
        for j in (0..grid.len()).step_by(16) {
            let x = grid.x(j);
            let exact = (Complex64::new(k, x.tanh())) / Complex64::new(k, 1.0);
            err = err.max((jost.m_plus(j, i) - exact).norm());
        }
    }
    println!("sech² closed form, sup error of m+: {err:.2e}");
    Ok(())
}
