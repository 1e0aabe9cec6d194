//! Φ, Φ⁻¹ and the Gaussian moment helpers.

use cltlab::numerics::{integral_of_phi, normal_abs_moment, normal_cdf, normal_quantile};

fn main() -> cltlab::Result<()> {
    for x in [-8.0, -1.0, 0.0, 1.0, 3.0] {
        println!("Phi({x:>4}) = {:.17e}", normal_cdf(x)?);
    }
    for u in [1e-300, 1e-10, 0.025, 0.5, 0.975] {
        println!("Phi^-1({u:e}) = {:.15}", normal_quantile(u)?);
    }
    for p in [1.0, 2.0, 2.5, 3.0, 4.0] {
        println!("E|Y|^{p} = {:.15}", normal_abs_moment(p)?);
    }
    // J(x) = ∫_{-∞}^x Φ.
    println!("J(1) = {:.16}", integral_of_phi(1.0)?);
    Ok(())
}
