//! The counterexample martingale: atom at zero, Kolmogorov lower bound, moment cap.

use cltlab::experiment::{verify_ce, VerifyCeRequest};
use cltlab::models::{ce_generate, CeParams};
use cltlab::numerics::SeedLineage;

fn main() -> cltlab::Result<()> {
    let params = CeParams::new(100, 3.0)?;
    println!("a = {:.4}, k = {}, m = {}", params.a, params.k, params.m);
    println!("P(|S_m| in [a, 2a]) = {:.5}", params.branch_probability());

    let draw = ce_generate(&params, &mut SeedLineage::new(1, 0).rng());
    println!("one path: S_m = {:.4}, branch = {}", draw.s_m, draw.branch_taken);

    let rows = verify_ce(&VerifyCeRequest {
        n_grid: vec![64, 256, 1024],
        p: 3.0,
        replicates: 200_000,
        master_seed: 42,
        outputs: None,
    })?;
    for r in rows {
        println!(
            "n = {:>5}: P(S_n = 0) = {:.4} (need {:.4}), K = {:.4} (need {:.4}), max E|X|^3 = {:.3} (cap {:.3})",
            r.n, r.atom, r.atom_threshold, r.kolmogorov, r.kolmogorov_threshold, r.moment_max, r.moment_cap
        );
    }
    Ok(())
}
