//! U_{l,n} and L_n for a chain martingale, exact and by Monte Carlo.

use cltlab::bounds::{l_n, u_ln, UMethod};
use cltlab::models::{ChainIncrements, ChainKind, Family, Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    let spec = ModelSpec::new(
        64,
        3.0,
        Family::RhoMixingChain {
            chain: ChainKind::General {
                transition: vec![vec![0.9, 0.1], vec![0.4, 0.6]],
            },
            // Centered under the stationary law (0.8, 0.2).
            values: vec![1.0, -4.0],
            increments: ChainIncrements::Martingale,
        },
    );
    let model = Model::compile(&spec)?;
    let mc = UMethod::MonteCarlo { replicates: 20_000, seed: 5 };
    for ell in [2, 8, 32, 64] {
        let exact = u_ln(ell, 3.0, &model, UMethod::Exact)?;
        let est = u_ln(ell, 3.0, &model, mc)?;
        println!("U_{ell},64: exact {:.5}   MC {:.5} +- {:.5}", exact.value, est.value, est.se);
    }
    for a in [1.0, 2.0, 4.0] {
        println!("L_n(a = {a}) = {:.5}", l_n(3.0, 1.0, a, &model, UMethod::Exact)?.value);
    }
    Ok(())
}
